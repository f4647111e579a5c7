//! Level-shift deflation: build `H + K·P` from an operator and its ground
//! eigenspace, choose and validate the shift `K`, and iterate the
//! construction into a ladder that turns the k-th excited state of the
//! original operator into a ground state.
//!
//! The point of the construction: for `K` larger than the spectral gap, the
//! deflated operator keeps every eigenvector of the original while moving
//! only the deflated eigenvalue up by `K`, so ordinary ground-state
//! machinery reaches excited states. Every returned excited state is
//! re-verified against the original operator, never only the deflated one.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::engines::{solve_ground, GroundResult, SolverConfig};
use crate::error::{Error, Result};
use crate::operator::{
    norm2, BoundSource, Eigenspace, HermitianOperator, Projector, ShiftTerm, StateVector,
};
use crate::rng::SplitMix64;

/// Residual tolerance (relative to spectral scale) applied when checking
/// that a supplied eigenspace really belongs to the operator being deflated.
const GROUND_RESIDUAL_TOL: f64 = 1e-6;
/// Escalation bound when a chosen shift keeps failing validation.
const MAX_ESCALATIONS: usize = 8;
/// Multiplier applied to the shift when validation is indeterminate; an
/// irrational-ish factor breaks an accidental coincidence generically.
const INDETERMINATE_BUMP: f64 = 1.37;

/// One rung of the deflation ladder: the shift applied, the energy and
/// projector of the eigenspace it lifted, and the resulting operator.
#[derive(Debug, Clone)]
pub struct DeflationLevel {
    pub shift_k: f64,
    pub ground_energy: f64,
    pub projector: Projector,
    pub operator: HermitianOperator,
}

impl DeflationLevel {
    /// Randomized action probes: `H_next v = H_prev v + K·P v` within
    /// `1e-10` relative on seeded vectors.
    pub fn verify_action(&self, predecessor: &HermitianOperator) -> Result<()> {
        let dim = predecessor.dim();
        let (scale, _) = self.operator.spectral_scale();
        let mut rng = SplitMix64::new(0xDEF1_A7E0_0000_0001);
        for _ in 0..5 {
            let v = rng.unit_vector(dim);
            let lhs = self.operator.apply_raw(&v.view())?;
            let mut rhs = predecessor.apply_raw(&v.view())?;
            let pv = self
                .projector
                .project(&StateVector::new(v.clone()))?
                .into_coords();
            rhs.zip_mut_with(&pv, |ri, pi| *ri += Complex64::new(self.shift_k, 0.0) * pi);
            let mut diff = lhs;
            diff.zip_mut_with(&rhs, |di, ri| *di -= ri);
            let dev = norm2(&diff.view());
            if dev > 1e-10 * scale.max(1.0) {
                return Err(Error::InvalidEigenspace {
                    detail: format!(
                        "deflated operator deviates from predecessor + K·P by {dev:.3e}"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// `H + K·P` with `P` the projector onto the ground eigenspace. The result
/// is matrix-free: the base operator plus one accumulated rank-`d` shift
/// term, so repeated deflation stays O(rank) per application.
pub fn build_deflated(
    h: &HermitianOperator,
    ground: &Eigenspace,
    shift: f64,
) -> Result<HermitianOperator> {
    if shift.is_nan() || shift <= 0.0 {
        return Err(Error::NonPositiveShift { shift });
    }
    let (scale, _) = h.spectral_scale();
    let worst = ground.max_residual_against(h)?;
    if worst > GROUND_RESIDUAL_TOL * scale.max(1.0) {
        return Err(Error::InvalidEigenspace {
            detail: format!(
                "supplied eigenspace has residual {worst:.3e} against the operator (tolerance {:.3e})",
                GROUND_RESIDUAL_TOL * scale.max(1.0)
            ),
        });
    }
    let term = ShiftTerm {
        strength: shift,
        basis: ground.basis.iter().map(|v| v.coords().clone()).collect(),
    };
    HermitianOperator::from_shifted(Arc::new(h.clone()), vec![term])
}

/// A chosen shift and the provenance of the spectral bound behind it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShiftChoice {
    pub value: f64,
    pub source: BoundSource,
}

/// `K = (λ_upper − E₀) + max(1, 0.1·(λ_upper − E₀))`, with `λ_upper` the
/// Gershgorin upper bound (or the flagged power-iteration heuristic for
/// operators without entry access). Since the first excited energy cannot
/// exceed `λ_upper`, the gap condition `K > E₁ − E₀` holds whenever the
/// bound does.
pub fn select_shift(h: &HermitianOperator, ground: &Eigenspace) -> ShiftChoice {
    let (upper, source) = h.spectrum_upper_bound();
    let span = (upper - ground.eigenvalue).max(0.0);
    ShiftChoice {
        value: span + span.mul_add(0.1, 0.0).max(1.0),
        source,
    }
}

/// Outcome of the runtime shift check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftVerdict {
    Valid,
    TooSmall,
    Indeterminate,
}

/// Measured evidence for a verdict: the ground solve of the deflated
/// operator, how far its minimum sits from `E₀+K`, and how much of the
/// measured ground eigenspace lies inside the deflated projector's range.
#[derive(Debug, Clone)]
pub struct ShiftValidation {
    pub verdict: ShiftVerdict,
    pub measured_min: f64,
    /// Half-width of the decision band around `E₀+K`.
    pub band: f64,
    /// Smallest `‖P ψ‖²` over the measured ground basis.
    pub overlap: f64,
    pub ground: GroundResult,
    pub notes: Vec<String>,
}

/// The paper-prescribed runtime check: solve the ground state of the
/// deflated operator and compare the minimum against `E₀+K`. A minimum away
/// from `E₀+K` certifies the shift; a minimum at `E₀+K` whose eigenvectors
/// sit inside the deflated subspace convicts the shift as too small;
/// anything else (including an accidental coincidence `E₁ ≈ E₀+K`) is
/// indeterminate.
pub fn validate_shift(
    h1: &HermitianOperator,
    e0: f64,
    shift: f64,
    cfg: &SolverConfig,
) -> Result<ShiftValidation> {
    let term = h1.shift_terms().last().ok_or_else(|| Error::Unsupported {
        operation: "validate_shift".into(),
        detail: "operator carries no shift terms".into(),
    })?;
    if (term.strength() - shift).abs() > 1e-12 * shift.abs().max(1.0) {
        return Err(Error::Unsupported {
            operation: "validate_shift".into(),
            detail: format!(
                "last shift term has strength {} but K={shift} was supplied",
                term.strength()
            ),
        });
    }
    let projector = Projector::new(term.basis_vectors().collect())?;
    let ground = solve_ground(h1, cfg)?;
    let (scale, _) = h1.spectral_scale();
    let band = 10.0 * cfg.residual_tol * scale;
    let measured_min = ground.eigenvalue();
    let lifted = e0 + shift;
    let mut notes = Vec::new();

    let verdict = if !ground.converged {
        notes.push(format!(
            "ground solve of the deflated operator did not converge within {} iterations",
            ground.iterations
        ));
        ShiftVerdict::Indeterminate
    } else if (measured_min - lifted).abs() > band {
        ShiftVerdict::Valid
    } else {
        let overlap = min_overlap(&projector, &ground.eigenspace)?;
        if overlap > 0.99 {
            ShiftVerdict::TooSmall
        } else {
            notes.push(format!(
                "minimum coincides with E0+K but overlap with the deflated subspace is {overlap:.3}"
            ));
            ShiftVerdict::Indeterminate
        }
    };
    let overlap = min_overlap(&projector, &ground.eigenspace)?;
    Ok(ShiftValidation {
        verdict,
        measured_min,
        band,
        overlap,
        ground,
        notes,
    })
}

fn min_overlap(projector: &Projector, space: &Eigenspace) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for v in &space.basis {
        worst = worst.min(projector.overlap_fraction(v)?);
    }
    Ok(worst)
}

/// A validated deflation rung together with the solves behind it.
#[derive(Debug, Clone)]
pub struct ExcitedResult {
    /// Eigenspace of the target state, residuals re-verified against the
    /// ORIGINAL operator.
    pub eigenspace: Eigenspace,
    pub level: DeflationLevel,
    pub validation: ShiftValidation,
    /// Ground solve of the operator that was deflated.
    pub ground: GroundResult,
    pub shift_choice: ShiftChoice,
    pub escalations: usize,
}

/// First excited state via one deflation rung: ground-solve, select `K`,
/// build `H₁`, validate, and re-verify the outcome against the original
/// operator. A `too_small` verdict doubles `K`; an indeterminate one bumps
/// it by 37%; at most [`MAX_ESCALATIONS`] retries.
pub fn first_excited(h: &HermitianOperator, cfg: &SolverConfig) -> Result<ExcitedResult> {
    first_excited_with_shift(h, cfg, None)
}

/// [`first_excited`] with an explicit shift override. An overridden shift
/// is validated but never escalated: the verdict is reported as measured,
/// and a non-valid verdict leaves the eigenspace set to the measured ground
/// of the deflated operator (which then is NOT an excited state of the
/// input).
pub fn first_excited_with_shift(
    h: &HermitianOperator,
    cfg: &SolverConfig,
    shift_override: Option<f64>,
) -> Result<ExcitedResult> {
    cfg.validate()?;
    if h.dim() < 2 {
        return Err(Error::Unsupported {
            operation: "first_excited".into(),
            detail: format!("dimension must be at least 2, got {}", h.dim()),
        });
    }
    let ground = solve_ground(h, cfg)?;
    if !ground.converged {
        return Err(Error::NonConvergence {
            detail: "ground solve of the input operator did not converge".into(),
        });
    }
    deflate_above(h, &ground, cfg, shift_override)
}

/// Shared rung builder: deflates the supplied ground eigenspace of `h` and
/// solves the resulting operator, escalating the shift until validation
/// passes (unless the shift is pinned by an override).
fn deflate_above(
    h: &HermitianOperator,
    ground: &GroundResult,
    cfg: &SolverConfig,
    shift_override: Option<f64>,
) -> Result<ExcitedResult> {
    let choice = select_shift(h, &ground.eigenspace);
    let e0 = ground.eigenvalue();
    let mut shift = shift_override.unwrap_or(choice.value);
    let mut escalations = 0usize;
    loop {
        let h1 = build_deflated(h, &ground.eigenspace, shift)?;
        let validation = validate_shift(&h1, e0, shift, cfg)?;
        let level = DeflationLevel {
            shift_k: shift,
            ground_energy: e0,
            projector: Projector::from_eigenspace(&ground.eigenspace)?,
            operator: h1,
        };
        level.verify_action(h)?;
        match validation.verdict {
            ShiftVerdict::Valid => {
                let eigenspace = reverify_against(h, &validation.ground.eigenspace, cfg)?;
                return Ok(ExcitedResult {
                    eigenspace,
                    level,
                    validation,
                    ground: ground.clone(),
                    shift_choice: choice,
                    escalations,
                });
            }
            verdict if shift_override.is_some() => {
                let _ = verdict;
                return Ok(ExcitedResult {
                    eigenspace: validation.ground.eigenspace.clone(),
                    level,
                    validation,
                    ground: ground.clone(),
                    shift_choice: choice,
                    escalations,
                });
            }
            ShiftVerdict::TooSmall => {
                escalations += 1;
                if escalations > MAX_ESCALATIONS {
                    return Err(Error::ShiftEscalationExhausted {
                        attempts: escalations,
                        detail: format!(
                            "shift doubled to {shift} and still measured too small (min {:.6e})",
                            validation.measured_min
                        ),
                    });
                }
                shift *= 2.0;
            }
            ShiftVerdict::Indeterminate => {
                escalations += 1;
                if escalations > MAX_ESCALATIONS {
                    return Err(Error::ShiftEscalationExhausted {
                        attempts: escalations,
                        detail: format!(
                            "validation stayed indeterminate at shift {shift} (min {:.6e})",
                            validation.measured_min
                        ),
                    });
                }
                shift *= INDETERMINATE_BUMP;
            }
        }
    }
}

/// Recomputes eigenvalue and residuals of `space` against `h` and enforces
/// the re-verification tolerance `10·residual_tol·spectral_scale`.
fn reverify_against(
    h: &HermitianOperator,
    space: &Eigenspace,
    cfg: &SolverConfig,
) -> Result<Eigenspace> {
    let (scale, _) = h.spectral_scale();
    let thetas: Vec<f64> = space
        .basis
        .iter()
        .map(|v| h.expectation(v))
        .collect::<Result<_>>()?;
    let eigenvalue = thetas.iter().sum::<f64>() / thetas.len() as f64;
    let mut residuals = Vec::with_capacity(space.basis.len());
    for v in &space.basis {
        let mut r = h.apply_raw(&v.coords().view())?;
        r.zip_mut_with(v.coords(), |ri, vi| {
            *ri -= Complex64::new(eigenvalue, 0.0) * vi
        });
        residuals.push(norm2(&r.view()));
    }
    let tol = 10.0 * cfg.residual_tol * scale;
    let worst = residuals.iter().cloned().fold(0.0f64, f64::max);
    if worst > tol {
        return Err(Error::ResidualCheckFailed {
            residual: worst,
            tolerance: tol,
        });
    }
    Eigenspace::new(eigenvalue, space.basis.clone(), residuals)
}

/// Ground eigenvalue and multiplicity at one ladder level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelValue {
    pub eigenvalue: f64,
    pub multiplicity: usize,
}

/// Result of climbing `k` deflation rungs.
#[derive(Debug, Clone)]
pub struct LadderResult {
    pub levels: Vec<DeflationLevel>,
    /// Ground eigenvalue and multiplicity of `H_0 … H_k` — the first `k+1`
    /// distinct eigenvalues of the original operator, ascending.
    pub spectra: Vec<LevelValue>,
    /// The k-th excited eigenspace of the original operator, residuals
    /// re-verified against it.
    pub target_state: Eigenspace,
    pub validity_checks: Vec<ShiftValidation>,
}

impl LadderResult {
    /// JSON summary: per-level `{K, E, multiplicity, verdict, measured_min}`
    /// plus `{eigenvalue, multiplicity, residual_vs_H0}` for the target.
    pub fn summary_json(&self) -> serde_json::Value {
        let levels: Vec<serde_json::Value> = self
            .levels
            .iter()
            .zip(&self.validity_checks)
            .map(|(level, check)| {
                json!({
                    "K": level.shift_k,
                    "E": level.ground_energy,
                    "multiplicity": level.projector.rank(),
                    "verdict": check.verdict,
                    "measured_min": check.measured_min,
                })
            })
            .collect();
        let worst_residual = self
            .target_state
            .residual_norms
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        json!({
            "levels": levels,
            "spectra": self.spectra,
            "target": {
                "eigenvalue": self.target_state.eigenvalue,
                "multiplicity": self.target_state.multiplicity(),
                "residual_vs_H0": worst_residual,
            },
        })
    }
}

/// Climbs `k` rungs: deflate the current ground, validate, advance. The
/// rung-`j` operator is the original plus all shifts up to `j`, accumulated
/// on one matrix-free operator.
pub fn ladder(h: &HermitianOperator, k: usize, cfg: &SolverConfig) -> Result<LadderResult> {
    ladder_with_shift(h, k, cfg, None)
}

/// [`ladder`] with a per-rung shift override. Unlike the single-rung case,
/// an overridden ladder aborts on a non-valid verdict: later rungs would
/// silently climb a wrong spectrum.
pub fn ladder_with_shift(
    h: &HermitianOperator,
    k: usize,
    cfg: &SolverConfig,
    shift_override: Option<f64>,
) -> Result<LadderResult> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig {
            key: "k".into(),
            detail: "excitation index must be at least 1".into(),
        });
    }
    let dim = h.dim();
    let mut current = solve_ground(h, cfg)?;
    if !current.converged {
        return Err(Error::NonConvergence {
            detail: "ground solve of the input operator did not converge".into(),
        });
    }
    let mut operator = h.clone();
    let mut deflated_rank = 0usize;
    let mut levels = Vec::with_capacity(k);
    let mut checks = Vec::with_capacity(k);
    let mut spectra = vec![LevelValue {
        eigenvalue: current.eigenvalue(),
        multiplicity: current.multiplicity(),
    }];

    for rung in 1..=k {
        deflated_rank += current.multiplicity();
        if deflated_rank >= dim {
            return Err(Error::SpectrumExhausted {
                distinct: rung,
                requested: k,
            });
        }
        let step = deflate_above(&operator, &current, cfg, shift_override)?;
        if step.validation.verdict != ShiftVerdict::Valid {
            return Err(Error::ShiftEscalationExhausted {
                attempts: 0,
                detail: format!(
                    "overridden shift measured {:?} at rung {rung}",
                    step.validation.verdict
                ),
            });
        }
        let next = step.validation.ground.clone();
        if next.eigenvalue() <= spectra[rung - 1].eigenvalue {
            return Err(Error::NonConvergence {
                detail: format!(
                    "ladder level {rung} produced {:.6e}, not above previous {:.6e}",
                    next.eigenvalue(),
                    spectra[rung - 1].eigenvalue
                ),
            });
        }
        spectra.push(LevelValue {
            eigenvalue: next.eigenvalue(),
            multiplicity: next.multiplicity(),
        });
        operator = step.level.operator.clone();
        levels.push(step.level);
        checks.push(step.validation);
        current = next;
    }

    let target_state = reverify_against(h, &current.eigenspace, cfg)?;
    Ok(LadderResult {
        levels,
        spectra,
        target_state,
        validity_checks: checks,
    })
}
