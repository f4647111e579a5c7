//! Constrained-search density functional on lattice models.
//!
//! For a model with interior part `T + W`, external potential `v`, and
//! ground eigenspace projector `P₀` of the full operator, the bifunctional
//!
//! ```text
//! F[ρ] = inf { ⟨ψ|T + W + K·P₀|ψ⟩ : ‖ψ‖ = 1, ⟨ψ|n_i|ψ⟩ = ρ_i ∀i }
//! E[ρ] = F[ρ] + Σ_i v_i ρ_i
//! ```
//!
//! turns the first excited energy into an outer minimum over site
//! densities: `E₁ = min_ρ E[ρ]` whenever `K` exceeds the gap. The inner
//! problem is solved by quadratic-penalty continuation (`μ` rising ×10
//! from 1 to 10⁶) with projected Rayleigh-quotient descent inside each
//! stage, followed by an exact feasibility restoration — the occupation
//! constraints are diagonal, so magnitudes can be projected onto the
//! feasible polytope with phases untouched — and a feasible-manifold
//! polish. The outer problem is Nelder–Mead over the capped simplex of
//! N-representable densities, multi-started from seeded interior points.

use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64;
use serde::Serialize;

use crate::deflation::select_shift;
use crate::engines::{solve_ground, SolverConfig};
use crate::error::{Error, Result};
use crate::models::{build, occupation_diagonals, ModelKind, ModelSpec};
use crate::operator::{inner, norm2, Eigenspace, HermitianOperator, ShiftTerm};
use crate::rng::SplitMix64;

/// Largest site-occupation mismatch accepted as "constraint satisfied".
pub const DENSITY_TOL: f64 = 1e-6;
/// Slack on `Σ ρ_i = N` when validating a density vector.
const SUM_TOL: f64 = 1e-10;
/// Penalty weights of the continuation schedule.
const PENALTY_STAGES: [f64; 7] = [1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6];
/// Independent seeded restarts of the inner continuation.
const INNER_STARTS: u64 = 3;
const STAGE_ITERATION_CAP: usize = 4000;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Tangential kicks tried after a stage reports a gradient-stationary
/// point, to escape saddles of the penalized objective.
const SADDLE_PROBES: usize = 3;
/// Relative size of a saddle-escape kick.
const PROBE_KICK: f64 = 1e-3;
/// Nonmonotone line-search memory (accept against the worst of this many
/// recent values, which keeps Barzilai–Borwein steps effective).
const SEARCH_MEMORY: usize = 10;
const OUTER_STARTS: usize = 5;
const OUTER_ITERATION_CAP: usize = 400;
const INNER_SEED_BASE: u64 = 0xD3A5_17F0_0000_0000;
/// Dykstra alternating-projection budget for feasibility restoration.
const RESTORE_ITERATION_CAP: usize = 5000;
const POLISH_ITERATION_CAP: usize = 300;

// ---------------------------------------------------------------------------
// DensityVector
// ---------------------------------------------------------------------------

/// Site occupations `ρ_i ≥ 0` summing to the particle number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityVector {
    occupations: Vec<f64>,
    particle_number: usize,
}

impl DensityVector {
    /// Validates positivity and `Σ ρ_i = N` within `1e-10`. Per-site caps
    /// are model-dependent and checked by [`DensityVector::for_model`] or
    /// at evaluation time.
    pub fn new(occupations: Vec<f64>, particle_number: usize) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::EmptyInput {
                context: "density occupations".into(),
            });
        }
        if particle_number == 0 {
            return Err(Error::InvalidDensity {
                detail: "particle number must be positive".into(),
            });
        }
        for (i, &x) in occupations.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidDensity {
                    detail: format!("occupation {i} is {x}; must be finite and nonnegative"),
                });
            }
        }
        let total: f64 = occupations.iter().sum();
        if (total - particle_number as f64).abs() > SUM_TOL {
            return Err(Error::InvalidDensity {
                detail: format!(
                    "occupations sum to {total}, expected {particle_number} within {SUM_TOL:e}"
                ),
            });
        }
        Ok(DensityVector {
            occupations,
            particle_number,
        })
    }

    /// Validates against the model's site count, particle number, and
    /// per-site caps.
    pub fn for_model(spec: &ModelSpec, occupations: Vec<f64>) -> Result<Self> {
        let (caps, n) = density_domain(spec)?;
        if occupations.len() != caps.len() {
            return Err(Error::InvalidDensity {
                detail: format!(
                    "{} occupations for a {}-site model",
                    occupations.len(),
                    caps.len()
                ),
            });
        }
        let rho = DensityVector::new(occupations, n)?;
        rho.check_caps(&caps)?;
        Ok(rho)
    }

    /// Uniform density `N/M` on every site.
    pub fn uniform(spec: &ModelSpec) -> Result<Self> {
        let (caps, n) = density_domain(spec)?;
        DensityVector::new(vec![n as f64 / caps.len() as f64; caps.len()], n)
    }

    fn check_caps(&self, caps: &[f64]) -> Result<()> {
        for (i, (&x, &cap)) in self.occupations.iter().zip(caps).enumerate() {
            if x > cap + SUM_TOL {
                return Err(Error::InvalidDensity {
                    detail: format!("occupation {i} is {x}, above the per-site cap {cap}"),
                });
            }
        }
        Ok(())
    }

    pub fn occupations(&self) -> &[f64] {
        &self.occupations
    }

    pub fn particle_number(&self) -> usize {
        self.particle_number
    }
}

/// Per-site occupation caps and particle number of the model's density
/// domain: cap 1 for spinless fermions, 2 for spinful. Spin chains and
/// random matrices carry no conserved particle number and are rejected.
pub fn density_domain(spec: &ModelSpec) -> Result<(Vec<f64>, usize)> {
    let cap = match spec.kind {
        ModelKind::TightBinding => 1.0,
        ModelKind::Hubbard => 2.0,
        ModelKind::Random | ModelKind::Heisenberg => {
            return Err(Error::Unsupported {
                operation: "density_domain".into(),
                detail: format!(
                    "{:?} has no conserved particle number to constrain the density sum",
                    spec.kind
                ),
            })
        }
    };
    let n = spec.particles();
    if n == 0 {
        return Err(Error::InvalidDensity {
            detail: "model sector has zero particles; densities are trivial".into(),
        });
    }
    Ok((vec![cap; spec.sites], n))
}

// ---------------------------------------------------------------------------
// Functional evaluation (inner problem)
// ---------------------------------------------------------------------------

/// Outcome of one constrained inner minimization at a fixed density.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalEvaluation {
    pub density: DensityVector,
    /// Constrained infimum of `⟨T + W + K·P₀⟩`.
    pub f_value: f64,
    /// `f_value + Σ_i v_i ρ_i` with the model's external potential.
    pub e_value: f64,
    /// `max_i |⟨n_i⟩ − ρ_i|` at the reported minimizer.
    pub constraint_violation: f64,
    pub inner_iterations: usize,
    /// Last penalty weight of the continuation schedule.
    pub penalty_final: f64,
    /// Penalized minima per continuation stage; non-decreasing lower
    /// bounds on the constrained value.
    pub stage_values: Vec<f64>,
}

/// The interior operator `T + W + K·P₀` (model built without its external
/// potential, plus the level shift on the supplied ground eigenspace).
fn interior_operator(
    spec: &ModelSpec,
    ground: &Eigenspace,
    shift_k: f64,
) -> Result<HermitianOperator> {
    if shift_k < 0.0 {
        return Err(Error::NonPositiveShift { shift: shift_k });
    }
    let mut interior = spec.clone();
    interior.external_potential = None;
    let h = build(&interior)?;
    if let Some(v) = ground.basis.first() {
        if v.dim() != h.dim() {
            return Err(Error::DimensionMismatch {
                operator_dim: h.dim(),
                vector_dim: v.dim(),
            });
        }
    }
    if shift_k == 0.0 {
        return Ok(h);
    }
    let term = ShiftTerm {
        strength: shift_k,
        basis: ground.basis.iter().map(|v| v.coords().clone()).collect(),
    };
    HermitianOperator::from_shifted(Arc::new(h), vec![term])
}

fn site_occupations(diagonals: &[Vec<f64>], psi: &Array1<Complex64>) -> Vec<f64> {
    diagonals
        .iter()
        .map(|d| {
            d.iter()
                .zip(psi.iter())
                .map(|(&dk, z)| dk * z.norm_sqr())
                .sum()
        })
        .collect()
}

/// Penalized objective `⟨ψ|H|ψ⟩ + μ Σ_i (⟨n_i⟩ − ρ_i)²` with its
/// sphere-tangent gradient, for a unit `ψ`.
fn objective_and_gradient(
    h: &HermitianOperator,
    diagonals: &[Vec<f64>],
    rho: &[f64],
    mu: f64,
    psi: &Array1<Complex64>,
) -> Result<(f64, f64, Array1<Complex64>)> {
    let hpsi = h.apply_raw(&psi.view())?;
    let quotient = inner(&psi.view(), &hpsi.view()).re;
    let occ = site_occupations(diagonals, psi);
    let mismatch: Vec<f64> = occ.iter().zip(rho).map(|(n, r)| n - r).collect();
    let penalty: f64 = mismatch.iter().map(|d| d * d).sum();
    let value = quotient + mu * penalty;
    // per-coordinate weight of the penalty gradient: Σ_i (⟨n_i⟩−ρ_i)·d_i[k]
    let mut weight = vec![0.0f64; psi.len()];
    for (d, &m) in diagonals.iter().zip(&mismatch) {
        for (wk, &dk) in weight.iter_mut().zip(d) {
            *wk += m * dk;
        }
    }
    let mut grad = Array1::<Complex64>::zeros(psi.len());
    for (k, g) in grad.iter_mut().enumerate() {
        *g = 2.0 * hpsi[k] + 4.0 * mu * weight[k] * psi[k];
    }
    let radial = inner(&psi.view(), &grad.view()).re;
    grad.zip_mut_with(psi, |g, p| *g -= Complex64::new(radial, 0.0) * p);
    Ok((value, quotient, grad))
}

fn normalize(mut v: Array1<Complex64>) -> Option<Array1<Complex64>> {
    let n = norm2(&v.view());
    if n < 1e-12 {
        return None;
    }
    v.mapv_inplace(|z| z / n);
    Some(v)
}

/// Barzilai–Borwein projected descent on the unit sphere, run until the
/// tangential gradient falls under tolerance or the line search stalls.
fn stage_descent(
    h: &HermitianOperator,
    diagonals: &[Vec<f64>],
    rho: &[f64],
    mu: f64,
    scale: f64,
    psi: &mut Array1<Complex64>,
) -> Result<(f64, usize)> {
    let grad_tol = 1e-7 * scale.max(1.0);
    let (mut value, _, mut grad) = objective_and_gradient(h, diagonals, rho, mu, psi)?;
    let mut step = 1.0 / (2.0 * (scale.max(1.0) + mu));
    let mut previous: Option<(Array1<Complex64>, Array1<Complex64>)> = None;
    let mut memory: VecDeque<f64> = VecDeque::with_capacity(SEARCH_MEMORY);
    memory.push_back(value);
    let mut iterations = 0;
    while iterations < STAGE_ITERATION_CAP {
        let grad_norm = norm2(&grad.view());
        if grad_norm <= grad_tol {
            break;
        }
        if let Some((prev_psi, prev_grad)) = &previous {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for k in 0..psi.len() {
                let s = psi[k] - prev_psi[k];
                let y = grad[k] - prev_grad[k];
                ss += s.norm_sqr();
                sy += (s.conj() * y).re;
            }
            if sy > f64::MIN_POSITIVE {
                step = (ss / sy).clamp(1e-14, 1e6);
            }
        }
        let reference = memory.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = None;
        let mut t = step;
        for _ in 0..MAX_HALVINGS {
            let trial = psi
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - Complex64::new(t, 0.0) * g);
            if let Some(unit) = normalize(Array1::from_iter(trial)) {
                let (tv, _, tg) = objective_and_gradient(h, diagonals, rho, mu, &unit)?;
                if tv <= reference - ARMIJO_C * t * grad_norm * grad_norm {
                    accepted = Some((unit, tv, tg));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next_psi, next_value, next_grad)) = accepted else {
            break; // line search stalled; the stage value stands as-is
        };
        previous = Some((psi.clone(), grad));
        *psi = next_psi;
        value = next_value;
        grad = next_grad;
        if memory.len() == SEARCH_MEMORY {
            memory.pop_front();
        }
        memory.push_back(value);
        iterations += 1;
    }
    Ok((value, iterations))
}

/// One penalty stage: descend, then probe for saddles. Configuration
/// basis states make every occupation expectation stationary (their
/// occupation gradients are purely radial), so a gradient-stationary stop
/// can sit on a saddle of the penalized objective rather than a minimum;
/// a small deterministic tangential kick plus re-descent escapes such
/// points and is reverted whenever it finds nothing better.
fn minimize_stage(
    h: &HermitianOperator,
    diagonals: &[Vec<f64>],
    rho: &[f64],
    mu: f64,
    scale: f64,
    psi: &mut Array1<Complex64>,
    rng: &mut SplitMix64,
) -> Result<(f64, usize)> {
    let (mut value, mut iterations) = stage_descent(h, diagonals, rho, mu, scale, psi)?;
    for _ in 0..SADDLE_PROBES {
        let kick = rng.unit_vector(psi.len());
        let mut probe = psi.clone();
        probe.zip_mut_with(&kick, |p, k| *p += Complex64::new(PROBE_KICK, 0.0) * k);
        let Some(mut probe) = normalize(probe) else {
            break;
        };
        let (probe_value, probe_iterations) =
            stage_descent(h, diagonals, rho, mu, scale, &mut probe)?;
        iterations += probe_iterations;
        if probe_value < value - 1e-12 * (1.0 + value.abs()) {
            *psi = probe;
            value = probe_value;
        } else {
            break;
        }
    }
    Ok((value, iterations))
}

/// Small symmetric positive-semidefinite solver via eigendecomposition,
/// dropping near-null directions (constraint Grams are singular at
/// simplex vertices, where some occupations are pinned).
struct PsdSolver {
    values: Array1<f64>,
    vectors: ndarray::Array2<f64>,
    cutoff: f64,
}

impl PsdSolver {
    fn new(gram: &ndarray::Array2<f64>) -> Result<Self> {
        use ndarray_linalg::{Eigh, UPLO};
        let (values, vectors) = gram.eigh(UPLO::Lower)?;
        let cutoff = 1e-12 * values.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        Ok(PsdSolver {
            values,
            vectors,
            cutoff,
        })
    }

    /// Least-squares solution of `G x = b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = b.len();
        let mut out = vec![0.0; m];
        for j in 0..m {
            if self.values[j] <= self.cutoff {
                continue;
            }
            let overlap: f64 = (0..m).map(|i| self.vectors[[i, j]] * b[i]).sum();
            let weight = overlap / self.values[j];
            for (i, o) in out.iter_mut().enumerate() {
                *o += weight * self.vectors[[i, j]];
            }
        }
        out
    }
}

/// Projects the magnitude distribution `p₀` onto the occupation polytope
/// `{p ≥ 0, Σ_k d_i[k]·p_k = ρ_i}` by Dykstra's alternating projections.
/// `Σp = 1` follows from the constraints because every configuration
/// carries the full particle number.
fn restore_magnitudes(diagonals: &[Vec<f64>], rho: &[f64], p0: &[f64]) -> Result<Option<Vec<f64>>> {
    let dim = p0.len();
    let m = diagonals.len();
    let mut gram = ndarray::Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            gram[[i, j]] = diagonals[i]
                .iter()
                .zip(&diagonals[j])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let solver = PsdSolver::new(&gram)?;
    let residual = |p: &[f64]| -> Vec<f64> {
        diagonals
            .iter()
            .zip(rho)
            .map(|(d, &r)| d.iter().zip(p).map(|(dk, pk)| dk * pk).sum::<f64>() - r)
            .collect()
    };
    let mut p = p0.to_vec();
    let mut affine_corr = vec![0.0; dim];
    let mut orthant_corr = vec![0.0; dim];
    for _ in 0..RESTORE_ITERATION_CAP {
        let mut y: Vec<f64> = p.iter().zip(&affine_corr).map(|(a, b)| a + b).collect();
        let coeff = solver.solve(&residual(&y));
        for (k, yk) in y.iter_mut().enumerate() {
            let shift: f64 = diagonals.iter().zip(&coeff).map(|(d, c)| c * d[k]).sum();
            *yk -= shift;
        }
        for (c, (pk, yk)) in affine_corr.iter_mut().zip(p.iter().zip(&y)) {
            *c += pk - yk;
        }
        let z: Vec<f64> = y.iter().zip(&orthant_corr).map(|(a, b)| a + b).collect();
        p = z.iter().map(|&x| x.max(0.0)).collect();
        for (c, (zk, pk)) in orthant_corr.iter_mut().zip(z.iter().zip(&p)) {
            *c = zk - pk;
        }
        let worst = residual(&p).iter().map(|r| r.abs()).fold(0.0f64, f64::max);
        if worst <= 1e-13 {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Rebuilds a unit state with the phases of `psi` and magnitudes projected
/// onto the feasible polytope; `None` when restoration stalls.
fn restored_state(
    diagonals: &[Vec<f64>],
    rho: &[f64],
    psi: &Array1<Complex64>,
) -> Result<Option<Array1<Complex64>>> {
    let p0: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let Some(p) = restore_magnitudes(diagonals, rho, &p0)? else {
        return Ok(None);
    };
    let lifted = Array1::from_shape_fn(psi.len(), |k| {
        let magnitude = p[k].max(0.0).sqrt();
        let z = psi[k];
        let n = z.norm();
        if n > 0.0 {
            z / n * magnitude
        } else {
            Complex64::new(magnitude, 0.0)
        }
    });
    Ok(normalize(lifted))
}

/// Rayleigh-quotient descent restricted to the feasible manifold: the
/// gradient loses its components along the constraint normals `D_i ψ`,
/// and every trial step is restored to exact feasibility before being
/// judged. At simplex vertices the normals span everything, the tangent
/// gradient vanishes, and the (unique) feasible state is already optimal.
fn polish_on_manifold(
    h: &HermitianOperator,
    diagonals: &[Vec<f64>],
    rho: &[f64],
    scale: f64,
    psi: &mut Array1<Complex64>,
) -> Result<usize> {
    let grad_tol = 1e-9 * scale.max(1.0);
    let m = diagonals.len();
    let mut hpsi = h.apply_raw(&psi.view())?;
    let mut quotient = inner(&psi.view(), &hpsi.view()).re;
    let mut iterations = 0;
    while iterations < POLISH_ITERATION_CAP {
        let mut grad = Array1::<Complex64>::zeros(psi.len());
        for (g, (hp, p)) in grad.iter_mut().zip(hpsi.iter().zip(psi.iter())) {
            *g = 2.0 * (hp - Complex64::new(quotient, 0.0) * p);
        }
        let normals: Vec<Array1<Complex64>> = diagonals
            .iter()
            .map(|d| Array1::from_shape_fn(psi.len(), |k| Complex64::new(d[k], 0.0) * psi[k]))
            .collect();
        let mut gram = ndarray::Array2::<f64>::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                gram[[i, j]] = inner(&normals[i].view(), &normals[j].view()).re;
            }
        }
        let overlaps: Vec<f64> = normals
            .iter()
            .map(|n| inner(&n.view(), &grad.view()).re)
            .collect();
        let coeff = PsdSolver::new(&gram)?.solve(&overlaps);
        for (i, n) in normals.iter().enumerate() {
            let c = Complex64::new(coeff[i], 0.0);
            grad.zip_mut_with(n, |g, nk| *g -= c * nk);
        }
        let grad_norm = norm2(&grad.view());
        if grad_norm <= grad_tol {
            break;
        }
        let mut t = 1.0 / scale.max(1.0);
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let raw =
                Array1::from_shape_fn(psi.len(), |k| psi[k] - Complex64::new(t, 0.0) * grad[k]);
            if let Some(trial) = restored_state(diagonals, rho, &raw)? {
                let h_trial = h.apply_raw(&trial.view())?;
                let q_trial = inner(&trial.view(), &h_trial.view()).re;
                if q_trial <= quotient - ARMIJO_C * t * grad_norm * grad_norm {
                    *psi = trial;
                    hpsi = h_trial;
                    quotient = q_trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
    }
    Ok(iterations)
}

struct InnerOutcome {
    rayleigh: f64,
    violation: f64,
    iterations: usize,
    stage_values: Vec<f64>,
}

/// Full penalty continuation from one seeded start.
fn run_continuation(
    h: &HermitianOperator,
    diagonals: &[Vec<f64>],
    rho: &[f64],
    scale: f64,
    seed: u64,
) -> Result<InnerOutcome> {
    let mut rng = SplitMix64::new(seed);
    let mut psi = rng.unit_vector(h.dim());
    let mut stage_values = Vec::with_capacity(PENALTY_STAGES.len());
    let mut iterations = 0;
    for &mu in &PENALTY_STAGES {
        let (value, iters) = minimize_stage(h, diagonals, rho, mu, scale, &mut psi, &mut rng)?;
        stage_values.push(value);
        iterations += iters;
    }
    if let Some(mut feasible) = restored_state(diagonals, rho, &psi)? {
        iterations += polish_on_manifold(h, diagonals, rho, scale, &mut feasible)?;
        psi = feasible;
    }
    let (_, rayleigh, _) =
        objective_and_gradient(h, diagonals, rho, *PENALTY_STAGES.last().unwrap(), &psi)?;
    let occ = site_occupations(diagonals, &psi);
    let violation = occ
        .iter()
        .zip(rho)
        .map(|(n, r)| (n - r).abs())
        .fold(0.0f64, f64::max);
    Ok(InnerOutcome {
        rayleigh,
        violation,
        iterations,
        stage_values,
    })
}

/// Constrained infimum `F[ρ]` of the interior operator over unit states
/// with prescribed site occupations, by penalty continuation multi-started
/// from fixed seeds. `ground` must be the solved ground eigenspace of the
/// full model operator (potential included); `shift_k = 0` evaluates the
/// bare interior operator.
pub fn evaluate_f(
    spec: &ModelSpec,
    ground: &Eigenspace,
    shift_k: f64,
    rho: &DensityVector,
) -> Result<FunctionalEvaluation> {
    let (caps, n) = density_domain(spec)?;
    if rho.occupations.len() != caps.len() || rho.particle_number != n {
        return Err(Error::InvalidDensity {
            detail: format!(
                "density ({} sites, N={}) does not match the model ({} sites, N={n})",
                rho.occupations.len(),
                rho.particle_number,
                caps.len()
            ),
        });
    }
    rho.check_caps(&caps)?;
    let h = interior_operator(spec, ground, shift_k)?;
    let diagonals = occupation_diagonals(spec)?;
    let (scale, _) = h.spectral_scale();
    let mut best: Option<InnerOutcome> = None;
    let mut total_iterations = 0;
    for start in 0..INNER_STARTS {
        let outcome = run_continuation(
            &h,
            &diagonals,
            &rho.occupations,
            scale,
            INNER_SEED_BASE ^ start,
        )?;
        total_iterations += outcome.iterations;
        let better = match &best {
            None => true,
            Some(b) => match (outcome.violation <= DENSITY_TOL, b.violation <= DENSITY_TOL) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => outcome.rayleigh < b.rayleigh,
                (false, false) => outcome.violation < b.violation,
            },
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one continuation start");
    if best.violation > DENSITY_TOL {
        return Err(Error::InfeasibleDensity {
            violation: best.violation,
            tolerance: DENSITY_TOL,
        });
    }
    let potential = spec.potential()?;
    let external: f64 = potential
        .iter()
        .zip(&rho.occupations)
        .map(|(v, r)| v * r)
        .sum();
    Ok(FunctionalEvaluation {
        density: rho.clone(),
        f_value: best.rayleigh,
        e_value: best.rayleigh + external,
        constraint_violation: best.violation,
        inner_iterations: total_iterations,
        penalty_final: *PENALTY_STAGES.last().unwrap(),
        stage_values: best.stage_values,
    })
}

/// Total-energy functional `E[ρ] = F[ρ] + Σ_i v_i ρ_i`; identical to
/// [`evaluate_f`] since every evaluation carries both values, kept as a
/// named entry point for the total-energy reading.
pub fn evaluate_e(
    spec: &ModelSpec,
    ground: &Eigenspace,
    shift_k: f64,
    rho: &DensityVector,
) -> Result<FunctionalEvaluation> {
    evaluate_f(spec, ground, shift_k, rho)
}

// ---------------------------------------------------------------------------
// Outer search over densities
// ---------------------------------------------------------------------------

/// Euclidean projection onto `{0 ≤ x_i ≤ cap_i, Σ x_i = n}` by bisection
/// on the shift `τ` in `x_i = clip(y_i − τ)`.
fn project_capped_simplex(y: &[f64], caps: &[f64], n: f64) -> Vec<f64> {
    let clip_sum = |tau: f64| -> f64 {
        y.iter()
            .zip(caps)
            .map(|(&yi, &cap)| (yi - tau).clamp(0.0, cap))
            .sum()
    };
    let mut lo = y.iter().cloned().fold(f64::INFINITY, f64::min)
        - caps.iter().cloned().fold(0.0f64, f64::max)
        - 1.0;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clip_sum(mid) > n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut x: Vec<f64> = y
        .iter()
        .zip(caps)
        .map(|(&yi, &cap)| (yi - tau).clamp(0.0, cap))
        .collect();
    // absorb the residual bisection error into an interior coordinate so
    // the sum constraint holds to validation tolerance
    let total: f64 = x.iter().sum();
    let residual = n - total;
    if let Some(i) = (0..x.len()).find(|&i| {
        let adjusted = x[i] + residual;
        (0.0..=caps[i]).contains(&adjusted)
    }) {
        x[i] += residual;
    }
    x
}

/// Orthonormal basis of the sum-zero subspace of `R^m` (Helmert vectors),
/// used as outer-search coordinates so the flat `Σρ` direction is absent.
fn helmert_basis(m: usize) -> Vec<Vec<f64>> {
    (1..m)
        .map(|j| {
            let norm = (j as f64 * (j + 1) as f64).sqrt();
            let mut v = vec![0.0; m];
            for entry in v.iter_mut().take(j) {
                *entry = 1.0 / norm;
            }
            v[j] = -(j as f64) / norm;
            v
        })
        .collect()
}

fn density_from_coords(
    base: &[f64],
    basis: &[Vec<f64>],
    coords: &[f64],
    caps: &[f64],
    n: usize,
) -> Result<DensityVector> {
    let mut y = base.to_vec();
    for (b, &c) in basis.iter().zip(coords) {
        for (yi, &bi) in y.iter_mut().zip(b) {
            *yi += c * bi;
        }
    }
    DensityVector::new(project_capped_simplex(&y, caps, n as f64), n)
}

#[derive(Debug, Clone, Serialize)]
struct StartTrace {
    start_density: Vec<f64>,
    evaluations: usize,
    best_value: Option<f64>,
    feasible_evaluations: usize,
}

/// One Nelder–Mead run in Helmert coordinates; returns the best feasible
/// evaluation found, if any.
#[allow(clippy::too_many_arguments)]
fn nelder_mead_run(
    spec: &ModelSpec,
    ground: &Eigenspace,
    shift_k: f64,
    base: &[f64],
    basis: &[Vec<f64>],
    caps: &[f64],
    n: usize,
    start: &[f64],
) -> Result<(Option<FunctionalEvaluation>, StartTrace)> {
    let dim = basis.len();
    let mut evaluations = 0usize;
    let mut feasible = 0usize;
    let mut best: Option<FunctionalEvaluation> = None;
    // objective: E[ρ(u)], with inner-infeasible points pushed far up
    let eval = |coords: &[f64],
                best: &mut Option<FunctionalEvaluation>,
                evaluations: &mut usize,
                feasible: &mut usize|
     -> Result<f64> {
        let rho = density_from_coords(base, basis, coords, caps, n)?;
        *evaluations += 1;
        match evaluate_f(spec, ground, shift_k, &rho) {
            Ok(ev) => {
                *feasible += 1;
                let value = ev.e_value;
                let improved = best.as_ref().is_none_or(|b| value < b.e_value);
                if improved {
                    *best = Some(ev);
                }
                Ok(value)
            }
            Err(Error::InfeasibleDensity { violation, .. }) => Ok(1e12 + violation),
            Err(other) => Err(other),
        }
    };

    let start_density = density_from_coords(base, basis, start, caps, n)?;
    if dim == 0 {
        let value = eval(start, &mut best, &mut evaluations, &mut feasible)?;
        let trace = StartTrace {
            start_density: start_density.occupations.clone(),
            evaluations,
            best_value: best.as_ref().map(|_| value),
            feasible_evaluations: feasible,
        };
        return Ok((best, trace));
    }

    // initial simplex: start plus one step along each coordinate
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let value = eval(start, &mut best, &mut evaluations, &mut feasible)?;
    simplex.push((start.to_vec(), value));
    for i in 0..dim {
        let mut vertex = start.to_vec();
        vertex[i] += 0.2;
        let value = eval(&vertex, &mut best, &mut evaluations, &mut feasible)?;
        simplex.push((vertex, value));
    }

    for _ in 0..OUTER_ITERATION_CAP {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if spread <= 1e-10 * (1.0 + simplex[0].1.abs()) && diameter <= 1e-6 {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(v, _)| v[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let point = |factor: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + factor * (c - w))
                .collect()
        };
        let reflected = point(1.0);
        let fr = eval(&reflected, &mut best, &mut evaluations, &mut feasible)?;
        if fr < simplex[0].1 {
            let expanded = point(2.0);
            let fe = eval(&expanded, &mut best, &mut evaluations, &mut feasible)?;
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = point(-0.5);
            let fc = eval(&contracted, &mut best, &mut evaluations, &mut feasible)?;
            if fc < worst.1 {
                simplex[dim] = (contracted, fc);
            } else {
                // shrink toward the best vertex
                let anchor = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = entry
                        .0
                        .iter()
                        .zip(&anchor)
                        .map(|(v, a)| a + 0.5 * (v - a))
                        .collect();
                    let fs = eval(&shrunk, &mut best, &mut evaluations, &mut feasible)?;
                    *entry = (shrunk, fs);
                }
            }
        }
    }

    let trace = StartTrace {
        start_density: start_density.occupations.clone(),
        evaluations,
        best_value: best.as_ref().map(|b| b.e_value),
        feasible_evaluations: feasible,
    };
    Ok((best, trace))
}

/// Outer minimization `min_ρ E[ρ]` over the capped density simplex:
/// Nelder–Mead multi-started from the uniform density and four seeded
/// interior points, with the ground eigenspace solved by the configured
/// engine and `K` from the spectral-bound selector.
pub fn minimize_over_densities(
    spec: &ModelSpec,
    cfg: &SolverConfig,
) -> Result<(DensityVector, f64)> {
    cfg.validate()?;
    let (caps, n) = density_domain(spec)?;
    let h = build(spec)?;
    let ground = solve_ground(&h, cfg)?;
    if !ground.converged {
        return Err(Error::NonConvergence {
            detail: "ground solve for the density search did not converge".into(),
        });
    }
    let shift_k = select_shift(&h, &ground.eigenspace).value;
    minimize_with_shift(spec, &ground.eigenspace, shift_k, &caps, n, cfg.seed)
}

fn minimize_with_shift(
    spec: &ModelSpec,
    ground: &Eigenspace,
    shift_k: f64,
    caps: &[f64],
    n: usize,
    seed: u64,
) -> Result<(DensityVector, f64)> {
    let sites = caps.len();
    let base = vec![n as f64 / sites as f64; sites];
    let basis = helmert_basis(sites);
    let dim = basis.len();
    let mut rng = SplitMix64::new(seed ^ 0x0DE2_517F_0000_0000);
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    for _ in 1..OUTER_STARTS {
        starts.push(
            (0..dim)
                .map(|_| 0.35 * (2.0 * rng.next_f64() - 1.0))
                .collect(),
        );
    }
    let mut best: Option<FunctionalEvaluation> = None;
    let mut traces = Vec::with_capacity(starts.len());
    for start in &starts {
        let (candidate, trace) =
            nelder_mead_run(spec, ground, shift_k, &base, &basis, caps, n, start)?;
        traces.push(trace);
        if let Some(ev) = candidate {
            let improved = best.as_ref().is_none_or(|b| ev.e_value < b.e_value);
            if improved {
                best = Some(ev);
            }
        }
    }
    match best {
        Some(ev) => Ok((ev.density, ev.e_value)),
        None => Err(Error::DensitySearchFailed {
            detail: format!(
                "no start produced a feasible evaluation; per-start traces: {}",
                serde_json::to_string(&traces).unwrap_or_else(|_| "<unserializable>".into())
            ),
        }),
    }
}

// ---------------------------------------------------------------------------
// Density scan
// ---------------------------------------------------------------------------

/// One scanned grid point. Rows whose inner problem ends infeasible carry
/// the measured violation with no functional values.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub density: Vec<f64>,
    pub f_value: Option<f64>,
    pub e_value: Option<f64>,
    pub constraint_violation: f64,
}

/// Functional table over a density grid, with the context that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct DensityScan {
    pub shift_k: f64,
    pub ground_energy: f64,
    pub rows: Vec<ScanRow>,
}

/// Evaluates `F` and `E` on a uniform grid: the first `sites − 1`
/// occupations range over `resolution` points each, the last is fixed by
/// the particle number, and grid points outside the caps are skipped.
pub fn density_scan(
    spec: &ModelSpec,
    cfg: &SolverConfig,
    resolution: usize,
) -> Result<DensityScan> {
    cfg.validate()?;
    if resolution < 2 {
        return Err(Error::InvalidConfig {
            key: "resolution".into(),
            detail: format!("{resolution} grid points per axis; need at least 2"),
        });
    }
    let (caps, n) = density_domain(spec)?;
    let h = build(spec)?;
    let ground = solve_ground(&h, cfg)?;
    if !ground.converged {
        return Err(Error::NonConvergence {
            detail: "ground solve for the density scan did not converge".into(),
        });
    }
    let shift_k = select_shift(&h, &ground.eigenspace).value;
    let sites = caps.len();
    let mut rows = Vec::new();
    let mut point = vec![0usize; sites - 1];
    'grid: loop {
        let mut occupations: Vec<f64> = point
            .iter()
            .zip(&caps)
            .map(|(&ix, &cap)| cap * ix as f64 / (resolution - 1) as f64)
            .collect();
        let partial: f64 = occupations.iter().sum();
        let last = n as f64 - partial;
        if (-SUM_TOL..=caps[sites - 1] + SUM_TOL).contains(&last) {
            occupations.push(last.clamp(0.0, caps[sites - 1]));
            let rho = DensityVector::new(occupations, n)?;
            match evaluate_f(spec, &ground.eigenspace, shift_k, &rho) {
                Ok(ev) => rows.push(ScanRow {
                    density: rho.occupations.clone(),
                    f_value: Some(ev.f_value),
                    e_value: Some(ev.e_value),
                    constraint_violation: ev.constraint_violation,
                }),
                Err(Error::InfeasibleDensity { violation, .. }) => rows.push(ScanRow {
                    density: rho.occupations.clone(),
                    f_value: None,
                    e_value: None,
                    constraint_violation: violation,
                }),
                Err(other) => return Err(other),
            }
        }
        // advance the mixed-radix counter over the free coordinates
        for (i, ix) in point.iter_mut().enumerate() {
            *ix += 1;
            if *ix < resolution {
                continue 'grid;
            }
            *ix = 0;
            if i + 1 == sites - 1 {
                break 'grid;
            }
        }
        if sites == 1 {
            break;
        }
    }
    Ok(DensityScan {
        shift_k,
        ground_energy: ground.eigenspace.eigenvalue,
        rows,
    })
}
