//! Configuration, orchestration, ingestion, and reporting: the run
//! pipeline behind the CLI. A run loads its operator (declarative model or
//! MatrixMarket file), dispatches one command, and always writes a JSON
//! report — structured failure reports included — whose echoed config
//! replays to the same numbers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::deflation::{
    build_deflated, first_excited_with_shift, ladder_with_shift, select_shift, validate_shift,
    ShiftVerdict,
};
use crate::dft::density_scan;
use crate::engines::{exact_diagonalize, solve_ground, SolverConfig};
use crate::error::{Error, Result};
use crate::models::{build, ModelSpec};
use crate::mtx;
use crate::operator::{principal_angles, Eigenspace, HermitianOperator, Projector};
use crate::rng::SplitMix64;

/// Report location when neither the config nor the CLI names one.
pub const DEFAULT_REPORT_PATH: &str = "raylift-report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Excited,
    Ladder,
    DftScan,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Excited => "excited",
            Command::Ladder => "ladder",
            Command::DftScan => "dft-scan",
            Command::Verify => "verify",
        }
    }
}

/// One validated run request. Exactly one of `model` and `matrix_file`
/// names the operator; unknown keys are rejected when parsing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Ladder depth (how many distinct levels above the ground to climb).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Pins the level shift instead of the spectral-bound selector; the
    /// runtime validity check still runs but never escalates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_override: Option<f64>,
    /// Grid points per free density coordinate for `dft-scan`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_resolution: Option<usize>,
}

impl RunConfig {
    fn invalid(key: &str, detail: impl Into<String>) -> Error {
        Error::InvalidConfig {
            key: key.into(),
            detail: detail.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        match (&self.model, &self.matrix_file) {
            (Some(_), Some(_)) => {
                return Err(Self::invalid(
                    "model",
                    "`model` and `matrix_file` are mutually exclusive",
                ))
            }
            (None, None) => {
                return Err(Self::invalid(
                    "model",
                    "one of `model` and `matrix_file` is required",
                ))
            }
            _ => {}
        }
        match self.command {
            Command::Ladder => match self.k {
                None => return Err(Self::invalid("k", "ladder requires a depth `k >= 1`")),
                Some(0) => return Err(Self::invalid("k", "ladder depth must be at least 1")),
                Some(_) => {}
            },
            _ => {
                if self.k.is_some() {
                    return Err(Self::invalid(
                        "k",
                        "only meaningful for the `ladder` command",
                    ));
                }
            }
        }
        if let Some(shift) = self.shift_override {
            if !matches!(self.command, Command::Excited | Command::Ladder) {
                return Err(Self::invalid(
                    "shift_override",
                    "only meaningful for `excited` and `ladder`",
                ));
            }
            if !shift.is_finite() || shift <= 0.0 {
                return Err(Self::invalid(
                    "shift_override",
                    format!("{shift} is not a positive finite shift"),
                ));
            }
        }
        if self.command == Command::DftScan {
            if self.matrix_file.is_some() {
                return Err(Self::invalid(
                    "matrix_file",
                    "dft-scan needs a lattice model with site structure, not a raw matrix",
                ));
            }
        } else if self.scan_resolution.is_some() {
            return Err(Self::invalid(
                "scan_resolution",
                "only meaningful for the `dft-scan` command",
            ));
        }
        if let Some(resolution) = self.scan_resolution {
            if resolution < 2 {
                return Err(Self::invalid(
                    "scan_resolution",
                    "need at least 2 grid points per axis",
                ));
            }
        }
        Ok(())
    }
}

/// Parses and validates a JSON run config, filling solver defaults and
/// rejecting unknown keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads a MatrixMarket file into a validated Hermitian operator.
pub fn load_matrix(path: &Path) -> Result<HermitianOperator> {
    mtx::read_operator(path)
}

/// Everything one run writes to disk.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub library_version: String,
    /// What the operator was built from: kind, dimension, stored entries.
    pub input: Value,
    /// Content hash (SHA-256) of the matrix file, or of the canonical
    /// model JSON for declarative inputs.
    pub input_digest: String,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Command-specific payload; the replay contract compares this
    /// subtree (wall times vary between runs, results must not).
    pub results: Value,
    pub wall_time: BTreeMap<String, f64>,
}

fn digest_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_input(config: &RunConfig) -> Result<(HermitianOperator, Value, String)> {
    if let Some(path) = &config.matrix_file {
        let bytes = std::fs::read(path)?;
        let digest = digest_hex(&bytes);
        let matrix = mtx::read_matrix(bytes.as_slice())?;
        let entries = matrix
            .iter()
            .filter(|z| **z != num_complex::Complex64::new(0.0, 0.0))
            .count();
        let h = HermitianOperator::from_dense(matrix)?;
        let input = json!({
            "kind": "matrix_file",
            "path": path,
            "dim": h.dim(),
            "entries": entries,
        });
        Ok((h, input, digest))
    } else {
        let spec = config.model.as_ref().expect("validated config has a model");
        let canonical =
            serde_json::to_string(spec).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let digest = digest_hex(canonical.as_bytes());
        let h = build(spec)?;
        let input = json!({
            "kind": "model",
            "dim": h.dim(),
        });
        Ok((h, input, digest))
    }
}

fn excited_results(result: &crate::deflation::ExcitedResult) -> Value {
    json!({
        "ground": result.ground,
        "shift": {
            "value": result.level.shift_k,
            "selected": result.shift_choice,
            "escalations": result.escalations,
        },
        "validation": {
            "verdict": result.validation.verdict,
            "measured_min": result.validation.measured_min,
            "band": result.validation.band,
            "overlap": result.validation.overlap,
            "notes": result.validation.notes,
        },
        "target": {
            "eigenvalue": result.eigenspace.eigenvalue,
            "multiplicity": result.eigenspace.multiplicity(),
            "residuals": result.eigenspace.residual_norms,
        },
    })
}

struct Body {
    input: Value,
    input_digest: String,
    results: Value,
    success: bool,
}

fn run_inner(config: &RunConfig, wall: &mut BTreeMap<String, f64>) -> Result<Body> {
    let load_started = Instant::now();
    let (h, input, input_digest) = load_input(config)?;
    wall.insert("load_seconds".into(), load_started.elapsed().as_secs_f64());

    let compute_started = Instant::now();
    let (results, success) = match config.command {
        Command::Solve => {
            let ground = solve_ground(&h, &config.solver)?;
            let ok = ground.converged;
            (
                serde_json::to_value(&ground).map_err(|e| Error::ConfigParse(e.to_string()))?,
                ok,
            )
        }
        Command::Excited => {
            let result = first_excited_with_shift(&h, &config.solver, config.shift_override)?;
            let ok = result.ground.converged
                && result.validation.ground.converged
                && result.validation.verdict == ShiftVerdict::Valid;
            (excited_results(&result), ok)
        }
        Command::Ladder => {
            let depth = config.k.expect("validated ladder config has k");
            let result = ladder_with_shift(&h, depth, &config.solver, config.shift_override)?;
            // the climb errors out on any invalid rung, so arriving here
            // means every validity check passed
            (result.summary_json(), true)
        }
        Command::DftScan => {
            let spec = config
                .model
                .as_ref()
                .expect("validated dft-scan config has a model");
            let resolution = config
                .scan_resolution
                .unwrap_or(if spec.sites == 2 { 21 } else { 5 });
            let scan = density_scan(spec, &config.solver, resolution)?;
            (
                serde_json::to_value(&scan).map_err(|e| Error::ConfigParse(e.to_string()))?,
                true,
            )
        }
        Command::Verify => {
            let summary = verify_spectral_properties(&h, &config.solver)?;
            let ok = summary.all_pass;
            (
                serde_json::to_value(&summary).map_err(|e| Error::ConfigParse(e.to_string()))?,
                ok,
            )
        }
    };
    wall.insert(
        "compute_seconds".into(),
        compute_started.elapsed().as_secs_f64(),
    );
    Ok(Body {
        input,
        input_digest,
        results,
        success,
    })
}

/// Executes one validated config and assembles the report; failures
/// become structured reports rather than aborts.
pub fn run(config: &RunConfig) -> RunReport {
    let total_started = Instant::now();
    let mut wall = BTreeMap::new();
    let outcome = run_inner(config, &mut wall);
    wall.insert(
        "total_seconds".into(),
        total_started.elapsed().as_secs_f64(),
    );
    match outcome {
        Ok(body) => RunReport {
            config: config.clone(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            input: body.input,
            input_digest: body.input_digest,
            success: body.success,
            error: None,
            results: body.results,
            wall_time: wall,
        },
        Err(e) => RunReport {
            config: config.clone(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            input: Value::Null,
            input_digest: String::new(),
            success: false,
            error: Some(e.to_string()),
            results: Value::Null,
            wall_time: wall,
        },
    }
}

/// Serializes a report and writes it to `path`.
pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    let rendered =
        serde_json::to_string_pretty(report).map_err(|e| Error::ConfigParse(e.to_string()))?;
    std::fs::write(path, rendered + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

/// One verified property with its measured slack.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationSummary {
    pub shift_k: f64,
    pub undersized_shift_k: f64,
    pub checks: Vec<CheckOutcome>,
    pub all_pass: bool,
}

/// Number of random unit vectors per operator in the expectation-floor
/// check.
const BOUND_SAMPLES: usize = 200;

/// Batch check of the deflation guarantees against the dense oracle:
/// spectrum permutation, eigenvector preservation, eigenspace equality,
/// the expectation floor `⟨H₁⟩ ≥ min{E₁, E₀+K}`, and detection of an
/// undersized shift (`K = gap/2` must land the deflated ground at `E₀+K`
/// inside the old ground space and be flagged `too_small`).
pub fn verify_spectral_properties(
    h: &HermitianOperator,
    cfg: &SolverConfig,
) -> Result<VerificationSummary> {
    cfg.validate()?;
    let spaces = exact_diagonalize(h)?;
    if spaces.len() < 2 {
        return Err(Error::SpectrumExhausted {
            distinct: spaces.len(),
            requested: 2,
        });
    }
    let (scale, _) = h.spectral_scale();
    let scale = scale.max(1.0);
    let ground = &spaces[0];
    let e0 = ground.eigenvalue;
    let e1 = spaces[1].eigenvalue;
    let choice = select_shift(h, ground);
    let shift = choice.value;
    let h1 = build_deflated(h, ground, shift)?;
    let spaces1 = exact_diagonalize(&h1)?;
    let mut checks = Vec::new();

    // --- spectrum permutation -------------------------------------------
    let expand = |spaces: &[Eigenspace], lift_ground: Option<f64>| -> Vec<f64> {
        let mut values: Vec<f64> = spaces
            .iter()
            .enumerate()
            .flat_map(|(idx, s)| {
                let value = match (idx, lift_ground) {
                    (0, Some(k)) => s.eigenvalue + k,
                    _ => s.eigenvalue,
                };
                std::iter::repeat_n(value, s.multiplicity())
            })
            .collect();
        values.sort_by(f64::total_cmp);
        values
    };
    let expected = expand(&spaces, Some(shift));
    let actual = expand(&spaces1, None);
    let tol = 1e-8 * scale;
    let measured = expected
        .iter()
        .zip(&actual)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    checks.push(CheckOutcome {
        name: "spectrum_permutation".into(),
        pass: expected.len() == actual.len() && measured <= tol,
        measured,
        tolerance: tol,
        detail: format!(
            "multiset of {} eigenvalues with the ground copies moved to E0+K",
            expected.len()
        ),
    });

    // --- eigenvector preservation ----------------------------------------
    let mut worst_residual = 0.0f64;
    for (idx, space) in spaces.iter().enumerate() {
        let target = if idx == 0 {
            space.eigenvalue + shift
        } else {
            space.eigenvalue
        };
        let probe = Eigenspace {
            eigenvalue: target,
            basis: space.basis.clone(),
            residual_norms: vec![0.0; space.multiplicity()],
        };
        worst_residual = worst_residual.max(probe.max_residual_against(&h1)?);
    }
    checks.push(CheckOutcome {
        name: "eigenvector_preservation".into(),
        pass: worst_residual <= tol,
        measured: worst_residual,
        tolerance: tol,
        detail: "every original eigenvector stays an eigenvector of the shifted operator".into(),
    });

    // --- eigenspace equality ----------------------------------------------
    let mut worst_angle = 0.0f64;
    let mut paired = true;
    for (idx, space) in spaces.iter().enumerate() {
        let target = if idx == 0 {
            space.eigenvalue + shift
        } else {
            space.eigenvalue
        };
        match spaces1
            .iter()
            .find(|s| (s.eigenvalue - target).abs() <= tol.max(1e-6 * scale))
        {
            Some(partner) if partner.multiplicity() == space.multiplicity() => {
                let angles = principal_angles(&space.basis, &partner.basis)?;
                let largest = angles.last().copied().unwrap_or(0.0);
                worst_angle = worst_angle.max(largest);
            }
            _ => paired = false,
        }
    }
    checks.push(CheckOutcome {
        name: "eigenspace_equality".into(),
        pass: paired && worst_angle <= 1e-6,
        measured: worst_angle,
        tolerance: 1e-6,
        detail: "eigenspaces of the shifted operator match the originals (principal angles)".into(),
    });

    // --- expectation floor -------------------------------------------------
    let gap = e1 - e0;
    let small_shift = 0.5 * gap;
    let h1_small = build_deflated(h, ground, small_shift)?;
    let mut rng = SplitMix64::new(cfg.seed ^ 0x5EED_F100_0000_0000);
    let mut worst_margin = f64::INFINITY;
    for (operator, floor) in [
        (&h1, e1.min(e0 + shift)),
        (&h1_small, e1.min(e0 + small_shift)),
    ] {
        for _ in 0..BOUND_SAMPLES {
            let psi = rng.unit_vector(h.dim());
            let hv = operator.apply_raw(&psi.view())?;
            let expectation = crate::operator::inner(&psi.view(), &hv.view()).re;
            worst_margin = worst_margin.min(expectation - floor);
        }
    }
    let bound_tol = 1e-10 * scale;
    checks.push(CheckOutcome {
        name: "expectation_lower_bound".into(),
        pass: worst_margin >= -bound_tol,
        measured: worst_margin,
        tolerance: bound_tol,
        detail: format!(
            "min over {BOUND_SAMPLES} random states of <H1> - min(E1, E0+K), for a valid and an undersized K"
        ),
    });

    // --- undersized-shift detection ----------------------------------------
    let small_spaces = exact_diagonalize(&h1_small)?;
    let lifted_ground = &small_spaces[0];
    let value_offset = (lifted_ground.eigenvalue - (e0 + small_shift)).abs();
    let projector = Projector::from_eigenspace(ground)?;
    let mut min_overlap = f64::INFINITY;
    for v in &lifted_ground.basis {
        min_overlap = min_overlap.min(projector.overlap_fraction(v)?);
    }
    let validation = validate_shift(&h1_small, e0, small_shift, cfg)?;
    let detected = validation.verdict == ShiftVerdict::TooSmall;
    checks.push(CheckOutcome {
        name: "undersized_shift_detection".into(),
        pass: value_offset <= tol && min_overlap > 0.99 && detected,
        measured: value_offset,
        tolerance: tol,
        detail: format!(
            "K = gap/2 lands the deflated ground at E0+K inside the old ground space \
             (overlap {min_overlap:.6}) and the runtime check reports {:?}",
            validation.verdict
        ),
    });

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerificationSummary {
        shift_k: shift,
        undersized_shift_k: small_shift,
        checks,
        all_pass,
    })
}
