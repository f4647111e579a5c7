//! raylift: excited states of Hermitian operators via level-shifted
//! ground-state solves.
//!
//! The library turns the k-th excited-state problem of a Hermitian operator
//! into a ground-state problem of a deflated operator `H + K·P`, where `P`
//! projects onto the eigenspaces below the target and `K` lifts them above
//! it. Ground-state engines, deflation logic, model Hamiltonians, a
//! constrained density search, and a CLI runner sit on top of a small
//! operator algebra.

pub mod deflation;
pub mod dft;
pub mod engines;
pub mod error;
pub mod models;
pub mod mtx;
pub mod operator;
pub mod rng;
pub mod runner;

pub use deflation::{
    build_deflated, first_excited, first_excited_with_shift, ladder, ladder_with_shift,
    select_shift, validate_shift, DeflationLevel, ExcitedResult, LadderResult, ShiftChoice,
    ShiftValidation, ShiftVerdict,
};
pub use dft::{
    density_domain, density_scan, evaluate_e, evaluate_f, minimize_over_densities, DensityScan,
    DensityVector, FunctionalEvaluation, ScanRow,
};
pub use engines::{
    complement_minimize, exact_diagonalize, lanczos_ground, rq_descent, shifted_power_ground,
    solve_ground, Engine, GroundResult, SolverConfig,
};
pub use error::{Error, Result};
pub use models::{
    build as build_model, number_operators, random_hermitian, Boundary, ModelKind, ModelSpec,
};
pub use operator::{
    orthonormalize, principal_angles, BoundSource, Eigenspace, HermitianOperator, Orthonormalized,
    Projector, ShiftTerm, StateVector,
};
pub use runner::{
    load_matrix, parse_config, run, verify_spectral_properties, write_report, CheckOutcome,
    Command, RunConfig, RunReport, VerificationSummary, DEFAULT_REPORT_PATH,
};
