//! Helpers shared by the integration suites: the seeded operator battery,
//! the named structured-model zoo, and spectrum bookkeeping against the
//! dense oracle.
#![allow(dead_code)]

use raylift::{
    build_model, exact_diagonalize, random_hermitian, Eigenspace, HermitianOperator, ModelKind,
    ModelSpec,
};

/// Twenty seeded random Hermitian operators spanning dimensions 8–256.
pub fn battery() -> Vec<(usize, u64)> {
    let dims = [
        8usize, 12, 16, 20, 24, 28, 32, 40, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 256,
    ];
    dims.iter()
        .enumerate()
        .map(|(i, &dim)| (dim, i as u64 + 1))
        .collect()
}

/// Structured models with known physics plus a few seeded random operators:
/// the shared zoo for cross-route agreement checks.
pub fn named_models() -> Vec<(String, HermitianOperator)> {
    let mut out: Vec<(String, HermitianOperator)> = Vec::new();
    let mut push_spec = |name: &str, spec: ModelSpec| {
        let h = build_model(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
        out.push((name.to_string(), h));
    };
    push_spec(
        "tight_binding_2_sites",
        ModelSpec::new(ModelKind::TightBinding, 2).with_param("t", 1.0),
    );
    push_spec(
        "tight_binding_3_sites",
        ModelSpec::new(ModelKind::TightBinding, 3).with_param("t", 1.0),
    );
    push_spec(
        "tight_binding_5_sites",
        ModelSpec::new(ModelKind::TightBinding, 5).with_param("t", 1.0),
    );
    push_spec(
        "tight_binding_4_sites_2_particles",
        ModelSpec::new(ModelKind::TightBinding, 4)
            .with_param("t", 1.0)
            .with_particles(2),
    );
    push_spec(
        "heisenberg_2_sites",
        ModelSpec::new(ModelKind::Heisenberg, 2).with_param("j", 1.0),
    );
    push_spec(
        "heisenberg_3_sites",
        ModelSpec::new(ModelKind::Heisenberg, 3).with_param("j", 1.0),
    );
    push_spec(
        "heisenberg_ferromagnet_2_sites",
        ModelSpec::new(ModelKind::Heisenberg, 2).with_param("j", -1.0),
    );
    push_spec(
        "hubbard_dimer",
        ModelSpec::new(ModelKind::Hubbard, 2)
            .with_param("t", 1.0)
            .with_param("u", 2.0),
    );
    for (dim, seed) in [(8usize, 5u64), (16, 11), (32, 23)] {
        let h = random_hermitian(dim, seed).unwrap();
        out.push((format!("random_{dim}_seed_{seed}"), h));
    }
    out
}

/// Distinct eigenvalues expanded by multiplicity, ascending.
pub fn expanded_spectrum(spaces: &[Eigenspace]) -> Vec<f64> {
    let mut values: Vec<f64> = spaces
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.eigenvalue, s.multiplicity()))
        .collect();
    values.sort_by(f64::total_cmp);
    values
}

/// The expanded spectrum with every ground copy moved up by `shift`.
pub fn lifted_spectrum(spaces: &[Eigenspace], shift: f64) -> Vec<f64> {
    let mut values: Vec<f64> = spaces
        .iter()
        .enumerate()
        .flat_map(|(idx, s)| {
            let v = if idx == 0 {
                s.eigenvalue + shift
            } else {
                s.eigenvalue
            };
            std::iter::repeat_n(v, s.multiplicity())
        })
        .collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Largest entrywise deviation between two sorted spectra; panics on
/// length mismatch (a multiset-size violation, not a numeric one).
pub fn spectrum_deviation(expected: &[f64], actual: &[f64]) -> f64 {
    assert_eq!(
        expected.len(),
        actual.len(),
        "spectra have different multiset sizes"
    );
    expected
        .iter()
        .zip(actual)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
}

/// Oracle ground energy and spectral gap (first two distinct eigenvalues).
pub fn ground_and_gap(h: &HermitianOperator) -> (f64, f64) {
    let spaces = exact_diagonalize(h).unwrap();
    assert!(
        spaces.len() >= 2,
        "operator has fewer than 2 distinct levels"
    );
    (
        spaces[0].eigenvalue,
        spaces[1].eigenvalue - spaces[0].eigenvalue,
    )
}
