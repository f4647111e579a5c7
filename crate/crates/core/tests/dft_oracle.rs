//! Independent oracles for the constrained density search: closed-form
//! functionals on the two-site hopping model, certified values at pinned
//! and uniform densities of the interacting dimer, Lagrangian-dual lower
//! bounds, explicit-state upper bounds, and the spectral oracle for the
//! outer minimum.

mod common;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use raylift::{
    build_model, density_scan, evaluate_e, evaluate_f, exact_diagonalize, minimize_over_densities,
    select_shift, DensityVector, Eigenspace, HermitianOperator, ModelKind, ModelSpec, SolverConfig,
};

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn two_site_hopping() -> ModelSpec {
    ModelSpec::new(ModelKind::TightBinding, 2).with_param("t", 1.0)
}

fn dimer() -> ModelSpec {
    ModelSpec::new(ModelKind::Hubbard, 2)
        .with_param("t", 1.0)
        .with_param("u", 2.0)
}

fn oracle_ground(spec: &ModelSpec) -> (HermitianOperator, Vec<Eigenspace>) {
    let h = build_model(spec).unwrap();
    let spaces = exact_diagonalize(&h).unwrap();
    (h, spaces)
}

/// Dense interior operator: the model without its external potential plus
/// `K` times the projector onto the supplied ground basis.
fn dense_interior(spec: &ModelSpec, ground: &Eigenspace, shift_k: f64) -> Array2<Complex64> {
    let mut bare = spec.clone();
    bare.external_potential = None;
    let mut a = build_model(&bare).unwrap().densify().unwrap();
    let dim = a.dim().0;
    for v in &ground.basis {
        let coords = v.coords();
        for i in 0..dim {
            for j in 0..dim {
                a[[i, j]] += real(shift_k) * coords[i] * coords[j].conj();
            }
        }
    }
    a
}

fn lowest_eigenvalue(m: Array2<Complex64>) -> f64 {
    let h = HermitianOperator::from_dense(m).unwrap();
    exact_diagonalize(&h).unwrap()[0].eigenvalue
}

fn expectation(m: &Array2<Complex64>, psi: &Array1<Complex64>) -> f64 {
    let image = m.dot(psi);
    psi.iter()
        .zip(image.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

#[test]
fn two_site_hopping_functional_matches_the_closed_form() {
    // One particle on two sites with hopping t=1 and shift K > 2t: over
    // |ψ> = c|site0> + s·e^{iφ}|site1> with |c|² = ρ₀ the interior energy
    // is K/2 + x·cosφ·(K−2) at x = √(ρ₀(1−ρ₀)), minimized at cosφ = −1.
    let spec = two_site_hopping();
    let (_, spaces) = oracle_ground(&spec);
    let k = 3.0;
    for step in 0..=10 {
        let rho0 = step as f64 / 10.0;
        let rho = DensityVector::new(vec![rho0, 1.0 - rho0], 1).unwrap();
        let eval = evaluate_f(&spec, &spaces[0], k, &rho).unwrap();
        let x = (rho0 * (1.0 - rho0)).sqrt();
        let want = 0.5 * k - x * (k - 2.0);
        assert!(
            (eval.f_value - want).abs() <= 1e-6,
            "rho0={rho0}: F={} vs closed form {want}",
            eval.f_value
        );
        assert!(eval.constraint_violation <= 1e-6);
    }
}

#[test]
fn dimer_uniform_density_recovers_the_triplet_energy() {
    // The triplet shares the uniform density (1,1), is orthogonal to the
    // singlet ground, and has energy 0; with K above the gap the interior
    // minimum over the whole sphere is also 0, so the constrained value is
    // pinned from both sides.
    let spec = dimer();
    let (h, spaces) = oracle_ground(&spec);
    let k = select_shift(&h, &spaces[0]).value;
    let gap = spaces[1].eigenvalue - spaces[0].eigenvalue;
    assert!(k > gap);
    let unconstrained_floor = lowest_eigenvalue(dense_interior(&spec, &spaces[0], k));
    assert!(
        (unconstrained_floor - 0.0).abs() <= 1e-10,
        "interior operator floor {unconstrained_floor} != triplet energy"
    );
    let rho = DensityVector::new(vec![1.0, 1.0], 2).unwrap();
    let eval = evaluate_f(&spec, &spaces[0], k, &rho).unwrap();
    assert!(
        (eval.f_value - 0.0).abs() <= 1e-6,
        "F[(1,1)] = {} but the certified value is 0",
        eval.f_value
    );
}

#[test]
fn dimer_vertex_density_forces_the_unique_configuration() {
    // Site occupation 2 on one site is attained by exactly one sector
    // configuration, so F equals that state's interior energy: U plus K
    // times its weight in the ground state.
    let spec = dimer();
    let (h, spaces) = oracle_ground(&spec);
    let k = select_shift(&h, &spaces[0]).value;
    let a = dense_interior(&spec, &spaces[0], k);
    let dim = a.dim().0;
    for (vertex, index) in [(vec![2.0, 0.0], 0usize), (vec![0.0, 2.0], dim - 1)] {
        // sector basis is ascending by configuration mask: both particles
        // on site 0 is the smallest mask, both on site 1 the largest
        let mut psi = Array1::<Complex64>::zeros(dim);
        psi[index] = real(1.0);
        let want = expectation(&a, &psi);
        let rho = DensityVector::new(vertex.clone(), 2).unwrap();
        let eval = evaluate_f(&spec, &spaces[0], k, &rho).unwrap();
        assert!(
            (eval.f_value - want).abs() <= 1e-6,
            "F[{vertex:?}] = {} vs unique-configuration value {want}",
            eval.f_value
        );
        assert!(eval.constraint_violation <= 1e-6);
    }
}

#[test]
fn functional_dominates_the_lagrangian_dual() {
    // For every multiplier λ, min over states with the prescribed density
    // is at least λmin(A + λ·n₀) − λ·ρ₀ (the second site constraint is
    // implied by particle-number conservation on the sector).
    for (spec, n) in [(two_site_hopping(), 1usize), (dimer(), 2usize)] {
        let (h, spaces) = oracle_ground(&spec);
        let k = select_shift(&h, &spaces[0]).value;
        let a = dense_interior(&spec, &spaces[0], k);
        let occupations = raylift::number_operators(&spec).unwrap();
        let d0 = occupations[0].densify().unwrap();
        let cap = n as f64;
        for step in 0..=6 {
            let rho0 = cap * step as f64 / 6.0;
            let rho = DensityVector::new(vec![rho0, cap - rho0], n).unwrap();
            let eval = evaluate_f(&spec, &spaces[0], k, &rho).unwrap();
            for lambda in [-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 30.0] {
                let mut shifted = a.clone();
                shifted.zip_mut_with(&d0, |x, y| *x += real(lambda) * y);
                let bound = lowest_eigenvalue(shifted) - lambda * rho0;
                assert!(
                    eval.f_value >= bound - 1e-6,
                    "{:?} rho0={rho0} λ={lambda}: F={} below dual bound {bound}",
                    spec.kind,
                    eval.f_value
                );
            }
        }
    }
}

#[test]
fn explicit_states_cap_the_functional_from_above() {
    // Two-configuration superpositions c·|both on site 0> + s·|both on
    // site 1> sweep the dimer densities (ρ₀, 2−ρ₀); the functional can
    // never exceed their best interior energy over the relative phase.
    let spec = dimer();
    let (h, spaces) = oracle_ground(&spec);
    let k = select_shift(&h, &spaces[0]).value;
    let a = dense_interior(&spec, &spaces[0], k);
    let dim = a.dim().0;
    for step in 0..=8 {
        let rho0 = 2.0 * step as f64 / 8.0;
        let c = (rho0 / 2.0).sqrt();
        let s = (1.0 - rho0 / 2.0).sqrt();
        let mut upper = f64::INFINITY;
        for phase_step in 0..64 {
            let phi = 2.0 * std::f64::consts::PI * phase_step as f64 / 64.0;
            let mut psi = Array1::<Complex64>::zeros(dim);
            psi[0] = real(c);
            psi[dim - 1] = Complex64::from_polar(s, phi);
            upper = upper.min(expectation(&a, &psi));
        }
        let rho = DensityVector::new(vec![rho0, 2.0 - rho0], 2).unwrap();
        let eval = evaluate_f(&spec, &spaces[0], k, &rho).unwrap();
        assert!(
            eval.f_value <= upper + 1e-6,
            "rho0={rho0}: F={} above the explicit-state bound {upper}",
            eval.f_value
        );
    }
}

#[test]
fn scan_rows_respect_the_variational_floor() {
    let spec = dimer();
    let cfg = SolverConfig::default();
    let (h, spaces) = oracle_ground(&spec);
    let e0 = spaces[0].eigenvalue;
    let e1 = spaces[1].eigenvalue;
    let scan = density_scan(&spec, &cfg, 9).unwrap();
    assert!(scan.shift_k > e1 - e0);
    let floor = e1.min(e0 + scan.shift_k);
    assert!((scan.ground_energy - e0).abs() <= 1e-8);
    assert_eq!(scan.rows.len(), 9);
    for row in &scan.rows {
        let f = row.f_value.expect("dimer grid rows are all feasible");
        let e = row.e_value.unwrap();
        assert_eq!(f, e, "no external potential: E must equal F");
        assert!(
            e >= floor - 1e-6,
            "density {:?}: E={} under the floor {floor}",
            row.density,
            e
        );
        assert!(row.constraint_violation <= 1e-6);
    }
    let _ = h;
}

#[test]
fn outer_minimum_matches_the_spectral_oracle() {
    let cfg = SolverConfig::default();
    for (spec, expected_density) in [
        (two_site_hopping(), vec![0.5, 0.5]),
        (dimer(), vec![1.0, 1.0]),
    ] {
        let (_, spaces) = oracle_ground(&spec);
        let e1 = spaces[1].eigenvalue;
        let (density, value) = minimize_over_densities(&spec, &cfg).unwrap();
        assert!(
            (value - e1).abs() <= 1e-4,
            "{:?}: outer minimum {value} vs first excited {e1}",
            spec.kind
        );
        for (got, want) in density.occupations().iter().zip(&expected_density) {
            assert!(
                (got - want).abs() <= 1e-3,
                "{:?}: minimizing density {:?} vs expected {:?}",
                spec.kind,
                density.occupations(),
                expected_density
            );
        }
    }
}

#[test]
fn outer_minimum_tracks_the_oracle_under_an_external_potential() {
    // The potential enters the total energy linearly and tilts the full
    // Hamiltonian, whose first excited level the outer search must still
    // find: the interior operator stays potential-free while the shift
    // projector follows the tilted ground state.
    let spec = two_site_hopping().with_potential(vec![0.5, -0.5]);
    let cfg = SolverConfig::default();
    let (_, spaces) = oracle_ground(&spec);
    let e1 = spaces[1].eigenvalue;
    assert!((e1 - (1.0f64 + 0.25).sqrt()).abs() <= 1e-12);
    let (density, value) = minimize_over_densities(&spec, &cfg).unwrap();
    assert!(
        (value - e1).abs() <= 1e-4,
        "outer minimum {value} vs tilted first excited {e1}"
    );
    let total: f64 = density.occupations().iter().sum();
    assert!((total - 1.0).abs() <= 1e-9);
}

#[test]
fn outer_minimum_is_robust_to_the_shift_value() {
    // Different valid shifts change the functional pointwise but not its
    // minimum or minimizer.
    let spec = two_site_hopping();
    let (h, spaces) = oracle_ground(&spec);
    let k1 = select_shift(&h, &spaces[0]).value;
    let k2 = 3.0 * k1;
    let mut minima = Vec::new();
    for k in [k1, k2] {
        let mut best = (f64::INFINITY, 0.0f64);
        for step in 0..=40 {
            let rho0 = step as f64 / 40.0;
            let rho = DensityVector::new(vec![rho0, 1.0 - rho0], 1).unwrap();
            let eval = evaluate_e(&spec, &spaces[0], k, &rho).unwrap();
            if eval.e_value < best.0 {
                best = (eval.e_value, rho0);
            }
        }
        minima.push(best);
    }
    assert!(
        (minima[0].0 - minima[1].0).abs() <= 2e-4,
        "grid minima differ across shifts: {minima:?}"
    );
    assert!(
        (minima[0].1 - minima[1].1).abs() <= 1e-3,
        "grid minimizers differ across shifts: {minima:?}"
    );
}

#[test]
fn stage_values_are_monotone_lower_bounds() {
    let spec = dimer();
    let (h, spaces) = oracle_ground(&spec);
    let k = select_shift(&h, &spaces[0]).value;
    let rho = DensityVector::new(vec![1.3, 0.7], 2).unwrap();
    let eval = evaluate_f(&spec, &spaces[0], k, &rho).unwrap();
    for pair in eval.stage_values.windows(2) {
        assert!(
            pair[1] >= pair[0] - 1e-10,
            "penalty stages decreased: {:?}",
            eval.stage_values
        );
    }
    let last = *eval.stage_values.last().unwrap();
    assert!(
        last <= eval.f_value + 1e-8,
        "final stage {last} exceeds the reported value {}",
        eval.f_value
    );
}

#[test]
fn total_energy_separates_into_functional_plus_potential() {
    let spec = dimer().with_potential(vec![0.6, -0.4]);
    let (h, spaces) = oracle_ground(&spec);
    let k = select_shift(&h, &spaces[0]).value;
    let rho = DensityVector::new(vec![1.2, 0.8], 2).unwrap();
    let eval = evaluate_e(&spec, &spaces[0], k, &rho).unwrap();
    let dot = 0.6 * 1.2 + (-0.4) * 0.8;
    assert_eq!(
        eval.e_value,
        eval.f_value + dot,
        "potential term must enter exactly once"
    );
    let _ = h;
}
