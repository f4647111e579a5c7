//! Rayleigh-quotient minimization restricted to the orthogonal complement
//! of a forbidden subspace — the classical route to excited states, kept as
//! an independent baseline for the deflation construction.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::{
    descent, drive, eigh_hermitian, finish, lanczos, power, Engine, GroundResult, SolverConfig,
};
use crate::engines::exact::DENSE_LIMIT;
use crate::error::{Error, Result};
use crate::operator::{inner, mgs_pass, norm2, HermitianOperator, Projector};

/// Minimizes `⟨ψ|H|ψ⟩` over unit vectors orthogonal to `forbidden`. Every
/// iterate of the iterative engines is re-projected into the complement;
/// the exact engine compresses `H` onto an explicit complement basis. When
/// `forbidden` spans the ground eigenspace this yields the first excited
/// energy of `H`.
pub fn complement_minimize(
    h: &HermitianOperator,
    forbidden: &Projector,
    cfg: &SolverConfig,
) -> Result<GroundResult> {
    cfg.validate()?;
    let dim = h.dim();
    if forbidden.dim() != dim {
        return Err(Error::DimensionMismatch {
            operator_dim: dim,
            vector_dim: forbidden.dim(),
        });
    }
    if forbidden.rank() >= dim {
        return Err(Error::EmptySearchSpace {
            rank: forbidden.rank(),
            dim,
        });
    }
    match cfg.engine {
        Engine::Exact => exact_complement(h, forbidden, cfg),
        Engine::Lanczos => drive(h, forbidden.raw_basis(), cfg, Engine::Lanczos, lanczos::run),
        Engine::RqDescent => drive(
            h,
            forbidden.raw_basis(),
            cfg,
            Engine::RqDescent,
            descent::run,
        ),
        Engine::ShiftedPower => drive(
            h,
            forbidden.raw_basis(),
            cfg,
            Engine::ShiftedPower,
            power::run,
        ),
    }
}

/// Deterministic orthonormal basis of the complement of `forbidden`:
/// coordinate axes with the forbidden components removed, Gram-Schmidt-ed
/// in index order.
fn complement_axes(forbidden: &Projector, dim: usize) -> Vec<Array1<Complex64>> {
    let target = dim - forbidden.rank();
    let mut accepted: Vec<Array1<Complex64>> = Vec::with_capacity(target);
    let mut threshold = 1e-6;
    while accepted.len() < target {
        let mut best: Option<(f64, Array1<Complex64>)> = None;
        for axis in 0..dim {
            if accepted.len() == target {
                break;
            }
            let mut w: Array1<Complex64> = Array1::zeros(dim);
            w[axis] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                mgs_pass(&mut w, forbidden.raw_basis());
                mgs_pass(&mut w, &accepted);
            }
            let n = norm2(&w.view());
            if n >= threshold {
                accepted.push(w.mapv(|z| z / n));
            } else if best.as_ref().map(|(b, _)| n > *b).unwrap_or(n > 1e-300) {
                best = Some((n, w));
            }
        }
        if accepted.len() < target {
            match best {
                Some((n, w)) if n > 1e-300 => accepted.push(w.mapv(|z| z / n)),
                _ => threshold *= 1e-3,
            }
        }
    }
    accepted
}

fn exact_complement(
    h: &HermitianOperator,
    forbidden: &Projector,
    cfg: &SolverConfig,
) -> Result<GroundResult> {
    let dim = h.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::DenseLimitExceeded {
            dim,
            limit: DENSE_LIMIT,
        });
    }
    let (scale, _) = h.spectral_scale();
    if forbidden.rank() == 0 {
        let spaces = super::exact_diagonalize_with(h, cfg.degeneracy_gap_tol)?;
        let ground = spaces.into_iter().next().expect("nonempty spectrum");
        let cluster: Vec<Array1<Complex64>> =
            ground.basis.iter().map(|v| v.coords().clone()).collect();
        return finish(
            h,
            &[],
            cluster,
            0,
            true,
            scale,
            Engine::Exact,
            cfg,
            Vec::new(),
        );
    }

    let axes = complement_axes(forbidden, dim);
    let m = axes.len();
    let images: Vec<Array1<Complex64>> = axes
        .iter()
        .map(|b| h.apply_raw(&b.view()))
        .collect::<Result<_>>()?;
    let mut small = Array2::<Complex64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            small[[i, j]] = inner(&axes[i].view(), &images[j].view());
        }
    }
    let small = Array2::from_shape_fn((m, m), |(i, j)| {
        0.5 * (small[[i, j]] + small[[j, i]].conj())
    });
    let (vals, vecs) = eigh_hermitian(&small)?;

    // chain-cluster the bottom of the compressed spectrum
    let gap_abs = cfg.degeneracy_gap_tol * scale;
    let mut mult = 1usize;
    while mult < m && vals[mult] - vals[mult - 1] <= gap_abs {
        mult += 1;
    }
    let mut cluster = Vec::with_capacity(mult);
    for j in 0..mult {
        let mut x: Array1<Complex64> = Array1::zeros(dim);
        for (i, b) in axes.iter().enumerate() {
            let c = vecs[[i, j]];
            x.zip_mut_with(b, |xi, bi| *xi += c * bi);
        }
        cluster.push(x);
    }
    finish(
        h,
        forbidden.raw_basis(),
        cluster,
        0,
        true,
        scale,
        Engine::Exact,
        cfg,
        Vec::new(),
    )
}
