//! Rayleigh-quotient descent: at every step the quotient is minimized
//! exactly over span{x, gradient, previous direction} (a locally optimal
//! three-term recurrence), so the θ sequence is monotone by construction.
//! If the small subspace problem ever fails to decrease θ — possible when
//! the basis is numerically ill-conditioned — a step-halving line search
//! along the negative gradient takes over for that step and the fallback is
//! recorded.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::{apply_compressed, eigh_hermitian, RunParams, SingleRun};
use crate::error::Result;
use crate::operator::{inner, mgs_pass, norm2, HermitianOperator};

/// Matvec images are rebuilt from scratch this often to stop drift from
/// accumulating in the linear-combination updates.
const REFRESH_EVERY: usize = 50;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

struct Candidate {
    x: Array1<Complex64>,
    hx: Array1<Complex64>,
    theta: f64,
}

fn rayleigh(
    h: &HermitianOperator,
    guards: &[Array1<Complex64>],
    x: &Array1<Complex64>,
) -> Result<Candidate> {
    let hx = apply_compressed(h, guards, x)?;
    let theta = inner(&x.view(), &hx.view()).re;
    Ok(Candidate {
        x: x.clone(),
        hx,
        theta,
    })
}

pub(crate) fn run(
    h: &HermitianOperator,
    guards: &[Array1<Complex64>],
    start: Array1<Complex64>,
    p: &RunParams,
) -> Result<SingleRun> {
    let mut cur = rayleigh(h, guards, &start)?;
    let mut prev_dir: Option<Array1<Complex64>> = None;
    let mut iterations = 0usize;
    let mut notes: Vec<String> = Vec::new();
    let mut theta_trace = vec![cur.theta];
    let mut fallback_steps = 0usize;

    loop {
        let mut r = cur.hx.clone();
        r.zip_mut_with(&cur.x, |ri, xi| *ri -= Complex64::new(cur.theta, 0.0) * xi);
        let residual = norm2(&r.view());
        // Half the final tolerance, so residuals still clear the full
        // tolerance after the driver's canonicalizing rotation.
        if residual <= 0.5 * p.tol_abs {
            break;
        }
        if iterations >= p.cap {
            return Ok(SingleRun {
                theta: cur.theta,
                vector: cur.x,
                iterations,
                converged: false,
                notes,
                theta_trace,
            });
        }

        // Orthonormal basis of the search subspace, x first.
        let mut basis: Vec<Array1<Complex64>> = vec![cur.x.clone()];
        let mut images: Vec<Array1<Complex64>> = vec![cur.hx.clone()];
        for dir in [Some(&r), prev_dir.as_ref()].into_iter().flatten() {
            let raw = norm2(&dir.view());
            if raw < 1e-300 {
                continue;
            }
            let mut w = dir.clone();
            mgs_pass(&mut w, &basis);
            mgs_pass(&mut w, &basis);
            let n = norm2(&w.view());
            if n >= 1e-8 * raw {
                let w = w.mapv(|z| z / n);
                images.push(apply_compressed(h, guards, &w)?);
                basis.push(w);
            }
        }

        // Compressed operator on the subspace; Hermitian part taken to
        // absorb floating-point asymmetry.
        let k = basis.len();
        let mut small = Array2::<Complex64>::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                small[[i, j]] = inner(&basis[i].view(), &images[j].view());
            }
        }
        let small = Array2::from_shape_fn((k, k), |(i, j)| {
            0.5 * (small[[i, j]] + small[[j, i]].conj())
        });
        let (_, vecs) = eigh_hermitian(&small)?;

        let mut x_new: Array1<Complex64> = Array1::zeros(h.dim());
        let mut hx_new: Array1<Complex64> = Array1::zeros(h.dim());
        for i in 0..k {
            let c = vecs[[i, 0]];
            x_new.zip_mut_with(&basis[i], |xi, bi| *xi += c * bi);
            hx_new.zip_mut_with(&images[i], |xi, bi| *xi += c * bi);
        }
        mgs_pass(&mut x_new, guards);
        let n = norm2(&x_new.view());
        x_new.mapv_inplace(|z| z / n);
        iterations += 1;
        let mut next = if iterations.is_multiple_of(REFRESH_EVERY) {
            rayleigh(h, guards, &x_new)?
        } else {
            hx_new.mapv_inplace(|z| z / n);
            let theta = inner(&x_new.view(), &hx_new.view()).re;
            Candidate {
                x: x_new,
                hx: hx_new,
                theta,
            }
        };

        if next.theta > cur.theta + 1e-14 * p.scale.max(1.0) {
            // Subspace step failed to descend; halve steps along -r.
            fallback_steps += 1;
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let mut x_t = cur.x.clone();
                x_t.zip_mut_with(&r, |xi, ri| *xi -= Complex64::new(t, 0.0) * ri);
                mgs_pass(&mut x_t, guards);
                let n_t = norm2(&x_t.view());
                if n_t >= 1e-12 {
                    let x_t = x_t.mapv(|z| z / n_t);
                    let cand = rayleigh(h, guards, &x_t)?;
                    if cand.theta <= cur.theta - ARMIJO_C * t * residual * residual {
                        accepted = Some(cand);
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some(cand) => next = cand,
                None => {
                    notes.push(format!(
                        "descent stalled at iteration {iterations}: no decreasing step found"
                    ));
                    return Ok(SingleRun {
                        theta: cur.theta,
                        vector: cur.x,
                        iterations,
                        converged: false,
                        notes,
                        theta_trace,
                    });
                }
            }
        }

        // Direction actually travelled, orthogonalized against the new x.
        let mut dir = next.x.clone();
        dir.zip_mut_with(&cur.x, |di, xi| *di -= xi);
        let dn = norm2(&dir.view());
        prev_dir = if dn >= 1e-12 {
            Some(dir.mapv(|z| z / dn))
        } else {
            None
        };
        theta_trace.push(next.theta);
        cur = next;
    }

    if fallback_steps > 0 {
        notes.push(format!(
            "step-halving fallback engaged on {fallback_steps} iteration(s)"
        ));
    }
    // Final values recomputed from scratch.
    let cur = rayleigh(h, guards, &cur.x)?;
    let mut r = cur.hx.clone();
    r.zip_mut_with(&cur.x, |ri, xi| *ri -= Complex64::new(cur.theta, 0.0) * xi);
    let converged = norm2(&r.view()) <= p.tol_abs;
    Ok(SingleRun {
        theta: cur.theta,
        vector: cur.x,
        iterations,
        converged,
        notes,
        theta_trace,
    })
}
