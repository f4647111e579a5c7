//! Shifted power iteration: plain power iteration on `σI − H` with `σ` an
//! upper bound on the spectrum, so the smallest eigenvalue of `H` becomes
//! the dominant one. Deliberately the simplest engine — a slow but
//! independent cross-check on the others.

use ndarray::Array1;
use num_complex::Complex64;

use super::{apply_compressed, RunParams, SingleRun};
use crate::error::Result;
use crate::operator::{inner, mgs_pass, norm2, HermitianOperator};
use crate::rng::SplitMix64;

pub(crate) fn run(
    h: &HermitianOperator,
    guards: &[Array1<Complex64>],
    start: Array1<Complex64>,
    p: &RunParams,
) -> Result<SingleRun> {
    let sigma = Complex64::new(p.sigma, 0.0);
    let mut v = start;
    let mut iterations = 0usize;
    let mut notes: Vec<String> = Vec::new();
    let mut theta_trace: Vec<f64> = Vec::new();

    loop {
        let hv = apply_compressed(h, guards, &v)?;
        let theta = inner(&v.view(), &hv.view()).re;
        theta_trace.push(theta);
        let mut r = hv.clone();
        r.zip_mut_with(&v, |ri, vi| *ri -= Complex64::new(theta, 0.0) * vi);
        let residual = norm2(&r.view());
        // Half the final tolerance, so residuals still clear the full
        // tolerance after the driver's canonicalizing rotation.
        if residual <= 0.5 * p.tol_abs {
            return Ok(SingleRun {
                theta,
                vector: v,
                iterations,
                converged: true,
                notes,
                theta_trace,
            });
        }
        if iterations >= p.cap {
            return Ok(SingleRun {
                theta,
                vector: v,
                iterations,
                converged: false,
                notes,
                theta_trace,
            });
        }

        // w = (σI − H) v, kept inside the complement
        let mut w = v.mapv(|z| sigma * z);
        w.zip_mut_with(&hv, |wi, hi| *wi -= hi);
        mgs_pass(&mut w, guards);
        let n = norm2(&w.view());
        if n <= 1e-13 * p.scale.max(1.0) {
            // v is annihilated by σI − H (eigenvector at the top of the
            // spectrum): restart from a fresh seeded direction.
            let mut rng = SplitMix64::new(0x70BE_57A2_0000_0000 ^ iterations as u64);
            let mut restarted = None;
            for _ in 0..32 {
                let mut f = rng.unit_vector(h.dim());
                mgs_pass(&mut f, guards);
                mgs_pass(&mut f, guards);
                let fn_ = norm2(&f.view());
                if fn_ >= 1e-6 {
                    restarted = Some(f.mapv(|z| z / fn_));
                    break;
                }
            }
            match restarted {
                Some(f) => {
                    notes.push(format!(
                        "iterate annihilated by the shift at step {iterations}: restarted"
                    ));
                    v = f;
                }
                None => {
                    return Ok(SingleRun {
                        theta,
                        vector: v,
                        iterations,
                        converged: false,
                        notes,
                        theta_trace,
                    });
                }
            }
        } else {
            v = w.mapv(|z| z / n);
        }
        iterations += 1;
    }
}
