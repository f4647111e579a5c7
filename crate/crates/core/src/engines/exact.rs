//! Exact diagonalization: the dense LAPACK-backed oracle every other engine
//! and every spectral property check is verified against.

use ndarray::Array1;
use num_complex::Complex64;

use super::eigh_hermitian;
use crate::error::{Error, Result};
use crate::operator::{canonical_basis, Eigenspace, HermitianOperator, StateVector};

/// Largest dimension accepted for dense diagonalization.
pub const DENSE_LIMIT: usize = 4096;
/// Default relative gap below which adjacent eigenvalues merge into one
/// eigenspace.
pub const DEGENERACY_GAP_TOL: f64 = 1e-8;

/// Full spectrum of `H`, ascending, grouped into eigenspaces by degeneracy
/// clustering at the default gap tolerance.
pub fn exact_diagonalize(h: &HermitianOperator) -> Result<Vec<Eigenspace>> {
    exact_diagonalize_with(h, DEGENERACY_GAP_TOL)
}

/// Like [`exact_diagonalize`] with an explicit relative gap tolerance.
pub fn exact_diagonalize_with(h: &HermitianOperator, gap_tol: f64) -> Result<Vec<Eigenspace>> {
    let dim = h.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::DenseLimitExceeded {
            dim,
            limit: DENSE_LIMIT,
        });
    }
    let dense = h.densify()?;
    let (vals, vecs) = eigh_hermitian(&dense)?;
    let (scale, _) = h.spectral_scale();
    let gap_abs = gap_tol * scale;

    let mut spaces = Vec::new();
    let mut start = 0usize;
    for i in 1..=dim {
        let cluster_ends = i == dim || vals[i] - vals[i - 1] > gap_abs;
        if !cluster_ends {
            continue;
        }
        let cols: Vec<Array1<Complex64>> = (start..i).map(|j| vecs.column(j).to_owned()).collect();
        let basis = canonical_basis(&cols);
        let eigenvalue = vals.slice(ndarray::s![start..i]).sum() / (i - start) as f64;
        let mut residuals = Vec::with_capacity(basis.len());
        for v in &basis {
            let mut r = h.apply_raw(&v.view())?;
            r.zip_mut_with(v, |ri, vi| *ri -= Complex64::new(eigenvalue, 0.0) * vi);
            residuals.push(crate::operator::norm2(&r.view()));
        }
        spaces.push(Eigenspace::new(
            eigenvalue,
            basis.into_iter().map(StateVector::new).collect(),
            residuals,
        )?);
        start = i;
    }
    Ok(spaces)
}
