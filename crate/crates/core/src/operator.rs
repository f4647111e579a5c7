//! Hermitian operators, state vectors, eigenspaces, and projectors.
//!
//! Operators are immutable after construction and cheap to clone (dense
//! payloads sit behind `Arc`), so they can be shared freely across threads.
//! Complex scalars are used throughout, including for real symmetric input.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Default relative tolerance for Hermiticity validation of dense storage.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Tolerance for Hermiticity probes of matrix-free operators.
pub const PROBE_TOL: f64 = 1e-10;
/// Orthonormality tolerance for basis validation (entrywise Gram deviation).
pub const GRAM_TOL: f64 = 1e-10;
/// Post-projection norm below which Gram-Schmidt drops a vector.
pub const DROP_TOL: f64 = 1e-10;

/// Conjugate-linear inner product `⟨a|b⟩ = Σ conj(a_k) b_k`.
pub(crate) fn inner(a: &ArrayView1<'_, Complex64>, b: &ArrayView1<'_, Complex64>) -> Complex64 {
    a.iter()
        .zip(b.iter())
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// Euclidean norm of a complex vector.
pub(crate) fn norm2(a: &ArrayView1<'_, Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Subtracts from `w` its components along each vector in `basis`
/// (one modified Gram-Schmidt pass).
pub(crate) fn mgs_pass(w: &mut Array1<Complex64>, basis: &[Array1<Complex64>]) {
    for q in basis {
        let c = inner(&q.view(), &w.view());
        if c.norm_sqr() > 0.0 {
            w.zip_mut_with(q, |wi, qi| *wi -= c * qi);
        }
    }
}

// ---------------------------------------------------------------------------
// StateVector
// ---------------------------------------------------------------------------

/// A vector in the operator's Hilbert space. Value-semantic; unit 2-norm
/// after [`StateVector::normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    coords: Array1<Complex64>,
}

impl StateVector {
    pub fn new(coords: Array1<Complex64>) -> Self {
        StateVector { coords }
    }

    pub fn from_real(coords: &[f64]) -> Self {
        StateVector {
            coords: coords.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    /// Standard basis vector `e_index`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut coords = Array1::zeros(dim);
        coords[index] = Complex64::new(1.0, 0.0);
        StateVector { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &Array1<Complex64> {
        &self.coords
    }

    pub fn into_coords(self) -> Array1<Complex64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.coords.view())
    }

    /// Unit-norm copy. Rejects vectors with norm below `1e-300`.
    pub fn normalize(&self) -> Result<StateVector> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::ZeroNorm { norm: n });
        }
        Ok(StateVector {
            coords: self.coords.mapv(|z| z / n),
        })
    }

    /// Inner product `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn overlap(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                operator_dim: self.dim(),
                vector_dim: other.dim(),
            });
        }
        Ok(inner(&self.coords.view(), &other.coords.view()))
    }
}

impl From<Array1<Complex64>> for StateVector {
    fn from(coords: Array1<Complex64>) -> Self {
        StateVector { coords }
    }
}

/// Serializes as a JSON array of `[re, im]` pairs.
impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.coords.len()))?;
        for z in self.coords.iter() {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }
}

// ---------------------------------------------------------------------------
// HermitianOperator
// ---------------------------------------------------------------------------

/// Signature of a matrix-free operator action.
pub type ApplyFn = dyn Fn(ArrayView1<'_, Complex64>) -> Array1<Complex64> + Send + Sync;

/// One rank-`r` level shift `strength · Σ_b |b⟩⟨b|` over an orthonormal basis.
#[derive(Clone)]
pub struct ShiftTerm {
    pub(crate) strength: f64,
    pub(crate) basis: Vec<Array1<Complex64>>,
}

impl ShiftTerm {
    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_vectors(&self) -> impl Iterator<Item = StateVector> + '_ {
        self.basis.iter().map(|v| StateVector::new(v.clone()))
    }

    fn apply_into(&self, psi: &ArrayView1<'_, Complex64>, out: &mut Array1<Complex64>) {
        for b in &self.basis {
            let c = inner(&b.view(), psi) * self.strength;
            out.zip_mut_with(b, |oi, bi| *oi += c * bi);
        }
    }
}

impl fmt::Debug for ShiftTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftTerm")
            .field("strength", &self.strength)
            .field("rank", &self.basis.len())
            .finish()
    }
}

#[derive(Clone)]
enum Base {
    Operator(Arc<HermitianOperator>),
    Callback(Arc<ApplyFn>),
}

#[derive(Clone)]
enum Storage {
    Dense(Arc<Array2<Complex64>>),
    MatrixFree { base: Base, terms: Vec<ShiftTerm> },
}

/// Where a spectral bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// Entrywise Gershgorin disks (rigorous enclosure).
    Gershgorin,
    /// Power-iteration estimate inflated by 10% (heuristic, entry access
    /// unavailable).
    PowerHeuristic,
}

/// A self-adjoint operator, stored dense or matrix-free. Matrix-free storage
/// is a base action plus accumulated rank-`r` level shifts, which keeps
/// deflated operators structurally explicit and cheap to apply.
#[derive(Clone)]
pub struct HermitianOperator {
    dim: usize,
    storage: Storage,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.storage {
            Storage::Dense(_) => "dense".to_string(),
            Storage::MatrixFree { base, terms } => {
                let b = match base {
                    Base::Operator(_) => "operator",
                    Base::Callback(_) => "callback",
                };
                format!("matrix-free({b}, {} shifts)", terms.len())
            }
        };
        f.debug_struct("HermitianOperator")
            .field("dim", &self.dim)
            .field("storage", &kind)
            .finish()
    }
}

impl HermitianOperator {
    /// Builds from a dense matrix, validating self-adjointness:
    /// `max|A_ij - conj(A_ji)| <= tol · max|A_ij|`.
    pub fn from_dense(matrix: Array2<Complex64>) -> Result<Self> {
        Self::from_dense_with_tol(matrix, HERMITICITY_TOL)
    }

    pub fn from_dense_with_tol(matrix: Array2<Complex64>, tol: f64) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows != cols || rows == 0 {
            return Err(Error::InvalidModel {
                field: "matrix".into(),
                detail: format!("expected square nonempty matrix, got {rows}x{cols}"),
            });
        }
        let mut max_abs = 0.0f64;
        let mut max_dev = 0.0f64;
        for i in 0..rows {
            for j in 0..cols {
                let a = matrix[[i, j]];
                max_abs = max_abs.max(a.norm());
                let dev = (a - matrix[[j, i]].conj()).norm();
                max_dev = max_dev.max(dev);
            }
        }
        if max_dev > tol * max_abs && max_abs > 0.0 {
            return Err(Error::NotHermitian {
                detail: "dense entries violate A = A^H".into(),
                deviation: max_dev,
                tolerance: tol * max_abs,
            });
        }
        Ok(HermitianOperator {
            dim: rows,
            storage: Storage::Dense(Arc::new(matrix)),
        })
    }

    /// Builds from an apply callback. Self-adjointness is checked on 10
    /// seeded probe pairs: `⟨x|Ay⟩ = conj(⟨y|Ax⟩)` within `1e-10` relative.
    pub fn from_apply(dim: usize, action: Arc<ApplyFn>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel {
                field: "dim".into(),
                detail: "dimension must be at least 1".into(),
            });
        }
        let op = HermitianOperator {
            dim,
            storage: Storage::MatrixFree {
                base: Base::Callback(action),
                terms: Vec::new(),
            },
        };
        op.probe_hermiticity()?;
        Ok(op)
    }

    /// Base operator plus accumulated shift terms. Shift bases must be
    /// orthonormal; the base is flattened so ladders stay one level deep.
    pub(crate) fn from_shifted(
        base: Arc<HermitianOperator>,
        new_terms: Vec<ShiftTerm>,
    ) -> Result<Self> {
        let dim = base.dim;
        for term in &new_terms {
            for v in &term.basis {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        operator_dim: dim,
                        vector_dim: v.len(),
                    });
                }
            }
            check_orthonormal(&term.basis, GRAM_TOL)?;
        }
        let (base, terms) = match &base.storage {
            Storage::MatrixFree { base: inner, terms } => {
                let mut all = terms.clone();
                all.extend(new_terms);
                (inner.clone(), all)
            }
            Storage::Dense(_) => (Base::Operator(base), new_terms),
        };
        Ok(HermitianOperator {
            dim,
            storage: Storage::MatrixFree { base, terms },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Accumulated level-shift terms (empty for plain dense storage).
    pub fn shift_terms(&self) -> &[ShiftTerm] {
        match &self.storage {
            Storage::Dense(_) => &[],
            Storage::MatrixFree { terms, .. } => terms,
        }
    }

    /// `H · ψ`. For matrix-free storage: base action plus
    /// `Σ_t K_t Σ_b ⟨b|ψ⟩ b` over all shift terms.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        Ok(StateVector::new(self.apply_raw(&psi.coords().view())?))
    }

    pub(crate) fn apply_raw(&self, psi: &ArrayView1<'_, Complex64>) -> Result<Array1<Complex64>> {
        if psi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                operator_dim: self.dim,
                vector_dim: psi.len(),
            });
        }
        match &self.storage {
            Storage::Dense(m) => Ok(m.dot(psi)),
            Storage::MatrixFree { base, terms } => {
                let mut out = match base {
                    Base::Operator(op) => op.apply_raw(psi)?,
                    Base::Callback(f) => {
                        let out = f(psi.reborrow());
                        if out.len() != self.dim {
                            return Err(Error::DimensionMismatch {
                                operator_dim: self.dim,
                                vector_dim: out.len(),
                            });
                        }
                        out
                    }
                };
                for term in terms {
                    term.apply_into(psi, &mut out);
                }
                Ok(out)
            }
        }
    }

    /// Real Rayleigh quotient `⟨ψ|Hψ⟩` for normalized `ψ`. The imaginary
    /// part is discarded after asserting `|Im| <= 1e-10·|Re| + 1e-12`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let hpsi = self.apply_raw(&psi.coords().view())?;
        let e = inner(&psi.coords().view(), &hpsi.view());
        if e.im.abs() > 1e-10 * e.re.abs() + 1e-12 {
            return Err(Error::ComplexExpectation {
                real: e.re,
                imag: e.im,
            });
        }
        Ok(e.re)
    }

    /// Dense realization of the operator. Callback bases are materialized
    /// column by column.
    pub fn densify(&self) -> Result<Array2<Complex64>> {
        match &self.storage {
            Storage::Dense(m) => Ok((**m).clone()),
            Storage::MatrixFree { base, terms } => {
                let n = self.dim;
                let mut out = match base {
                    Base::Operator(op) => op.densify()?,
                    Base::Callback(f) => {
                        let mut m = Array2::zeros((n, n));
                        let mut e: Array1<Complex64> = Array1::zeros(n);
                        for j in 0..n {
                            e[j] = Complex64::new(1.0, 0.0);
                            let col = f(e.view());
                            for i in 0..n {
                                m[[i, j]] = col[i];
                            }
                            e[j] = Complex64::new(0.0, 0.0);
                        }
                        m
                    }
                };
                for term in terms {
                    for b in &term.basis {
                        for i in 0..n {
                            for j in 0..n {
                                out[[i, j]] += term.strength * b[i] * b[j].conj();
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum, if entry access is
    /// available. Shift terms widen the enclosure by their strengths.
    pub fn gershgorin_interval(&self) -> Option<(f64, f64)> {
        match &self.storage {
            Storage::Dense(m) => {
                let n = self.dim;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..n {
                    let center = m[[i, i]].re;
                    let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[[i, j]].norm()).sum();
                    lo = lo.min(center - radius);
                    hi = hi.max(center + radius);
                }
                Some((lo, hi))
            }
            Storage::MatrixFree { base, terms } => {
                let (mut lo, mut hi) = match base {
                    Base::Operator(op) => op.gershgorin_interval()?,
                    Base::Callback(_) => return None,
                };
                for term in terms {
                    // K·P has spectrum {0, K}
                    if term.strength >= 0.0 {
                        hi += term.strength;
                    } else {
                        lo += term.strength;
                    }
                }
                Some((lo, hi))
            }
        }
    }

    /// Bound on `max|λ|`, used as the scale for all relative tolerances.
    pub fn spectral_scale(&self) -> (f64, BoundSource) {
        match self.gershgorin_interval() {
            Some((lo, hi)) => (lo.abs().max(hi.abs()).max(1e-300), BoundSource::Gershgorin),
            None => (
                (1.1 * self.power_radius_estimate()).max(1e-300),
                BoundSource::PowerHeuristic,
            ),
        }
    }

    /// Upper bound on the largest eigenvalue.
    pub fn spectrum_upper_bound(&self) -> (f64, BoundSource) {
        match self.gershgorin_interval() {
            Some((_, hi)) => (hi, BoundSource::Gershgorin),
            None => (
                1.1 * self.power_radius_estimate(),
                BoundSource::PowerHeuristic,
            ),
        }
    }

    /// Power-iteration estimate of the spectral radius (fixed internal seed,
    /// 80 sweeps). `‖Hv‖` is used rather than the Rayleigh quotient so mixed
    /// spectra with `±λ` pairs do not cancel.
    fn power_radius_estimate(&self) -> f64 {
        let mut rng = SplitMix64::new(0x9E11_5CA1_E0D1_5C5F);
        let mut v = rng.unit_vector(self.dim);
        let mut estimate = 0.0f64;
        for _ in 0..80 {
            let w = self
                .apply_raw(&v.view())
                .expect("internal probe dimension mismatch");
            let n = norm2(&w.view());
            estimate = estimate.max(n);
            if n < 1e-300 {
                break;
            }
            v = w.mapv(|z| z / n);
        }
        estimate
    }

    /// Self-adjointness probes for matrix-free actions: 10 seeded pairs,
    /// `|⟨x|Ay⟩ - conj(⟨y|Ax⟩)| <= 1e-10 · (1 + max|·|)`.
    fn probe_hermiticity(&self) -> Result<()> {
        let mut rng = SplitMix64::new(0x5E1F_AD01_7E57_AB1E);
        for _ in 0..10 {
            let x = rng.unit_vector(self.dim);
            let y = rng.unit_vector(self.dim);
            let ay = self.apply_raw(&y.view())?;
            let ax = self.apply_raw(&x.view())?;
            let lhs = inner(&x.view(), &ay.view());
            let rhs = inner(&y.view(), &ax.view()).conj();
            let scale = 1.0 + lhs.norm().max(rhs.norm());
            if (lhs - rhs).norm() > PROBE_TOL * scale {
                return Err(Error::NotHermitian {
                    detail: "matrix-free action failed probe ⟨x|Ay⟩ = conj(⟨y|Ax⟩)".into(),
                    deviation: (lhs - rhs).norm(),
                    tolerance: PROBE_TOL * scale,
                });
            }
        }
        Ok(())
    }

    /// Dense entries if stored dense (no materialization).
    pub fn dense_entries(&self) -> Option<&Array2<Complex64>> {
        match &self.storage {
            Storage::Dense(m) => Some(m),
            Storage::MatrixFree { .. } => None,
        }
    }
}

fn check_orthonormal(basis: &[Array1<Complex64>], tol: f64) -> Result<()> {
    let mut max_dev = 0.0f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let g = inner(&a.view(), &b.view());
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((g - target).norm());
        }
    }
    if max_dev > tol {
        return Err(Error::NotOrthonormal {
            deviation: max_dev,
            tolerance: tol,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Eigenspace
// ---------------------------------------------------------------------------

/// One eigenvalue together with an orthonormal basis of its eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub eigenvalue: f64,
    pub basis: Vec<StateVector>,
    pub residual_norms: Vec<f64>,
}

impl Eigenspace {
    /// Validates basis orthonormality (Gram within `1e-10` entrywise).
    pub fn new(eigenvalue: f64, basis: Vec<StateVector>, residual_norms: Vec<f64>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::EmptyInput {
                context: "eigenspace basis".into(),
            });
        }
        if basis.len() != residual_norms.len() {
            return Err(Error::InvalidEigenspace {
                detail: format!(
                    "basis has {} vectors but {} residual norms",
                    basis.len(),
                    residual_norms.len()
                ),
            });
        }
        let raw: Vec<Array1<Complex64>> = basis.iter().map(|v| v.coords().clone()).collect();
        check_orthonormal(&raw, GRAM_TOL)?;
        Ok(Eigenspace {
            eigenvalue,
            basis,
            residual_norms,
        })
    }

    pub fn multiplicity(&self) -> usize {
        self.basis.len()
    }

    /// Recomputes `‖Hv - λv‖` for every basis vector against `h` and
    /// returns the maximum.
    pub fn max_residual_against(&self, h: &HermitianOperator) -> Result<f64> {
        let mut worst = 0.0f64;
        for v in &self.basis {
            let mut hv = h.apply_raw(&v.coords().view())?;
            hv.zip_mut_with(v.coords(), |hi, vi| {
                *hi -= Complex64::new(self.eigenvalue, 0.0) * vi
            });
            worst = worst.max(norm2(&hv.view()));
        }
        Ok(worst)
    }
}

// ---------------------------------------------------------------------------
// Projector
// ---------------------------------------------------------------------------

/// Orthogonal projector `Σ_v |v⟩⟨v|` onto the span of an orthonormal basis.
/// Idempotent and Hermitian by construction.
#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    basis: Vec<Array1<Complex64>>,
}

impl Projector {
    /// Rank-zero projector (projects everything to the zero vector).
    pub fn empty(dim: usize) -> Self {
        Projector {
            dim,
            basis: Vec::new(),
        }
    }

    pub fn new(vectors: Vec<StateVector>) -> Result<Self> {
        let dim = match vectors.first() {
            Some(v) => v.dim(),
            None => {
                return Err(Error::EmptyInput {
                    context: "projector basis (use Projector::empty for rank zero)".into(),
                })
            }
        };
        let raw: Vec<Array1<Complex64>> = vectors.into_iter().map(|v| v.into_coords()).collect();
        for v in &raw {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    operator_dim: dim,
                    vector_dim: v.len(),
                });
            }
        }
        check_orthonormal(&raw, GRAM_TOL)?;
        Ok(Projector { dim, basis: raw })
    }

    pub fn from_eigenspace(space: &Eigenspace) -> Result<Self> {
        Self::new(space.basis.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_vectors(&self) -> impl Iterator<Item = StateVector> + '_ {
        self.basis.iter().map(|v| StateVector::new(v.clone()))
    }

    pub(crate) fn raw_basis(&self) -> &[Array1<Complex64>] {
        &self.basis
    }

    /// `P ψ = Σ_v ⟨v|ψ⟩ v`.
    pub fn project(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                operator_dim: self.dim,
                vector_dim: psi.dim(),
            });
        }
        let mut out: Array1<Complex64> = Array1::zeros(self.dim);
        for v in &self.basis {
            let c = inner(&v.view(), &psi.coords().view());
            out.zip_mut_with(v, |oi, vi| *oi += c * vi);
        }
        Ok(StateVector::new(out))
    }

    /// `(1 - P) ψ`.
    pub fn project_complement(&self, psi: &StateVector) -> Result<StateVector> {
        let p = self.project(psi)?;
        Ok(StateVector::new(psi.coords() - p.coords()))
    }

    /// `‖Pψ‖²` — for a normalized `ψ`, the weight inside the range of `P`.
    pub fn overlap_fraction(&self, psi: &StateVector) -> Result<f64> {
        let p = self.project(psi)?;
        Ok(p.norm().powi(2))
    }
}

// ---------------------------------------------------------------------------
// Orthonormalization
// ---------------------------------------------------------------------------

/// Output of [`orthonormalize`]: the surviving basis plus the input indices
/// that were dropped as linearly dependent.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub basis: Vec<StateVector>,
    pub dropped: Vec<usize>,
}

/// Modified Gram-Schmidt with a re-orthogonalization pass, in input order.
/// Inputs are normalized first; a vector whose post-projection norm falls
/// below [`DROP_TOL`] is dropped and reported.
pub fn orthonormalize(vectors: &[StateVector]) -> Result<Orthonormalized> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput {
            context: "orthonormalize input".into(),
        });
    }
    let dim = vectors[0].dim();
    let mut basis: Vec<Array1<Complex64>> = Vec::new();
    let mut dropped = Vec::new();
    for (idx, v) in vectors.iter().enumerate() {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                operator_dim: dim,
                vector_dim: v.dim(),
            });
        }
        let n0 = v.norm();
        if n0 < 1e-300 {
            dropped.push(idx);
            continue;
        }
        let mut w = v.coords().mapv(|z| z / n0);
        mgs_pass(&mut w, &basis);
        mgs_pass(&mut w, &basis);
        let n = norm2(&w.view());
        if n < DROP_TOL {
            dropped.push(idx);
            continue;
        }
        basis.push(w.mapv(|z| z / n));
    }
    if basis.is_empty() {
        return Err(Error::RankZero { drop_tol: DROP_TOL });
    }
    Ok(Orthonormalized {
        basis: basis.into_iter().map(StateVector::new).collect(),
        dropped,
    })
}

// ---------------------------------------------------------------------------
// Canonical bases and principal angles
// ---------------------------------------------------------------------------

/// Deterministic basis of the span of `vectors` (assumed orthonormal):
/// coordinate axes are projected onto the span and Gram-Schmidt-ed in index
/// order, then each vector's phase is fixed so its largest-magnitude entry
/// is real positive. Any orthonormal basis of the same subspace maps to the
/// same output, which makes solver reports deterministic.
pub(crate) fn canonical_basis(vectors: &[Array1<Complex64>]) -> Vec<Array1<Complex64>> {
    let d = vectors.len();
    if d == 0 {
        return Vec::new();
    }
    let n = vectors[0].len();
    let mut accepted: Vec<Array1<Complex64>> = Vec::with_capacity(d);
    let mut threshold = 1e-6;
    while accepted.len() < d {
        let mut best: Option<(f64, Array1<Complex64>)> = None;
        for axis in 0..n {
            if accepted.len() == d {
                break;
            }
            // projection of e_axis onto span: Σ_q conj(q[axis]) q
            let mut w: Array1<Complex64> = Array1::zeros(n);
            for q in vectors {
                let c = q[axis].conj();
                if c.norm_sqr() > 0.0 {
                    w.zip_mut_with(q, |wi, qi| *wi += c * qi);
                }
            }
            mgs_pass(&mut w, &accepted);
            mgs_pass(&mut w, &accepted);
            let norm = norm2(&w.view());
            if norm >= threshold {
                accepted.push(w.mapv(|z| z / norm));
            } else if best
                .as_ref()
                .map(|(b, _)| norm > *b)
                .unwrap_or(norm > 1e-300)
            {
                best = Some((norm, w));
            }
        }
        if accepted.len() < d {
            // No axis cleared the threshold this sweep; take the best
            // candidate (progress is guaranteed: the span is d-dimensional).
            match best {
                Some((norm, w)) if norm > 1e-300 => accepted.push(w.mapv(|z| z / norm)),
                _ => threshold *= 1e-3,
            }
        }
    }
    accepted.iter_mut().for_each(fix_phase);
    accepted
}

/// Multiplies a unit vector by a global phase so that its pivot entry
/// (first entry within `1e-12` relative of the largest magnitude) is real
/// and positive.
fn fix_phase(v: &mut Array1<Complex64>) {
    let max_mag = v.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if max_mag < 1e-300 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= (1.0 - 1e-12) * max_mag)
        .expect("pivot entry exists");
    let phase = v[pivot].conj() / v[pivot].norm();
    v.mapv_inplace(|z| z * phase);
}

/// Principal angles (radians, ascending) between the spans of two
/// orthonormal bases, from the singular values of the cross-Gram matrix.
pub fn principal_angles(a: &[StateVector], b: &[StateVector]) -> Result<Vec<f64>> {
    use ndarray_linalg::SVD;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput {
            context: "principal angles between empty bases".into(),
        });
    }
    let dim = a[0].dim();
    if b[0].dim() != dim {
        return Err(Error::DimensionMismatch {
            operator_dim: dim,
            vector_dim: b[0].dim(),
        });
    }
    let mut cross = Array2::<Complex64>::zeros((a.len(), b.len()));
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cross[[i, j]] = x.overlap(y)?;
        }
    }
    let (_, sigma, _) = cross.svd(false, false)?;
    let mut angles: Vec<f64> = sigma.iter().map(|&s| s.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).expect("finite angles"));
    Ok(angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag_op(values: &[f64]) -> HermitianOperator {
        let n = values.len();
        let mut m = Array2::zeros((n, n));
        for (i, &v) in values.iter().enumerate() {
            m[[i, i]] = c(v, 0.0);
        }
        HermitianOperator::from_dense(m).unwrap()
    }

    #[test]
    fn apply_diagonal_eigenvector() {
        let h = diag_op(&[0.0, 1.0, 2.0]);
        let psi = StateVector::basis_state(3, 1);
        let out = h.apply(&psi).unwrap();
        assert_eq!(out.coords()[1], c(1.0, 0.0));
        assert_eq!(out.coords()[0], c(0.0, 0.0));
        assert_eq!(out.coords()[2], c(0.0, 0.0));
    }

    #[test]
    fn apply_zero_operator() {
        let h = HermitianOperator::from_dense(Array2::zeros((2, 2))).unwrap();
        let psi = StateVector::from_real(&[0.3, -0.9]);
        let out = h.apply(&psi).unwrap();
        assert_eq!(norm2(&out.coords().view()), 0.0);
    }

    #[test]
    fn apply_dimension_mismatch_names_both_dims() {
        let h = diag_op(&[1.0, 2.0]);
        let psi = StateVector::from_real(&[1.0, 0.0, 0.0]);
        match h.apply(&psi) {
            Err(Error::DimensionMismatch {
                operator_dim: 2,
                vector_dim: 3,
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn expectation_mixed_state() {
        let h = diag_op(&[0.0, 1.0]);
        let psi = StateVector::from_real(&[1.0, 1.0]).normalize().unwrap();
        assert!((h.expectation(&psi).unwrap() - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn expectation_shifted_basis_state() {
        // diag(0,1,2) with a rank-1 shift of 5 on e1: ⟨e1|H1|e1⟩ = 0 + 5
        let base = Arc::new(diag_op(&[0.0, 1.0, 2.0]));
        let term = ShiftTerm {
            strength: 5.0,
            basis: vec![StateVector::basis_state(3, 0).into_coords()],
        };
        let h1 = HermitianOperator::from_shifted(base, vec![term]).unwrap();
        let psi = StateVector::basis_state(3, 0);
        assert!((h1.expectation(&psi).unwrap() - 5.0).abs() <= 1e-14);
    }

    #[test]
    fn overlap_cases() {
        let e1 = StateVector::basis_state(2, 0);
        let e2 = StateVector::basis_state(2, 1);
        assert_eq!(e1.overlap(&e2).unwrap(), c(0.0, 0.0));
        let a = StateVector::new(array![c(1.0, 0.0), c(0.0, 1.0)])
            .normalize()
            .unwrap();
        assert!((a.overlap(&a).unwrap() - c(1.0, 0.0)).norm() <= 1e-15);
        let b = StateVector::basis_state(2, 0);
        let got = a.overlap(&b).unwrap();
        assert!((got - c(1.0 / 2f64.sqrt(), 0.0)).norm() <= 1e-15);
    }

    #[test]
    fn orthonormalize_hand_case() {
        let out = orthonormalize(&[
            StateVector::from_real(&[1.0, 0.0]),
            StateVector::from_real(&[1.0, 1.0]),
        ])
        .unwrap();
        assert!(out.dropped.is_empty());
        assert!((out.basis[0].coords()[0] - c(1.0, 0.0)).norm() <= 1e-15);
        assert!((out.basis[1].coords()[1] - c(1.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn orthonormalize_drops_duplicate() {
        let e1 = StateVector::basis_state(3, 0);
        let out = orthonormalize(&[e1.clone(), e1]).unwrap();
        assert_eq!(out.basis.len(), 1);
        assert_eq!(out.dropped, vec![1]);
    }

    #[test]
    fn orthonormalize_empty_and_rank_zero() {
        assert!(matches!(orthonormalize(&[]), Err(Error::EmptyInput { .. })));
        let zero = StateVector::from_real(&[0.0, 0.0]);
        assert!(matches!(
            orthonormalize(&[zero.clone(), zero]),
            Err(Error::RankZero { .. })
        ));
    }

    #[test]
    fn orthonormalize_seeded_gram_is_identity() {
        let mut rng = SplitMix64::new(11);
        let vs: Vec<StateVector> = (0..3)
            .map(|_| StateVector::new(rng.unit_vector(5)))
            .collect();
        let out = orthonormalize(&vs).unwrap();
        assert_eq!(out.basis.len(), 3);
        // independent Gram-matrix oracle
        for i in 0..3 {
            for j in 0..3 {
                let g: Complex64 = out.basis[i]
                    .coords()
                    .iter()
                    .zip(out.basis[j].coords().iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(target, 0.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn orthonormalize_is_deterministic() {
        let mut rng = SplitMix64::new(99);
        let vs: Vec<StateVector> = (0..4)
            .map(|_| StateVector::new(rng.unit_vector(6)))
            .collect();
        let a = orthonormalize(&vs).unwrap();
        let b = orthonormalize(&vs).unwrap();
        for (x, y) in a.basis.iter().zip(b.basis.iter()) {
            assert_eq!(x.coords(), y.coords());
        }
    }

    #[test]
    fn project_hand_case() {
        let p = Projector::new(vec![StateVector::basis_state(3, 0)]).unwrap();
        let psi = StateVector::from_real(&[0.6, 0.8, 0.0]);
        let out = p.project(&psi).unwrap();
        assert!((out.coords()[0] - c(0.6, 0.0)).norm() <= 1e-15);
        assert_eq!(out.coords()[1], c(0.0, 0.0));
    }

    #[test]
    fn project_rank_zero_gives_zero() {
        let p = Projector::empty(4);
        let psi = StateVector::from_real(&[1.0, 2.0, 3.0, 4.0]);
        let out = p.project(&psi).unwrap();
        assert_eq!(norm2(&out.coords().view()), 0.0);
    }

    #[test]
    fn project_matches_dense_oracle() {
        let mut rng = SplitMix64::new(5);
        let raw: Vec<StateVector> = (0..2)
            .map(|_| StateVector::new(rng.unit_vector(6)))
            .collect();
        let basis = orthonormalize(&raw).unwrap().basis;
        let p = Projector::new(basis.clone()).unwrap();
        let psi = StateVector::new(rng.unit_vector(6));
        // dense projector matrix oracle
        let mut pm = Array2::<Complex64>::zeros((6, 6));
        for b in &basis {
            for i in 0..6 {
                for j in 0..6 {
                    pm[[i, j]] += b.coords()[i] * b.coords()[j].conj();
                }
            }
        }
        let oracle = pm.dot(psi.coords());
        let got = p.project(&psi).unwrap();
        for i in 0..6 {
            assert!((got.coords()[i] - oracle[i]).norm() <= 1e-12);
        }
    }

    #[test]
    fn non_hermitian_dense_rejected() {
        let m = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(2.0, 0.0), c(0.0, 0.0)]];
        assert!(matches!(
            HermitianOperator::from_dense(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn callback_operator_probes_hermiticity() {
        // symmetric tridiagonal action, matrix-free
        let ok = HermitianOperator::from_apply(
            5,
            Arc::new(|v: ArrayView1<'_, Complex64>| {
                let n = v.len();
                Array1::from_shape_fn(n, |i| {
                    let mut s = c(2.0, 0.0) * v[i];
                    if i > 0 {
                        s -= v[i - 1];
                    }
                    if i + 1 < n {
                        s -= v[i + 1];
                    }
                    s
                })
            }),
        );
        assert!(ok.is_ok());

        // shift action (non-Hermitian) must be rejected
        let bad = HermitianOperator::from_apply(
            5,
            Arc::new(|v: ArrayView1<'_, Complex64>| {
                let n = v.len();
                Array1::from_shape_fn(n, |i| if i + 1 < n { v[i + 1] } else { c(0.0, 0.0) })
            }),
        );
        assert!(matches!(bad, Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn gershgorin_of_diagonal_is_entry_range() {
        let h = diag_op(&[0.0, 1.0, 2.0]);
        assert_eq!(h.gershgorin_interval(), Some((0.0, 2.0)));
        let (scale, src) = h.spectral_scale();
        assert_eq!(scale, 2.0);
        assert_eq!(src, BoundSource::Gershgorin);
    }

    #[test]
    fn canonical_basis_is_span_invariant() {
        let mut rng = SplitMix64::new(17);
        let raw: Vec<StateVector> = (0..2)
            .map(|_| StateVector::new(rng.unit_vector(5)))
            .collect();
        let basis = orthonormalize(&raw).unwrap().basis;
        let v0: Vec<Array1<Complex64>> = basis.iter().map(|v| v.coords().clone()).collect();
        // rotate the pair inside the span, then re-canonicalize
        let theta = 0.7f64;
        let rotated = vec![
            v0[0].mapv(|z| z * theta.cos()) + v0[1].mapv(|z| z * theta.sin()),
            v0[0].mapv(|z| z * -theta.sin()) + v0[1].mapv(|z| z * theta.cos()),
        ];
        let a = canonical_basis(&v0);
        let b = canonical_basis(&rotated);
        for (x, y) in a.iter().zip(b.iter()) {
            for i in 0..5 {
                assert!((x[i] - y[i]).norm() <= 1e-10, "canonical bases differ");
            }
        }
    }

    #[test]
    fn principal_angles_identical_and_orthogonal() {
        let e1 = StateVector::basis_state(3, 0);
        let e2 = StateVector::basis_state(3, 1);
        let same = principal_angles(std::slice::from_ref(&e1), std::slice::from_ref(&e1)).unwrap();
        assert!(same[0] <= 1e-8);
        let orth = principal_angles(&[e1], &[e2]).unwrap();
        assert!((orth[0] - std::f64::consts::FRAC_PI_2).abs() <= 1e-12);
    }

    #[test]
    fn state_vector_serializes_as_re_im_pairs() {
        let v = StateVector::new(array![c(1.0, -2.0), c(0.5, 0.0)]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, "[[1.0,-2.0],[0.5,0.0]]");
    }
}
