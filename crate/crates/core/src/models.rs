//! Deterministic desk-scale test Hamiltonians: seeded random Hermitian
//! matrices, spinless tight-binding chains, Heisenberg spin-1/2 chains, and
//! Hubbard chains, plus the site-occupation observables the density search
//! consumes.
//!
//! Fermionic conventions, fixed so independent implementations agree on
//! matrix entries and not just spectra:
//! - a configuration is a bitmask with mode `m` at bit `m`; the basis is
//!   ordered by ascending mask value;
//! - a basis state is built by applying creation operators in ascending
//!   mode order to the vacuum, giving Jordan-Wigner phases
//!   `(−1)^(occupied modes below)` for each creation/annihilation;
//! - Hubbard modes interleave spin: mode `2·site` is spin-up, `2·site+1`
//!   is spin-down.
//!
//! Heisenberg chains use the z-basis with bit `i` set meaning site `i` is
//! spin-up, and site occupation defined as `n_i = S^z_i + 1/2`.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engines::DENSE_LIMIT;
use crate::error::{Error, Result};
use crate::operator::HermitianOperator;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Random,
    TightBinding,
    Heisenberg,
    Hubbard,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Declarative description of a test operator. Identical specs build
/// identical operators, seeded randomness included.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub sites: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub boundary: Boundary,
    /// Number of fermions; defaults to 1 for tight-binding and to `sites`
    /// (half filling) for Hubbard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particle_number: Option<usize>,
    /// Per-site potential applied through the occupation operators;
    /// defaults to zeros.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_potential: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, sites: usize) -> Self {
        ModelSpec {
            kind,
            sites,
            params: BTreeMap::new(),
            boundary: Boundary::Open,
            particle_number: None,
            external_potential: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_particles(mut self, n: usize) -> Self {
        self.particle_number = Some(n);
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_potential(mut self, v: Vec<f64>) -> Self {
        self.external_potential = Some(v);
        self
    }

    /// Parameters with keys normalized to lowercase, validated against the
    /// keys this kind accepts.
    fn normalized_params(&self) -> Result<BTreeMap<String, f64>> {
        let allowed: &[&str] = match self.kind {
            ModelKind::Random => &["seed"],
            ModelKind::TightBinding => &["t"],
            ModelKind::Heisenberg => &["j"],
            ModelKind::Hubbard => &["t", "u", "sz"],
        };
        let mut out = BTreeMap::new();
        for (key, &value) in &self.params {
            let norm = key.to_lowercase();
            if !allowed.contains(&norm.as_str()) {
                return Err(Error::InvalidModel {
                    field: format!("params.{key}"),
                    detail: format!(
                        "unknown parameter for {:?} (accepts {allowed:?})",
                        self.kind
                    ),
                });
            }
            if out.insert(norm.clone(), value).is_some() {
                return Err(Error::InvalidModel {
                    field: format!("params.{key}"),
                    detail: format!("parameter `{norm}` given more than once"),
                });
            }
        }
        Ok(out)
    }

    fn require(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
        params.get(key).copied().ok_or_else(|| Error::InvalidModel {
            field: format!("params.{key}"),
            detail: "required parameter missing".into(),
        })
    }

    pub(crate) fn potential(&self) -> Result<Vec<f64>> {
        match &self.external_potential {
            None => Ok(vec![0.0; self.sites]),
            Some(v) if v.len() == self.sites => Ok(v.clone()),
            Some(v) => Err(Error::InvalidModel {
                field: "external_potential".into(),
                detail: format!("length {} does not match sites {}", v.len(), self.sites),
            }),
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::InvalidModel {
                field: "sites".into(),
                detail: "must be at least 1".into(),
            });
        }
        let site_structured = !matches!(self.kind, ModelKind::Random);
        if !site_structured {
            if self.particle_number.is_some() {
                return Err(Error::InvalidModel {
                    field: "particle_number".into(),
                    detail: "random matrices have no particle structure".into(),
                });
            }
            if self.external_potential.is_some() {
                return Err(Error::InvalidModel {
                    field: "external_potential".into(),
                    detail: "random matrices have no site structure".into(),
                });
            }
            if self.boundary == Boundary::Periodic {
                return Err(Error::InvalidModel {
                    field: "boundary".into(),
                    detail: "random matrices have no lattice geometry".into(),
                });
            }
        }
        if self.kind == ModelKind::Heisenberg && self.particle_number.is_some() {
            return Err(Error::InvalidModel {
                field: "particle_number".into(),
                detail: "Heisenberg chains are spin models without particle number".into(),
            });
        }
        Ok(())
    }

    /// Number of fermions after defaults are applied.
    pub fn particles(&self) -> usize {
        match self.kind {
            ModelKind::TightBinding => self.particle_number.unwrap_or(1),
            ModelKind::Hubbard => self.particle_number.unwrap_or(self.sites),
            _ => 0,
        }
    }

    /// Hilbert-space dimension the spec implies.
    pub fn dimension(&self) -> Result<usize> {
        self.validate_common()?;
        let dim = match self.kind {
            ModelKind::Random => self.sites,
            ModelKind::TightBinding => {
                let n = self.particles();
                if n > self.sites {
                    return Err(Error::InvalidModel {
                        field: "particle_number".into(),
                        detail: format!("{n} spinless fermions exceed {} sites", self.sites),
                    });
                }
                binomial(self.sites, n)
            }
            ModelKind::Heisenberg => {
                if self.sites >= usize::BITS as usize {
                    return Err(Error::DimensionOverflow {
                        dim: usize::MAX,
                        limit: DENSE_LIMIT,
                    });
                }
                1usize << self.sites
            }
            ModelKind::Hubbard => {
                let n = self.particles();
                let modes = 2 * self.sites;
                if n > modes {
                    return Err(Error::InvalidModel {
                        field: "particle_number".into(),
                        detail: format!("{n} electrons exceed {modes} spin-orbitals"),
                    });
                }
                match self.normalized_params()?.get("sz") {
                    Some(&sz) => sector_masks_hubbard(self.sites, n, Some(sz))?.len(),
                    None => binomial(modes, n),
                }
            }
        };
        if dim == 0 {
            return Err(Error::InvalidModel {
                field: "particle_number".into(),
                detail: "requested sector is empty".into(),
            });
        }
        if dim > DENSE_LIMIT {
            return Err(Error::DimensionOverflow {
                dim,
                limit: DENSE_LIMIT,
            });
        }
        Ok(dim)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(usize::MAX as u128) as usize
}

/// All bitmasks over `modes` bits with exactly `n` bits set, ascending.
fn fixed_particle_masks(modes: usize, n: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << modes) {
        if mask.count_ones() as usize == n {
            out.push(mask);
        }
    }
    out
}

/// Hubbard sector masks, optionally restricted to a total `S_z` value
/// (in units of ħ, so `sz` must be half-integral).
fn sector_masks_hubbard(sites: usize, n: usize, sz: Option<f64>) -> Result<Vec<u64>> {
    let modes = 2 * sites;
    let masks = fixed_particle_masks(modes, n);
    match sz {
        None => Ok(masks),
        Some(target) => {
            let doubled = 2.0 * target;
            let rounded = doubled.round();
            if (doubled - rounded).abs() > 1e-9 {
                return Err(Error::InvalidModel {
                    field: "params.sz".into(),
                    detail: format!("{target} is not half-integral"),
                });
            }
            let want = rounded as i64;
            Ok(masks
                .into_iter()
                .filter(|&m| {
                    let up = (0..sites).filter(|&i| m & (1 << (2 * i)) != 0).count() as i64;
                    let down = (0..sites).filter(|&i| m & (1 << (2 * i + 1)) != 0).count() as i64;
                    up - down == want
                })
                .collect())
        }
    }
}

fn mask_index(masks: &[u64], mask: u64) -> usize {
    masks.binary_search(&mask).expect("mask in sector")
}

fn parity_below(mask: u64, idx: usize) -> f64 {
    let below = mask & ((1u64 << idx) - 1);
    if below.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `c†_to c_from |mask⟩` with Jordan-Wigner phases; `None` when annihilated.
fn hop(mask: u64, from: usize, to: usize) -> Option<(u64, f64)> {
    if mask & (1 << from) == 0 || mask & (1 << to) != 0 {
        return None;
    }
    let sign_from = parity_below(mask, from);
    let without = mask & !(1 << from);
    let sign_to = parity_below(without, to);
    Some((without | (1 << to), sign_from * sign_to))
}

/// Builds the operator a spec describes.
pub fn build(spec: &ModelSpec) -> Result<HermitianOperator> {
    let dim = spec.dimension()?;
    let params = spec.normalized_params()?;
    match spec.kind {
        ModelKind::Random => {
            let seed = ModelSpec::require(&params, "seed")?;
            if seed < 0.0 || seed.fract() != 0.0 || seed > (1u64 << 53) as f64 {
                return Err(Error::InvalidModel {
                    field: "params.seed".into(),
                    detail: format!("{seed} is not a nonnegative integer below 2^53"),
                });
            }
            random_hermitian(dim, seed as u64)
        }
        ModelKind::TightBinding => build_tight_binding(spec, &params, dim),
        ModelKind::Heisenberg => build_heisenberg(spec, &params, dim),
        ModelKind::Hubbard => build_hubbard(spec, &params, dim),
    }
}

/// Nearest-neighbor bonds of the chain; the periodic wrap bond only exists
/// for more than two sites (for two it would duplicate the single bond).
fn chain_bonds(sites: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut bonds: Vec<(usize, usize)> = (0..sites.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && sites > 2 {
        bonds.push((sites - 1, 0));
    }
    bonds
}

fn build_tight_binding(
    spec: &ModelSpec,
    params: &BTreeMap<String, f64>,
    dim: usize,
) -> Result<HermitianOperator> {
    let t = ModelSpec::require(params, "t")?;
    let v = spec.potential()?;
    let masks = fixed_particle_masks(spec.sites, spec.particles());
    debug_assert_eq!(masks.len(), dim);
    let bonds = chain_bonds(spec.sites, spec.boundary);
    let mut m = Array2::<Complex64>::zeros((dim, dim));
    for (col, &mask) in masks.iter().enumerate() {
        let diag: f64 = (0..spec.sites)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| v[i])
            .sum();
        m[[col, col]] += Complex64::new(diag, 0.0);
        for &(a, b) in &bonds {
            for (from, to) in [(a, b), (b, a)] {
                if let Some((new_mask, sign)) = hop(mask, from, to) {
                    let row = mask_index(&masks, new_mask);
                    m[[row, col]] += Complex64::new(-t * sign, 0.0);
                }
            }
        }
    }
    HermitianOperator::from_dense(m)
}

fn build_heisenberg(
    spec: &ModelSpec,
    params: &BTreeMap<String, f64>,
    dim: usize,
) -> Result<HermitianOperator> {
    let j = ModelSpec::require(params, "j")?;
    let v = spec.potential()?;
    let bonds = chain_bonds(spec.sites, spec.boundary);
    let mut m = Array2::<Complex64>::zeros((dim, dim));
    for mask in 0..dim as u64 {
        let col = mask as usize;
        let mut diag = 0.0;
        for &(a, b) in &bonds {
            let za = if mask & (1 << a) != 0 { 0.5 } else { -0.5 };
            let zb = if mask & (1 << b) != 0 { 0.5 } else { -0.5 };
            diag += j * za * zb;
            // S⁺_a S⁻_b + S⁻_a S⁺_b flips anti-aligned pairs
            if (mask & (1 << a) != 0) != (mask & (1 << b) != 0) {
                let flipped = mask ^ (1 << a) ^ (1 << b);
                m[[flipped as usize, col]] += Complex64::new(0.5 * j, 0.0);
            }
        }
        for (i, &vi) in v.iter().enumerate() {
            if mask & (1 << i) != 0 {
                diag += vi;
            }
        }
        m[[col, col]] += Complex64::new(diag, 0.0);
    }
    HermitianOperator::from_dense(m)
}

fn build_hubbard(
    spec: &ModelSpec,
    params: &BTreeMap<String, f64>,
    dim: usize,
) -> Result<HermitianOperator> {
    let t = ModelSpec::require(params, "t")?;
    let u = ModelSpec::require(params, "u")?;
    let v = spec.potential()?;
    let masks = sector_masks_hubbard(spec.sites, spec.particles(), params.get("sz").copied())?;
    debug_assert_eq!(masks.len(), dim);
    let bonds = chain_bonds(spec.sites, spec.boundary);
    let mut m = Array2::<Complex64>::zeros((dim, dim));
    for (col, &mask) in masks.iter().enumerate() {
        let mut diag = 0.0;
        for (site, &v_site) in v.iter().enumerate().take(spec.sites) {
            let up = mask & (1 << (2 * site)) != 0;
            let down = mask & (1 << (2 * site + 1)) != 0;
            if up && down {
                diag += u;
            }
            diag += v_site * ((up as usize + down as usize) as f64);
        }
        m[[col, col]] += Complex64::new(diag, 0.0);
        for &(a, b) in &bonds {
            for sigma in 0..2 {
                let (ma, mb) = (2 * a + sigma, 2 * b + sigma);
                for (from, to) in [(ma, mb), (mb, ma)] {
                    if let Some((new_mask, sign)) = hop(mask, from, to) {
                        let row = mask_index(&masks, new_mask);
                        m[[row, col]] += Complex64::new(-t * sign, 0.0);
                    }
                }
            }
        }
    }
    HermitianOperator::from_dense(m)
}

/// `(A + A†)/2` with `A` filled row-major from the seeded complex standard
/// normal stream; bit-reproducible per `(dim, seed)`.
pub fn random_hermitian(dim: usize, seed: u64) -> Result<HermitianOperator> {
    if dim == 0 {
        return Err(Error::InvalidModel {
            field: "dim".into(),
            detail: "must be at least 1".into(),
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut a = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            a[[i, j]] = rng.next_complex_normal();
        }
    }
    let sym = Array2::from_shape_fn((dim, dim), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]].conj()));
    HermitianOperator::from_dense(sym)
}

/// Per-site occupation values along the diagonal of the model's basis:
/// `n_i` for fermions, `S^z_i + 1/2` for spins.
pub(crate) fn occupation_diagonals(spec: &ModelSpec) -> Result<Vec<Vec<f64>>> {
    let dim = spec.dimension()?;
    let params = spec.normalized_params()?;
    let per_site: Vec<Vec<f64>> = match spec.kind {
        ModelKind::Random => {
            return Err(Error::Unsupported {
                operation: "number_operators".into(),
                detail: "random matrices have no site structure".into(),
            })
        }
        ModelKind::TightBinding => {
            let masks = fixed_particle_masks(spec.sites, spec.particles());
            (0..spec.sites)
                .map(|i| masks.iter().map(|&m| ((m >> i) & 1) as f64).collect())
                .collect()
        }
        ModelKind::Heisenberg => (0..spec.sites)
            .map(|i| (0..dim as u64).map(|m| ((m >> i) & 1) as f64).collect())
            .collect(),
        ModelKind::Hubbard => {
            let masks =
                sector_masks_hubbard(spec.sites, spec.particles(), params.get("sz").copied())?;
            (0..spec.sites)
                .map(|i| {
                    masks
                        .iter()
                        .map(|&m| (((m >> (2 * i)) & 1) + ((m >> (2 * i + 1)) & 1)) as f64)
                        .collect()
                })
                .collect()
        }
    };
    Ok(per_site)
}

/// One diagonal occupation operator per site, in the model's own basis. On
/// a fixed-particle-number sector they sum to `N·Identity`.
pub fn number_operators(spec: &ModelSpec) -> Result<Vec<HermitianOperator>> {
    let diagonals = occupation_diagonals(spec)?;
    diagonals
        .into_iter()
        .map(|d| {
            let dim = d.len();
            let mut m = Array2::<Complex64>::zeros((dim, dim));
            for (i, x) in d.into_iter().enumerate() {
                m[[i, i]] = Complex64::new(x, 0.0);
            }
            HermitianOperator::from_dense(m)
        })
        .collect()
}
