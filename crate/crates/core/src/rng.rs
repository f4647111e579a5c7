//! Deterministic, portable random number generation.
//!
//! Every random quantity in the crate (model entries, solver starting
//! vectors, probe vectors) flows through [`SplitMix64`] so that results are
//! bit-reproducible across platforms and across independent
//! re-implementations. The generator and the sampling recipes are fixed:
//!
//! * `SplitMix64`: `state += 0x9E3779B97F4A7C15`; mix with
//!   `z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//!   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31)`.
//! * Uniform in `[0, 1)`: `(x >> 11) as f64 * 2^-53`.
//! * Standard normal pairs: Box-Muller on `u1 = ((x >> 11) + 1) * 2^-53`
//!   (open at zero) and `u2` uniform:
//!   `r = sqrt(-2 ln u1)`, `(r cos(2π u2), r sin(2π u2))`.
//! * Complex standard normal: independent normal real and imaginary parts.

use ndarray::Array1;
use num_complex::Complex64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_POW_NEG53: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 stream seeded with a 64-bit value.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`, 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG53
    }

    /// Pair of independent standard normals (Box-Muller).
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG53;
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    pub fn next_normal(&mut self) -> f64 {
        self.next_normal_pair().0
    }

    /// Complex value with independent standard normal parts.
    pub fn next_complex_normal(&mut self) -> Complex64 {
        let (re, im) = self.next_normal_pair();
        Complex64::new(re, im)
    }

    /// Complex value with both parts uniform in `[-1, 1)`.
    pub fn next_complex_uniform(&mut self) -> Complex64 {
        let re = 2.0 * self.next_f64() - 1.0;
        let im = 2.0 * self.next_f64() - 1.0;
        Complex64::new(re, im)
    }

    /// Unit vector with uniform complex entries, then normalized.
    pub fn unit_vector(&mut self, dim: usize) -> Array1<Complex64> {
        loop {
            let v = Array1::from_shape_fn(dim, |_| self.next_complex_uniform());
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.mapv(|z| z / norm);
            }
        }
    }
}
