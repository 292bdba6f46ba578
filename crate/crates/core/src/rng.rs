//! Deterministic per-path random streams.
//!
//! Every path owns a ChaCha8 stream keyed by the run seed, with the path
//! index as the stream id, so path `i` sees the same numbers no matter how
//! paths are scheduled across threads. Uniforms take the top 53 bits of a
//! `u64` and shift to the cell midpoint (never exactly 0 or 1); normals use
//! the inverse CDF `Φ⁻¹(u) = −√2·erfc⁻¹(2u)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

#[derive(Debug, Clone)]
pub struct PathRng {
    inner: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(path);
        PathRng { inner }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u = self.uniform();
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }

    /// Index drawn from `weights` (assumed to sum to 1) by inversion.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}
