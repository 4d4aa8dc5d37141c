//! Seeded randomness primitives.
//!
//! Every random quantity in this crate flows from a single 64-bit seed
//! through the transforms below, so results are reproducible bit-for-bit
//! across runs, thread counts, and platforms. The exact recipes:
//!
//! * Generator: ChaCha8 keyed by `seed_from_u64`; independent subsystems get
//!   independent seeds via [`derive_seed`], independent chains of one
//!   subsystem get independent ChaCha streams via `set_stream`.
//! * Uniform in `[0, 1)`: top 53 bits of one `u64` draw, `(x >> 11) * 2^-53`.
//! * Uniform in `(0, 1]`: `((x >> 11) + 1) * 2^-53`.
//! * Uniform integer below `m`: rejection sampling on one `u64` draw.
//! * Standard normal: Box-Muller on one `(0,1]` and one `[0,1)` uniform,
//!   `z0 = sqrt(-2 ln u1) cos(2 pi u2)`, `z1 = sqrt(-2 ln u1) sin(2 pi u2)`,
//!   emitted in the order `z0, z1` ([`NormalSource`] carries the spare).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_NEG53: f64 = 1.0 / 9007199254740992.0;

/// Derive a subsystem seed from a root seed and a label, splitmix64-style.
///
/// The label is folded in with FNV-1a so that distinct subsystems draw from
/// unrelated streams; `index` separates repeats of the same subsystem.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut z = root
        .wrapping_add(h)
        .wrapping_add(index.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// ChaCha8 generator for one seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// ChaCha8 generator for one (seed, stream) pair; streams never overlap.
pub fn rng_for_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in `[0, 1)`.
pub fn next_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * TWO_POW_NEG53
}

/// Uniform draw in `(0, 1]`; safe as a logarithm argument.
pub fn next_f64_open_zero<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG53
}

/// Uniform integer in `[0, m)` by rejection; unbiased for every `m > 0`.
pub fn uniform_below<R: RngCore>(rng: &mut R, m: u64) -> u64 {
    debug_assert!(m > 0);
    let zone = (u64::MAX / m) * m;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % m;
        }
    }
}

/// Choose `k` distinct indices from `[0, pool.len())` by partial
/// Fisher-Yates; the chosen items end up in `pool[..k]`.
pub fn partial_shuffle<R: RngCore, T>(rng: &mut R, pool: &mut [T], k: usize) {
    debug_assert!(k <= pool.len());
    for i in 0..k {
        let j = i + uniform_below(rng, (pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
}

/// Standard-normal stream via Box-Muller with the spare value carried.
pub struct NormalSource<R: RngCore> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> NormalSource<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = next_f64_open_zero(&mut self.rng);
        let u2 = next_f64(&mut self.rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform `[0, 1)` from the same underlying stream. Does not consume or
    /// disturb a pending Box-Muller spare.
    pub fn next_uniform(&mut self) -> f64 {
        next_f64(&mut self.rng)
    }
}
