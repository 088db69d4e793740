//! Counter-based random number streams.
//!
//! Every path owns one ChaCha stream addressed by `(seed, path_index)`, so a
//! batch of paths produces bitwise identical numbers no matter how the batch
//! is split across workers. Normals come from Box-Muller on fixed-count
//! uniform draws, keeping per-step consumption deterministic.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stable 64-bit FNV-1a over byte slices; used to derive sub-seeds from
/// `(seed, label)` pairs independently of platform hashing.
pub fn stable_hash64(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        // separator so ("ab","c") != ("a","bc")
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Sub-seed for a named module, derived from the experiment seed.
pub fn module_seed(seed: u64, module: &str) -> u64 {
    stable_hash64(&[&seed.to_le_bytes(), module.as_bytes()])
}

/// Per-path random stream.
pub struct PathRng {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl PathRng {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        PathRng {
            rng,
            spare_normal: None,
        }
    }

    /// Uniform in (0, 1].
    #[inline]
    pub fn uniform_oc(&mut self) -> f64 {
        let x = self.rng.next_u64() >> 11; // 53 bits
        1.0 - (x as f64) * (1.0 / 9007199254740992.0)
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform_co(&mut self) -> f64 {
        let x = self.rng.next_u64() >> 11;
        (x as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal via Box-Muller (fixed two-uniform consumption per pair).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_oc();
        let u2 = self.uniform_co();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(r * s);
        r * c
    }

    /// Fill a buffer with standard normals.
    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }
}
