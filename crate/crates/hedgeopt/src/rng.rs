//! Counter-based Gaussian noise for reproducible parallel simulation.
//!
//! Every Brownian increment is addressed by `(master seed, path id, step)`:
//! the master seed keys a ChaCha stream cipher, the path id selects the
//! stream, and the step index selects the word position inside the stream.
//! Two fixed 64-bit words per step feed a Box–Muller transform, so draws
//! never depend on how paths are scheduled across workers — the same triple
//! always yields the same normal pair, bit for bit.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Words consumed per step: two u64 draws = four u32 ChaCha words.
const WORDS_PER_STEP: u128 = 4;

/// Gaussian noise source for one simulated path.
pub struct PathNoise {
    rng: ChaCha8Rng,
}

impl PathNoise {
    pub fn new(seed: u64, path_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_id);
        PathNoise { rng }
    }

    /// Standard normal pair for `step`, independent across steps and paths.
    pub fn normal_pair(&mut self, step: u64) -> (f64, f64) {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        // 53-bit uniforms; the +0.5 offset keeps u1 strictly inside (0, 1).
        let u1 = ((a >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0);
        let u2 = ((b >> 11) as f64) * (1.0 / 9007199254740992.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }
}
