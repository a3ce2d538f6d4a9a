//! Keyed random streams for reproducible Monte Carlo.
//!
//! Every trial draws from its own ChaCha8 stream whose 256-bit key is derived
//! from `(master seed, point index, trial index)`, so a trial's message,
//! fading and noise do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub point: u64,
    pub trial: u64,
}

impl StreamKey {
    pub fn new(seed: u64, point: u64, trial: u64) -> Self {
        Self { seed, point, trial }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        let words = [
            splitmix64(&mut state),
            splitmix64(&mut state) ^ self.point.wrapping_mul(0xD6E8_FEB8_6659_FD93),
            splitmix64(&mut state) ^ self.trial.wrapping_mul(0xA076_1D64_78BD_642F),
            {
                state ^= self.point.rotate_left(32) ^ self.trial;
                splitmix64(&mut state)
            },
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Stream for trial `trial` at sweep point `point`.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    StreamKey::new(seed, point, trial).rng()
}
