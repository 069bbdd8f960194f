//! Reproducible random streams for parallel Monte Carlo.
//!
//! A [`SeedTree`] is a 256-bit key derived from the master seed and a path
//! of indices (experiment id, grid indices, ...). Each trial then gets its
//! own ChaCha8 stream: the key selects the generator, the trial index is the
//! ChaCha stream id. Nothing depends on which worker runs which trial, so
//! results are bit-identical for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Per-worker random stream. Not meant to be shared between threads.
pub type RandomStream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: [u64; 4],
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        let mut key = [0u64; 4];
        let mut s = master_seed;
        for (i, k) in key.iter_mut().enumerate() {
            s = splitmix64(s ^ (i as u64).wrapping_mul(GOLDEN));
            *k = s;
        }
        Self { key }
    }

    /// Key for the sub-path `index` below this node.
    pub fn child(&self, index: u64) -> Self {
        let mut h = splitmix64(index ^ 0xD1B5_4A32_D192_ED03);
        for &k in &self.key {
            h = splitmix64(h ^ k);
        }
        let mut key = [0u64; 4];
        for (i, k) in key.iter_mut().enumerate() {
            h = splitmix64(h ^ self.key[i]);
            *k = h;
        }
        Self { key }
    }

    pub fn path(&self, indices: &[u64]) -> Self {
        indices.iter().fold(*self, |node, &i| node.child(i))
    }

    /// The random stream for trial `trial` under this key.
    pub fn stream(&self, trial: u64) -> RandomStream {
        let mut seed = [0u8; 32];
        for (chunk, k) in seed.chunks_exact_mut(8).zip(&self.key) {
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(trial);
        rng
    }
}

/// Runs `trials` independent trials in parallel, trial `t` drawing from
/// `seeds.stream(t)`. Results come back in trial order. A failing trial
/// aborts the run and is reported with its index.
pub fn run_trials<T, F>(seeds: &SeedTree, trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut RandomStream) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds.stream(t);
            f(t, &mut rng).map_err(|e| Error::TrialFailed {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect()
}
