//! Counter-based random streams and a deterministic replication runner.
//!
//! Replica `i` of a run always draws from `stream(master_seed, salt, i)`, a
//! ChaCha8 generator keyed by the seed and positioned on stream `i`. Results are
//! collected in replica order, so the output does not depend on how many
//! worker threads executed the replicas.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{config_err, Result};

pub type StreamRng = ChaCha8Rng;

/// Salts separating the independent purposes inside one run.
pub mod salt {
    pub const MAIN: u64 = 0;
    pub const PILOT: u64 = 1;
    pub const MAXSTABLE: u64 = 2;
    pub const ORACLE: u64 = 3;
    pub const SHIFT: u64 = 4;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// The generator for replica `replica` of the sub-run identified by `salt`.
pub fn stream(master_seed: u64, salt: u64, replica: u64) -> StreamRng {
    let key = splitmix64(master_seed ^ splitmix64(salt.wrapping_add(0x5851_f42d_4c95_7f2d)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Replicator {
    pub seed: u64,
    pub salt: u64,
    pub workers: usize,
}

impl Replicator {
    pub fn new(seed: u64) -> Self {
        Self { seed, salt: salt::MAIN, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_salt(mut self, salt: u64) -> Self {
        self.salt = salt;
        self
    }

    /// An independent runner for sub-task `index`, e.g. one quadrature node.
    pub fn child(&self, index: u64) -> Self {
        Self { seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x2545_f491_4f6c_dd1d))), ..*self }
    }

    /// Runs `f` once per replica and returns the outputs in replica order.
    pub fn run<T, F>(&self, reps: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &mut StreamRng) -> Result<T> + Sync,
    {
        let one = |i: usize| {
            let mut rng = stream(self.seed, self.salt, i as u64);
            f(i as u64, &mut rng)
        };
        if self.workers <= 1 || reps < 2 {
            return (0..reps).map(one).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| config_err(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..reps).into_par_iter().map(one).collect())
    }
}
