//! Replicate fan-out.
//!
//! Work items are indexed; results always come back in index order so any
//! fold over them is independent of the thread count. Without the `parallel`
//! feature, [`Execution::Parallel`] runs on the calling thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator behind every stochastic routine: ChaCha8, a counter-based
/// stream cipher. Replicate `r` of a run seeded with `base` uses the stream
/// seeded with `base + r` (wrapping).
pub type SimRng = ChaCha8Rng;

pub fn replicate_rng(base: u64, replicate: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(base.wrapping_add(replicate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `0..count`, returning results ordered by index.
    pub fn map_indexed<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..count).map(f).collect(),
            Execution::Parallel => par_map(count, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn parallel_and_sequential_agree() {
        let work = |i: usize| replicate_rng(9, i as u64).random::<u64>();
        assert_eq!(
            Execution::Sequential.map_indexed(257, work),
            Execution::Parallel.map_indexed(257, work)
        );
    }
}
