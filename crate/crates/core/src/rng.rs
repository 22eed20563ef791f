//! Seeded, splittable random streams.
//!
//! Every parallel work item draws from its own ChaCha stream keyed by
//! `(seed, index)`, so results do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Map `f` over `0..count` with one stream per index; output order is fixed.
pub fn map_streams<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count)
            .into_par_iter()
            .map(|i| f(i, &mut stream(seed, i as u64)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(|i| f(i, &mut stream(seed, i as u64))).collect()
    }
}
