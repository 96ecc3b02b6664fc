//! Fixed-size replication blocks evaluated on a pool of `shards` workers.
//!
//! Block boundaries never depend on the shard count and results come back in
//! block order, so any in-order fold is shard-invariant.

use crate::error::Result;

/// Replications per block.
pub const BLOCK: u64 = 256;

/// Index ranges [start, end) covering 0..n in blocks of [`BLOCK`].
pub fn blocks(n: u64) -> Vec<(u64, u64)> {
    (0..n.div_ceil(BLOCK)).map(|i| (i * BLOCK, ((i + 1) * BLOCK).min(n))).collect()
}

/// Evaluate `f` on every block; results are in block order.
pub fn map_blocks<T, F>(n: u64, shards: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync + Send,
{
    let bl = blocks(n);
    #[cfg(feature = "parallel")]
    if shards > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(shards)
            .build()
            .map_err(|e| crate::RuinError::InvalidParameter(format!("thread pool: {e}")))?;
        return pool.install(|| bl.par_iter().map(|&(a, b)| f(a, b)).collect());
    }
    let _ = shards;
    bl.iter().map(|&(a, b)| f(a, b)).collect()
}
