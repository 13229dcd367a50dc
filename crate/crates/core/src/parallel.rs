use rayon::prelude::*;

use crate::error::{Error, Result};

/// Fixed-size worker pool for replication-parallel loops.
///
/// Every replication derives its own random stream from its index, so the
/// output of [`Workers::map_indexed`] does not depend on the pool size.
#[derive(Debug)]
pub struct Workers {
    pool: rayon::ThreadPool,
    count: usize,
}

impl Workers {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        Ok(Self { pool, count })
    }

    pub fn single() -> Self {
        Self::new(1).expect("one worker")
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Evaluate `f(i)` for `i in 0..n`, keeping index order. On failure the
    /// error of the lowest failing index is returned.
    pub fn map_indexed<T, F>(&self, n: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        const CHUNK: u64 = 1 << 16;
        let mut out = Vec::with_capacity(n as usize);
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let chunk: Vec<Result<T>> = self
                .pool
                .install(|| (start..end).into_par_iter().map(&f).collect());
            for r in chunk {
                out.push(r?);
            }
            start = end;
        }
        Ok(out)
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::single()
    }
}
