//! Worker pools with an order-preserving map.
//!
//! Results always come back in index order, so any reduction done afterwards
//! is independent of how many workers produced them.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

#[derive(Clone, Default)]
pub struct Executor {
    pool: Option<Arc<ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers())
            .finish()
    }
}

impl Executor {
    /// Runs everything on the calling thread.
    pub fn sequential() -> Self {
        Self { pool: None }
    }

    /// `workers == 0` selects rayon's default thread count; `1` is sequential.
    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        Ok(Self {
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// `(0..len).map(f)` collected in index order.
    pub fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..len).map(f).collect(),
            Some(pool) => pool.install(|| (0..len).into_par_iter().map(f).collect()),
        }
    }
}
