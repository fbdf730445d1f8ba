//! In-rank data-parallel loops.
//!
//! Each rank-worker owns one [`Executor`]. Its width plays the role of the
//! threads per MPI task in a hybrid run. Site loops write disjoint outputs, so
//! their results do not depend on the width. Reductions are split into fixed
//! chunks whose partial sums are combined in chunk order, which keeps them
//! bitwise identical for every width.

use std::ops::{Add, Range};
#[cfg(feature = "parallel")]
use std::sync::Arc;

/// Sites per work item for loops and for reduction partials.
pub const CHUNK: usize = 256;

#[derive(Clone)]
pub struct Executor {
    width: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("width", &self.width).finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Executor {
    pub fn sequential() -> Self {
        Self {
            width: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// An executor with `width` workers. Without the `parallel` feature the
    /// width is recorded but loops still run on the calling thread.
    pub fn new(width: usize) -> Self {
        let width = width.max(1);
        #[cfg(feature = "parallel")]
        {
            let pool = (width > 1).then(|| {
                Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(width)
                        .build()
                        .expect("failed to build rank thread pool"),
                )
            });
            Self { width, pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self { width }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Calls `f(i, &mut items[i])` for every element.
    pub fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            pool.install(|| {
                items.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                    let base = c * CHUNK;
                    for (j, item) in chunk.iter_mut().enumerate() {
                        f(base + j, item);
                    }
                })
            });
            return;
        }
        for (i, item) in items.iter_mut().enumerate() {
            f(i, item);
        }
    }

    /// Sums `f` over `0..n` split into [`CHUNK`]-sized ranges, combining the
    /// partials in ascending order starting from `zero`.
    pub fn chunked_sum<S, F>(&self, n: usize, zero: S, f: F) -> S
    where
        S: Copy + Send + Add<Output = S>,
        F: Fn(Range<usize>) -> S + Sync + Send,
    {
        let chunks = n.div_ceil(CHUNK);
        let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(n);
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            let partials: Vec<S> = pool.install(|| (0..chunks).into_par_iter().map(|c| f(range(c))).collect());
            return partials.into_iter().fold(zero, |acc, p| acc + p);
        }
        (0..chunks).fold(zero, |acc, c| acc + f(range(c)))
    }
}
