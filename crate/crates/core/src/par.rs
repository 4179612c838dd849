//! Data-parallel map over independent work items with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or with [`Execution::Sequential`], items run in order on the
//! calling thread. Results are always returned in input order, so downstream
//! output does not depend on scheduling.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// `workers = 0` uses the global pool.
    #[default]
    Parallel,
    ParallelWith {
        workers: usize,
    },
}

impl Execution {
    pub fn with_workers(workers: usize) -> Self {
        match workers {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::ParallelWith { workers: n },
        }
    }
}

pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::ParallelWith { workers } => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(e) => {
                    log::warn!("thread pool unavailable ({e}); running sequentially");
                    items.iter().map(f).collect()
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelWith { .. } => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_ordered(&items, Execution::Sequential, |x| x * x);
        for exec in [Execution::Parallel, Execution::ParallelWith { workers: 3 }] {
            assert_eq!(map_ordered(&items, exec, |x| x * x), seq);
        }
    }
}
