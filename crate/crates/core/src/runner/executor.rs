use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Error, Result};

/// Fixed-size worker pool. Work is dispatched concurrently but every batch
/// returns at a barrier, in input order.
pub struct Executor {
    pool: ThreadPool,
    workers: usize,
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::ExperimentConfig("workers must be >= 1".into()));
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("swarmtune-worker-{i}"))
            .build()
            .map_err(|e| Error::ExperimentConfig(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f` on every item. A failure or panic in one item is returned in
    /// its slot and never affects the others.
    pub fn map<T, V, F>(&self, items: &[T], f: F) -> Vec<Result<V>>
    where
        T: Sync,
        V: Send,
        F: Fn(&T) -> Result<V> + Sync,
    {
        self.pool.install(|| {
            items
                .par_iter()
                .with_max_len(1)
                .map(|item| {
                    catch_unwind(AssertUnwindSafe(|| f(item))).unwrap_or_else(|panic| {
                        let msg = panic
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "evaluation panicked".into());
                        Err(Error::OptimizationFailed(format!("evaluation panicked: {msg}")))
                    })
                })
                .collect()
        })
    }
}

/// Evaluates a batch with `workers` threads; failures become `+inf`.
/// Values are returned in input order.
pub fn parallel_evaluate<T, F>(batch: &[T], evaluator: F, workers: usize) -> Result<Vec<f64>>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let exec = Executor::new(workers)?;
    Ok(exec
        .map(batch, evaluator)
        .into_iter()
        .map(|r| r.unwrap_or(f64::INFINITY))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn single_item() {
        assert_eq!(parallel_evaluate(&[3.0], |x| Ok(x * 2.0), 4).unwrap(), vec![6.0]);
    }

    #[test]
    fn failure_is_isolated() {
        let values = parallel_evaluate(
            &[0, 1, 2, 3, 4],
            |i| {
                if *i == 2 {
                    Err(Error::TrainingDiverged("injected".into()))
                } else {
                    Ok(*i as f64)
                }
            },
            3,
        )
        .unwrap();
        assert_eq!(values.iter().filter(|v| v.is_finite()).count(), 4);
        assert_eq!(values[2], f64::INFINITY);
        assert_eq!(values[4], 4.0);
    }

    #[test]
    fn panics_are_contained() {
        let exec = Executor::new(2).unwrap();
        let out = exec.map(&[1, 2, 3], |i| if *i == 2 { panic!("boom") } else { Ok(*i) });
        assert!(out[1].is_err());
        assert_eq!(*out[2].as_ref().unwrap(), 3);
    }

    #[test]
    fn order_survives_shuffled_completion() {
        let delays = [40u64, 5, 30, 0, 20, 10];
        let values = parallel_evaluate(
            &delays,
            |d| {
                std::thread::sleep(Duration::from_millis(*d));
                Ok(*d as f64)
            },
            6,
        )
        .unwrap();
        assert_eq!(values, delays.iter().map(|d| *d as f64).collect::<Vec<_>>());
    }
}
