//! Parallel Monte Carlo driver.
//!
//! Runs are independent streams seeded by `(seed, run_index)`, so they can be
//! simulated on any number of threads; outcomes are collected by run index
//! and merged in order, making the output bit-identical to the serial engine
//! regardless of thread count.

use asyncnet_core::sim::{
    merge_outcomes, simulate_run, ExperimentSpec, LearningCurve, RunOutcome, SteadyStateReport,
};
use asyncnet_core::Result;
use rayon::prelude::*;

/// Runs every Monte Carlo repetition on the current rayon pool and merges in
/// run order.
pub fn run_parallel(spec: &ExperimentSpec) -> Result<(LearningCurve, SteadyStateReport)> {
    spec.validate()?;
    let outcomes: Result<Vec<RunOutcome>> =
        (0..spec.runs).into_par_iter().map(|r| simulate_run(spec, r)).collect();
    merge_outcomes(spec, outcomes?)
}

/// Runs on a dedicated pool with the given thread count (`None` = rayon
/// default).
pub fn run_with_threads(
    spec: &ExperimentSpec,
    threads: Option<usize>,
) -> Result<(LearningCurve, SteadyStateReport)> {
    match threads {
        None => run_parallel(spec),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .expect("thread pool");
            pool.install(|| run_parallel(spec))
        }
    }
}
