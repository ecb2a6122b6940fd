//! Wall-clock measurements of the schemes, decoupled from accuracy.
//!
//! The timed section is the scheme stepping alone: Brownian grids are
//! generated up front, the per-resolution batch is advanced once untimed
//! (warm-up, Newton-iteration counting, validation), and the reported wall
//! time is the median of three timed repetitions of the batch on a single
//! thread. The accuracy column reuses [`strong_error`] on the same seed and
//! path streams, so a benchmark row carries exactly the estimate a plain
//! error run would produce.

use std::hint::black_box;
use std::time::Instant;

use crate::brownian::{sample_grid, IncrementGrid};
use crate::error::{Result, SdeError};
use crate::error_analysis::{strong_error, ReferenceKind, StrongErrorConfig};
use crate::model::{make_builtin, SdeProblem};
use crate::scalar::Scalar;
use crate::schemes::{run_scheme, Scheme, SolverOptions};

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow<T: Scalar> {
    /// Scheme that was timed.
    pub scheme: Scheme,
    /// Problem label.
    pub problem: String,
    /// State dimension.
    pub dim: usize,
    /// Grid resolution `N`.
    pub steps: usize,
    /// Strong L^p error on the same path streams, when requested.
    pub error: Option<T>,
    /// Median wall time (seconds) to advance the whole batch of paths.
    pub wall_seconds: f64,
    /// Newton iterations summed over the batch (0 for derivative-free
    /// schemes).
    pub newton_iters_total: u64,
}

/// Times `work` with one untimed warm-up call followed by three timed calls;
/// returns the median of the three, in seconds.
pub fn measure(mut work: impl FnMut()) -> f64 {
    work();
    let mut samples = [0.0f64; 3];
    for slot in &mut samples {
        let start = Instant::now();
        work();
        *slot = start.elapsed().as_secs_f64();
    }
    samples.sort_by(f64::total_cmp);
    samples[1]
}

/// Benchmarks each `(scheme, resolution)` pair: wall time of the batch, the
/// batch's Newton-iteration total, and the strong error against the tamed
/// fine-grid reference at `ref_steps`.
#[allow(clippy::too_many_arguments)] // mirrors the flag set of the benchmark runs
pub fn error_vs_runtime<T: Scalar>(
    problem: &SdeProblem<T>,
    schemes: &[Scheme],
    steps_list: &[usize],
    ref_steps: usize,
    order_p: f64,
    paths: usize,
    seed: u64,
    solver: &SolverOptions<T>,
) -> Result<Vec<BenchRow<T>>> {
    if paths == 0 {
        return Err(SdeError::Config("path count must be positive".into()));
    }
    let mut rows = Vec::with_capacity(schemes.len() * steps_list.len());
    for &steps in steps_list {
        if !ref_steps.is_multiple_of(steps) || ref_steps < steps {
            return Err(SdeError::Config(format!(
                "reference resolution {ref_steps} must be a multiple of N = {steps}"
            )));
        }
        let grids = batch_grids(problem, steps, ref_steps, paths, seed)?;
        for &scheme in schemes {
            let (wall_seconds, newton_iters_total) = time_batch(problem, scheme, &grids, solver)?;
            let mut config = StrongErrorConfig::new(steps, ref_steps, order_p, paths, seed);
            config.reference = ReferenceKind::TamedFine;
            config.solver = *solver;
            let estimate = strong_error(problem, scheme, &config)?;
            rows.push(BenchRow {
                scheme,
                problem: problem.label().to_string(),
                dim: problem.dim_state(),
                steps,
                error: Some(estimate.value),
                wall_seconds,
                newton_iters_total,
            });
        }
    }
    Ok(rows)
}

/// Benchmarks scheme cost across state dimensions of the double-well
/// problem at a fixed resolution; no accuracy column.
pub fn dimension_scaling<T: Scalar>(
    dims: &[usize],
    schemes: &[Scheme],
    steps: usize,
    paths: usize,
    seed: u64,
    solver: &SolverOptions<T>,
) -> Result<Vec<BenchRow<T>>> {
    if paths == 0 {
        return Err(SdeError::Config("path count must be positive".into()));
    }
    let mut rows = Vec::with_capacity(dims.len() * schemes.len());
    for &dim in dims {
        let problem = make_builtin::<T>("langevin_double_well", Some(dim))?;
        let grids = batch_grids(&problem, steps, steps, paths, seed)?;
        for &scheme in schemes {
            let (wall_seconds, newton_iters_total) = time_batch(&problem, scheme, &grids, solver)?;
            rows.push(BenchRow {
                scheme,
                problem: problem.label().to_string(),
                dim,
                steps,
                error: None,
                wall_seconds,
                newton_iters_total,
            });
        }
    }
    Ok(rows)
}

/// The coarse grids of the batch, produced exactly as the error estimator
/// produces them (fine sample, then block-sum down).
fn batch_grids<T: Scalar>(
    problem: &SdeProblem<T>,
    steps: usize,
    ref_steps: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<IncrementGrid<T>>> {
    let factor = ref_steps / steps;
    (0..paths as u64)
        .map(|path_id| {
            let fine = sample_grid::<T>(
                ref_steps,
                problem.dim_noise(),
                problem.horizon(),
                seed,
                path_id,
            )?;
            fine.coarsen(factor)
        })
        .collect()
}

/// Advances the whole batch once untimed (validation + Newton totals), then
/// reports the median wall time of three timed batch repetitions.
fn time_batch<T: Scalar>(
    problem: &SdeProblem<T>,
    scheme: Scheme,
    grids: &[IncrementGrid<T>],
    solver: &SolverOptions<T>,
) -> Result<(f64, u64)> {
    let mut newton_iters_total = 0u64;
    for grid in grids {
        let path = run_scheme(problem, grid, scheme, solver)?;
        newton_iters_total += path.newton_iters().unwrap_or(0);
    }
    let wall_seconds = measure(|| {
        for grid in grids {
            black_box(
                run_scheme(black_box(problem), grid, scheme, solver)
                    .expect("batch was validated before timing"),
            );
        }
    });
    Ok((wall_seconds, newton_iters_total))
}
