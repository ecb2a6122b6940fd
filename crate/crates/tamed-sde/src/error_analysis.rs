//! Strong (pathwise L^p) error estimation on coupled Brownian paths.
//!
//! A scheme run at resolution `N` is compared against a reference at
//! resolution `N_ref = f N` driven by the *same* Brownian path: the fine
//! increments are resampled from the seed and block-summed down to the
//! coarse grid, so both discretizations see the identical noise. The
//! per-path discrepancy is the maximum over shared grid points,
//!
//! ```text
//! disc = max_{0 <= n <= N} || X_ref(n f) - Y_n ||,
//! err  = ( E[ disc^p ] )^(1/p),
//! ```
//!
//! estimated by a Monte Carlo mean with a normal-approximation confidence
//! interval computed on the `p`-power scale and mapped through `x^(1/p)`.
//! Paths where an explicit-scheme run overflows count as divergent and make
//! the estimate infinite; overflow of any other scheme or of the reference
//! is a hard error.
//!
//! [`estimate_order`] fits `log2(err)` against `log2(N)` by least squares;
//! the slope is the empirical strong convergence order (negated).

use rayon::prelude::*;

use crate::brownian::{sample_grid, IncrementGrid};
use crate::dominator::{DominationViolation, DominatorTrace};
use crate::error::{Result, SdeError};
use crate::la::{self, CompensatedSum};
use crate::model::SdeProblem;
use crate::rng::NORMAL_QUANTILE_975;
use crate::scalar::{real, real_of_usize, Scalar};
use crate::schemes::{
    explicit_euler, path_from_states, run_scheme, tamed_euler, DiscretePath, Scheme, SolverOptions,
};

/// Which reference solution the scheme is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Tamed Euler on the fine grid; works for every problem.
    TamedFine,
    /// The closed-form geometric-Brownian-motion solution, evaluated on the
    /// fine grid's Brownian path; only valid for the `gbm` problem.
    ExactGbm,
}

/// Parameters of one strong-error estimation run.
#[derive(Debug, Clone, Copy)]
pub struct StrongErrorConfig<T: Scalar> {
    /// Coarse resolution `N` the scheme under test runs at.
    pub steps: usize,
    /// Fine resolution `N_ref`; must be a multiple of `steps`.
    pub ref_steps: usize,
    /// The moment order `p >= 1` of the L^p norm.
    pub order_p: T,
    /// Monte Carlo sample size.
    pub paths: usize,
    /// Base seed; path `i` uses stream `i` of this seed.
    pub seed: u64,
    /// Reference construction.
    pub reference: ReferenceKind,
    /// Options for implicit per-step solves.
    pub solver: SolverOptions<T>,
}

impl<T: Scalar> StrongErrorConfig<T> {
    /// A config with the tamed fine-grid reference and default solver
    /// options.
    pub fn new(steps: usize, ref_steps: usize, order_p: f64, paths: usize, seed: u64) -> Self {
        Self {
            steps,
            ref_steps,
            order_p: real(order_p),
            paths,
            seed,
            reference: ReferenceKind::TamedFine,
            solver: SolverOptions::default(),
        }
    }
}

/// A Monte Carlo strong-error estimate.
///
/// When `divergent_paths > 0` the estimate and its interval are `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate<T: Scalar> {
    /// `( mean(disc^p) )^(1/p)`.
    pub value: T,
    /// Delta-method standard error of `value`.
    pub std_error: T,
    /// Lower 95% confidence bound.
    pub ci_low: T,
    /// Upper 95% confidence bound.
    pub ci_high: T,
    /// Monte Carlo sample size.
    pub paths: usize,
    /// Paths on which the scheme overflowed (explicit scheme only).
    pub divergent_paths: usize,
}

/// Estimates the strong L^p error of `scheme` against the configured
/// reference, coupling coarse and fine grids path by path.
pub fn strong_error<T: Scalar>(
    problem: &SdeProblem<T>,
    scheme: Scheme,
    config: &StrongErrorConfig<T>,
) -> Result<ErrorEstimate<T>> {
    validate_config(problem, config)?;
    let factor = config.ref_steps / config.steps;
    let powers: Vec<(T, bool)> = (0..config.paths as u64)
        .into_par_iter()
        .map(|path_id| path_discrepancy_power(problem, scheme, config, factor, path_id))
        .collect::<Result<Vec<_>>>()?;

    let divergent_paths = powers.iter().filter(|(_, divergent)| *divergent).count();
    if divergent_paths > 0 {
        return Ok(ErrorEstimate {
            value: T::infinity(),
            std_error: T::infinity(),
            ci_low: T::infinity(),
            ci_high: T::infinity(),
            paths: config.paths,
            divergent_paths,
        });
    }
    Ok(summarize(
        &powers,
        config.order_p,
        config.paths,
        divergent_paths,
    ))
}

fn summarize<T: Scalar>(
    powers: &[(T, bool)],
    order_p: T,
    paths: usize,
    divergent_paths: usize,
) -> ErrorEstimate<T> {
    let m = real_of_usize::<T>(paths);
    let mut sum = CompensatedSum::new();
    for &(power, _) in powers {
        sum.add(power);
    }
    let mean_power = sum.value() / m;
    let inverse_p = T::one() / order_p;
    if mean_power <= T::zero() {
        return ErrorEstimate {
            value: T::zero(),
            std_error: T::zero(),
            ci_low: T::zero(),
            ci_high: T::zero(),
            paths,
            divergent_paths,
        };
    }
    let value = mean_power.powf(inverse_p);
    if paths < 2 {
        return ErrorEstimate {
            value,
            std_error: T::zero(),
            ci_low: value,
            ci_high: value,
            paths,
            divergent_paths,
        };
    }
    let mut squares = CompensatedSum::new();
    for &(power, _) in powers {
        let centered = power - mean_power;
        squares.add(centered * centered);
    }
    let variance = squares.value() / (m - T::one());
    let se_power = (variance / m).sqrt();
    let z = real::<T>(NORMAL_QUANTILE_975);
    let low_power = (mean_power - z * se_power).max(T::zero());
    let high_power = mean_power + z * se_power;
    ErrorEstimate {
        value,
        std_error: se_power * inverse_p * mean_power.powf(inverse_p - T::one()),
        ci_low: low_power.powf(inverse_p),
        ci_high: high_power.powf(inverse_p),
        paths,
        divergent_paths,
    }
}

fn validate_config<T: Scalar>(
    problem: &SdeProblem<T>,
    config: &StrongErrorConfig<T>,
) -> Result<()> {
    if config.steps == 0 {
        return Err(SdeError::Config("step count must be positive".into()));
    }
    if !config.ref_steps.is_multiple_of(config.steps) || config.ref_steps < config.steps {
        return Err(SdeError::Config(format!(
            "reference resolution {} must be a multiple of the coarse resolution {}",
            config.ref_steps, config.steps
        )));
    }
    if config.paths == 0 {
        return Err(SdeError::Config("path count must be positive".into()));
    }
    if !(config.order_p >= T::one()) {
        return Err(SdeError::Config(format!(
            "moment order p must be >= 1, got {}",
            config.order_p
        )));
    }
    if config.reference == ReferenceKind::ExactGbm && problem.label() != "gbm" {
        return Err(SdeError::Config(format!(
            "the closed-form reference applies to gbm, not `{}`",
            problem.label()
        )));
    }
    Ok(())
}

/// One path's `disc^p` together with its divergence flag.
fn path_discrepancy_power<T: Scalar>(
    problem: &SdeProblem<T>,
    scheme: Scheme,
    config: &StrongErrorConfig<T>,
    factor: usize,
    path_id: u64,
) -> Result<(T, bool)> {
    let fine = sample_grid::<T>(
        config.ref_steps,
        problem.dim_noise(),
        problem.horizon(),
        config.seed,
        path_id,
    )?;
    let coarse = fine.coarsen(factor)?;
    let coarse_path = run_scheme(problem, &coarse, scheme, &config.solver)?;
    if let Some(step) = coarse_path.overflowed_at() {
        if scheme == Scheme::Explicit {
            return Ok((T::infinity(), true));
        }
        return Err(SdeError::Numeric(format!(
            "{scheme} overflowed at step {step} of path {path_id} (N = {})",
            config.steps
        )));
    }
    let reference = match config.reference {
        ReferenceKind::TamedFine => {
            let path = tamed_euler(problem, &fine)?;
            if let Some(step) = path.overflowed_at() {
                return Err(SdeError::Numeric(format!(
                    "tamed reference overflowed at fine step {step} of path {path_id}"
                )));
            }
            path
        }
        ReferenceKind::ExactGbm => exact_gbm_reference(problem.initial_value()[0], &fine)?,
    };
    let mut disc = T::zero();
    for n in 0..=config.steps {
        let gap = la::distance(reference.state(n * factor), coarse_path.state(n));
        if gap > disc {
            disc = gap;
        }
    }
    Ok((disc.powf(config.order_p), false))
}

/// The exact geometric-Brownian-motion solution `X_t = x0 exp(W_t - t/2)`
/// evaluated at every grid point of `grid`'s Brownian path.
pub fn exact_gbm_reference<T: Scalar>(
    initial: T,
    grid: &IncrementGrid<T>,
) -> Result<DiscretePath<T>> {
    if grid.dim_noise() != 1 {
        return Err(SdeError::Argument(format!(
            "the closed-form solution is scalar; got noise dimension {}",
            grid.dim_noise()
        )));
    }
    let n_steps = grid.steps();
    let horizon = grid.horizon();
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(initial);
    let mut w = T::zero();
    for n in 0..n_steps {
        w += grid.increment(n)[0];
        let t = horizon * real_of_usize::<T>(n + 1) / real_of_usize::<T>(n_steps);
        states.push(initial * (w - t / real(2.0)).exp());
    }
    Ok(path_from_states(
        Scheme::Exact,
        n_steps,
        1,
        states,
        None,
        None,
    ))
}

/// A least-squares fit of `log2(value)` against `log2(steps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit<T: Scalar> {
    /// Slope of the fit; `-slope` is the empirical convergence order.
    pub slope: T,
    /// Intercept on the `log2` scale.
    pub intercept: T,
    /// Coefficient of determination (1 for a perfect or constant fit).
    pub r_squared: T,
}

impl<T: Scalar> OrderFit<T> {
    /// The fitted value extrapolated to `steps`,
    /// `2^(intercept + slope log2 steps)`.
    pub fn predicted_value(&self, steps: usize) -> T {
        let log2_value = self.intercept.to_f64().unwrap_or(f64::NAN)
            + self.slope.to_f64().unwrap_or(f64::NAN) * (steps as f64).log2();
        real(log2_value.exp2())
    }
}

/// Fits the empirical convergence order from `(steps, error)` pairs.
///
/// Needs at least three points with distinct resolutions and finite,
/// strictly positive errors.
pub fn estimate_order<T: Scalar>(points: &[(usize, T)]) -> Result<OrderFit<T>> {
    if points.len() < 3 {
        return Err(SdeError::Argument(format!(
            "an order fit needs at least 3 resolutions, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(steps, value) in points {
        if steps == 0 {
            return Err(SdeError::Argument("resolution 0 in order fit".into()));
        }
        let value = value.to_f64().unwrap_or(f64::NAN);
        if !value.is_finite() || value <= 0.0 {
            return Err(SdeError::Argument(format!(
                "order fit needs finite positive errors, got {value} at N = {steps}"
            )));
        }
        xs.push((steps as f64).log2());
        ys.push(value.log2());
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    if sxx == 0.0 {
        return Err(SdeError::Argument(
            "order fit needs at least two distinct resolutions".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fitted = intercept + slope * x;
            (y - fitted) * (y - fitted)
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(OrderFit {
        slope: real(slope),
        intercept: real(intercept),
        r_squared: real(r_squared),
    })
}

/// One row of a moment sweep: the largest mean `p`-th moment over the grid
/// at one resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow<T: Scalar> {
    /// Grid resolution `N`.
    pub steps: usize,
    /// `max_n mean(||Y_n||^p)`; `+inf` once any path overflowed.
    pub max_mean_moment: T,
    /// Fraction of paths that overflowed before the horizon.
    pub overflowed_fraction: f64,
}

/// Sweeps `max_n E[||Y_n||^p]` over a list of resolutions.
///
/// Overflow is tolerated for the explicit scheme (it is the phenomenon being
/// measured) and makes the affected means infinite; any other scheme
/// overflowing is a hard error.
pub fn moment_sweep<T: Scalar>(
    problem: &SdeProblem<T>,
    scheme: Scheme,
    steps_list: &[usize],
    moment_p: T,
    paths: usize,
    seed: u64,
    options: &SolverOptions<T>,
) -> Result<Vec<MomentRow<T>>> {
    if paths == 0 {
        return Err(SdeError::Config("path count must be positive".into()));
    }
    if !(moment_p >= T::one()) {
        return Err(SdeError::Config(format!(
            "moment order p must be >= 1, got {moment_p}"
        )));
    }
    let mut rows = Vec::with_capacity(steps_list.len());
    for &steps in steps_list {
        let per_path: Vec<(Vec<T>, Option<usize>)> = (0..paths as u64)
            .into_par_iter()
            .map(|path_id| -> Result<(Vec<T>, Option<usize>)> {
                let grid =
                    sample_grid::<T>(steps, problem.dim_noise(), problem.horizon(), seed, path_id)?;
                let path = run_scheme(problem, &grid, scheme, options)?;
                if path.overflowed_at().is_some() && scheme != Scheme::Explicit {
                    return Err(SdeError::Numeric(format!(
                        "{scheme} overflowed at N = {steps}, path {path_id}"
                    )));
                }
                let powers = (0..=path.recorded_steps())
                    .map(|n| la::norm(path.state(n)).powf(moment_p))
                    .collect();
                Ok((powers, path.overflowed_at()))
            })
            .collect::<Result<Vec<_>>>()?;

        let infinite_from = per_path
            .iter()
            .filter_map(|(_, overflowed_at)| *overflowed_at)
            .min()
            .unwrap_or(usize::MAX);
        let overflowed = per_path.iter().filter(|(_, o)| o.is_some()).count();
        let mut sums = vec![CompensatedSum::<T>::new(); (steps + 1).min(infinite_from)];
        for (powers, _) in &per_path {
            for (sum, &power) in sums.iter_mut().zip(powers) {
                sum.add(power);
            }
        }
        let m = real_of_usize::<T>(paths);
        let max_mean_moment = if infinite_from <= steps {
            T::infinity()
        } else {
            sums.iter()
                .map(|sum| sum.value() / m)
                .fold(T::zero(), |acc, x| acc.max(x))
        };
        rows.push(MomentRow {
            steps,
            max_mean_moment,
            overflowed_fraction: overflowed as f64 / paths as f64,
        });
    }
    Ok(rows)
}

/// A side-by-side explicit-vs-tamed run on one deterministic increment
/// sequence chosen so the explicit scheme explodes.
#[derive(Debug, Clone)]
pub struct DivergenceReport<T: Scalar> {
    /// Index of the step that carries the non-zero increment.
    pub trigger_step: usize,
    /// Value of that increment; every other increment is zero.
    pub trigger_magnitude: T,
    /// The explicit run (truncated at overflow once ignited).
    pub explicit: DiscretePath<T>,
    /// The tamed run on the same increments.
    pub tamed: DiscretePath<T>,
    /// Dominating-process record of the tamed run.
    pub trace: DominatorTrace<T>,
    /// Domination violations of the tamed run (empty when the bound holds).
    pub violations: Vec<DominationViolation<T>>,
    /// `(3N/T)^(1/4)`: once `||Y_n||` passes this, `|y - (T/N) y^5| >= 2|y|`,
    /// so the explicit recursion at least doubles per step even with zero
    /// subsequent noise and the iterates blow up super-exponentially.
    pub ignition_threshold: T,
    /// Whether the explicit run crossed the ignition threshold. A trigger
    /// too small to ignite is reported here, not treated as an error.
    pub ignited: bool,
}

/// Runs the explicit and tamed schemes on a deterministic increment sequence
/// that is zero everywhere except `trigger_step`, where it jumps by
/// `trigger_magnitude`. A large enough trigger kicks the explicit iterate
/// past `(3N/T)^(1/4)`, after which its magnitude at least doubles per step
/// until overflow, while the tamed run on the identical increments stays
/// bounded. Derived for the quintic problem.
pub fn divergence_demo<T: Scalar>(
    problem: &SdeProblem<T>,
    steps: usize,
    trigger_step: usize,
    trigger_magnitude: T,
) -> Result<DivergenceReport<T>> {
    if problem.label() != "quintic_gl" {
        return Err(SdeError::Argument(format!(
            "the divergence construction is derived for quintic_gl, not `{}`",
            problem.label()
        )));
    }
    if trigger_step >= steps {
        return Err(SdeError::Argument(format!(
            "trigger step {trigger_step} outside the grid of {steps} steps"
        )));
    }
    if !trigger_magnitude.is_finite() {
        return Err(SdeError::Argument(
            "trigger magnitude must be finite".into(),
        ));
    }
    let mut increments = vec![T::zero(); steps * problem.dim_noise()];
    increments[trigger_step * problem.dim_noise()] = trigger_magnitude;
    let grid = IncrementGrid::from_parts(
        steps,
        problem.dim_noise(),
        problem.horizon(),
        increments,
        0,
        0,
    )?;
    let threshold =
        (real::<T>(3.0) * real_of_usize::<T>(steps) / problem.horizon()).powf(real(0.25));
    let explicit = explicit_euler(problem, &grid)?;
    let tamed = tamed_euler(problem, &grid)?;
    if let Some(step) = tamed.overflowed_at() {
        return Err(SdeError::Numeric(format!(
            "tamed run overflowed at step {step}; the trigger exceeds what taming can absorb"
        )));
    }
    let trace = DominatorTrace::compute(problem, &tamed, &grid)?;
    let violations = trace.assert_domination(&tamed)?;
    let ignited = (trigger_step + 1..=explicit.recorded_steps())
        .any(|n| la::norm(explicit.state(n)) >= threshold);
    Ok(DivergenceReport {
        trigger_step,
        trigger_magnitude,
        explicit,
        tamed,
        trace,
        violations,
        ignition_threshold: threshold,
        ignited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::IncrementGrid;
    use crate::model::make_builtin;

    #[test]
    fn exact_gbm_matches_hand_values() {
        // W = (0, 0.1, -0.1), t = (0, 0.5, 1):
        // X = exp(W - t/2) = (1, e^{-0.15}, e^{-0.6}).
        let grid = IncrementGrid::from_parts(2, 1, 1.0, vec![0.1, -0.2], 0, 0).unwrap();
        let path = exact_gbm_reference(1.0, &grid).unwrap();
        assert_eq!(path.state(0), &[1.0]);
        assert!((path.state(1)[0] - (-0.15f64).exp()).abs() < 1e-15);
        assert!((path.state(2)[0] - (-0.6f64).exp()).abs() < 1e-15);
        assert_eq!(path.scheme(), Scheme::Exact);
    }

    #[test]
    fn self_comparison_has_zero_error() {
        // With ref_steps == steps the reference is the tamed path itself.
        let cubic = make_builtin::<f64>("cubic_gl", None).unwrap();
        let config = StrongErrorConfig::new(32, 32, 2.0, 10, 5);
        let estimate = strong_error(&cubic, Scheme::Tamed, &config).unwrap();
        assert_eq!(estimate.value, 0.0);
        assert_eq!(estimate.std_error, 0.0);
        assert_eq!(estimate.ci_low, 0.0);
        assert_eq!(estimate.ci_high, 0.0);
        assert_eq!(estimate.divergent_paths, 0);
    }

    #[test]
    fn estimates_are_deterministic_and_positive() {
        let cubic = make_builtin::<f64>("cubic_gl", None).unwrap();
        let config = StrongErrorConfig::new(16, 256, 2.0, 40, 11);
        let first = strong_error(&cubic, Scheme::Tamed, &config).unwrap();
        let second = strong_error(&cubic, Scheme::Tamed, &config).unwrap();
        assert_eq!(first, second);
        assert!(first.value > 0.0);
        assert!(first.ci_low <= first.value && first.value <= first.ci_high);
        assert!(first.std_error > 0.0);
    }

    #[test]
    fn error_shrinks_with_resolution_against_the_exact_solution() {
        let gbm = make_builtin::<f64>("gbm", None).unwrap();
        let mut config = StrongErrorConfig::new(8, 1024, 2.0, 100, 3);
        config.reference = ReferenceKind::ExactGbm;
        let coarse = strong_error(&gbm, Scheme::Tamed, &config).unwrap();
        config.steps = 128;
        let fine = strong_error(&gbm, Scheme::Tamed, &config).unwrap();
        assert!(
            fine.value < coarse.value,
            "error should shrink: {} at N=8 vs {} at N=128",
            coarse.value,
            fine.value
        );
    }

    #[test]
    fn exact_reference_is_rejected_off_gbm() {
        let cubic = make_builtin::<f64>("cubic_gl", None).unwrap();
        let mut config = StrongErrorConfig::new(8, 64, 2.0, 4, 0);
        config.reference = ReferenceKind::ExactGbm;
        assert!(matches!(
            strong_error(&cubic, Scheme::Tamed, &config),
            Err(SdeError::Config(_))
        ));
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let cubic = make_builtin::<f64>("cubic_gl", None).unwrap();
        for config in [
            StrongErrorConfig::new(0, 64, 2.0, 4, 0),
            StrongErrorConfig::new(12, 64, 2.0, 4, 0),
            StrongErrorConfig::new(8, 64, 2.0, 0, 0),
            StrongErrorConfig::new(8, 64, 0.5, 4, 0),
            StrongErrorConfig::new(128, 64, 2.0, 4, 0),
        ] {
            assert!(
                matches!(
                    strong_error(&cubic, Scheme::Tamed, &config),
                    Err(SdeError::Config(_))
                ),
                "accepted {config:?}"
            );
        }
    }

    #[test]
    fn order_fit_recovers_an_exact_power_law() {
        // value = 4 / sqrt(N): slope -1/2, intercept 2, r^2 = 1.
        let points: Vec<(usize, f64)> = [16usize, 64, 256]
            .iter()
            .map(|&n| (n, 4.0 / (n as f64).sqrt()))
            .collect();
        let fit = estimate_order(&points).unwrap();
        assert!((fit.slope - (-0.5)).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        // Extrapolation: 2^(2 - 8) at N = 2^16.
        assert!((fit.predicted_value(1 << 16) - 0.015625).abs() < 1e-12);
    }

    #[test]
    fn order_fit_handles_a_constant_series() {
        let points = vec![(8usize, 0.25f64), (16, 0.25), (32, 0.25)];
        let fit = estimate_order(&points).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn order_fit_rejects_degenerate_input() {
        assert!(estimate_order(&[(8usize, 1.0f64), (16, 0.5)]).is_err());
        assert!(estimate_order(&[(8usize, 1.0f64), (16, 0.0), (32, 0.25)]).is_err());
        assert!(estimate_order(&[(8usize, 1.0f64), (16, f64::NAN), (32, 0.25)]).is_err());
        assert!(estimate_order(&[(8usize, 1.0f64), (8, 0.5), (8, 0.25)]).is_err());
        assert!(estimate_order(&[(0usize, 1.0f64), (8, 0.5), (16, 0.25)]).is_err());
    }

    #[test]
    fn tamed_moments_stay_bounded_on_the_quintic() {
        let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
        let rows = moment_sweep(
            &quintic,
            Scheme::Tamed,
            &[4, 16, 64],
            2.0,
            50,
            7,
            &SolverOptions::default(),
        )
        .unwrap();
        for row in &rows {
            assert_eq!(row.overflowed_fraction, 0.0);
            assert!(row.max_mean_moment.is_finite());
            // The moment at t = 0 is ||x0||^2 = 1, so the max is at least 1,
            // and the taming keeps it small.
            assert!(row.max_mean_moment >= 1.0);
            assert!(
                row.max_mean_moment < 10.0,
                "N = {}: {}",
                row.steps,
                row.max_mean_moment
            );
        }
    }

    #[test]
    fn explicit_moments_explode_on_the_quintic() {
        // At N = 8 the ignition threshold (3N)^(1/4) ~ 2.21 is within reach
        // of the multiplicative noise, and the remaining steps suffice to
        // push an ignited path past the overflow limit.
        let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
        let rows = moment_sweep(
            &quintic,
            Scheme::Explicit,
            &[8],
            2.0,
            400,
            0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(rows[0].overflowed_fraction > 0.0);
        assert!(rows[0].max_mean_moment.is_infinite());
    }

    #[test]
    fn explicit_divergence_makes_the_strong_error_infinite() {
        let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
        let config = StrongErrorConfig::new(8, 64, 2.0, 600, 2);
        let estimate = strong_error(&quintic, Scheme::Explicit, &config).unwrap();
        assert!(estimate.divergent_paths > 0);
        assert!(estimate.value.is_infinite());
        assert!(estimate.ci_high.is_infinite());
    }

    #[test]
    fn triggered_jump_explodes_explicit_but_not_tamed() {
        // One jump of 10 at step 0, N = 16: the explicit iterate lands at
        // 1 - 1/16 + 10 = 10.9375, far past (3*16/1)^(1/4) ~ 2.63, and the
        // drift alone then at least doubles it per step ((1/16)*10^5 >> 2*10)
        // until overflow; the tamed iterate sheds at most 1 per step.
        let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
        let report = divergence_demo(&quintic, 16, 0, 10.0).unwrap();
        assert!(report.ignited);
        assert!((report.ignition_threshold - 48.0f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(report.explicit.state(1)[0], 1.0 - 1.0 / 16.0 + 10.0);

        // Explicit: past 1e100 before step 16, doubling at least once per
        // step from ignition to overflow.
        let overflow_step = report.explicit.overflowed_at().unwrap();
        assert!(overflow_step < 16);
        let explicit_max = (0..=report.explicit.recorded_steps())
            .map(|n| report.explicit.state(n)[0].abs())
            .fold(0.0, f64::max);
        assert!(explicit_max > 1e100, "explicit max {explicit_max}");
        for n in 1..report.explicit.recorded_steps() {
            let here = report.explicit.state(n)[0].abs();
            let next = report.explicit.state(n + 1)[0].abs();
            assert!(
                next >= 2.0 * here,
                "no doubling at step {n}: {here} -> {next}"
            );
        }

        // Tamed: bounded on the identical increments, dominated wherever the
        // flags hold.
        assert!(report.tamed.overflowed_at().is_none());
        let tamed_max = (0..=16)
            .map(|n| report.tamed.state(n)[0].abs())
            .fold(0.0, f64::max);
        assert!(tamed_max < 1e3, "tamed max {tamed_max}");
        assert!(report.violations.is_empty());
    }

    #[test]
    fn zero_trigger_keeps_both_schemes_on_the_drift_flow() {
        // No noise at all: both schemes contract from 1 toward 0 and nothing
        // ignites.
        let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
        let report = divergence_demo(&quintic, 16, 0, 0.0).unwrap();
        assert!(!report.ignited);
        assert!(report.explicit.overflowed_at().is_none());
        assert!(report.tamed.overflowed_at().is_none());
        for n in 0..16 {
            let e = report.explicit.state(n)[0];
            let t = report.tamed.state(n)[0];
            assert!(e > 0.0 && e <= 1.0 && report.explicit.state(n + 1)[0] < e);
            assert!(t > 0.0 && t <= 1.0 && report.tamed.state(n + 1)[0] < t);
        }
        assert!(report.violations.is_empty());
    }

    #[test]
    fn divergence_demo_rejects_bad_arguments() {
        let cubic = make_builtin::<f64>("cubic_gl", None).unwrap();
        assert!(matches!(
            divergence_demo(&cubic, 16, 0, 10.0),
            Err(SdeError::Argument(_))
        ));
        let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
        assert!(matches!(
            divergence_demo(&quintic, 16, 16, 10.0),
            Err(SdeError::Argument(_))
        ));
    }
}
