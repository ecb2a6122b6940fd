//! End-to-end behavioral gate for the toolkit.
//!
//! Twelve numbered guarantees, each verified at a fixed seed and printed as
//! one `criterion NN: PASS/FAIL` line (run with `--nocapture` to see them).
//! The criteria run serially inside a single test so wall-clock comparisons
//! are not distorted by parallel test scheduling.

// Negated comparisons (`!(x > bound)`) deliberately fail a criterion when a
// measured quantity comes out NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use tamed_sde::bench::{dimension_scaling, measure};
use tamed_sde::brownian::sample_grid;
use tamed_sde::dominator::DominatorTrace;
use tamed_sde::error_analysis::{
    divergence_demo, estimate_order, moment_sweep, strong_error, OrderFit, ReferenceKind,
    StrongErrorConfig,
};
use tamed_sde::model::{make_builtin, Diffusion, SdeProblem};
use tamed_sde::rng::PathRng;
use tamed_sde::schemes::{
    explicit_euler, implicit_cardano_cubic, implicit_euler, tamed_euler, taming_defect, Scheme,
    SolverOptions,
};

type CriterionResult = Result<String, String>;
type CriterionFn = fn() -> CriterionResult;
/// Error points, their order fit, and the elapsed seconds of the sweep.
type CubicSeries = Result<(Vec<(usize, f64)>, OrderFit<f64>, f64), String>;
type BoxedDrift = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Strong-error series of the tamed scheme on the cubic problem, shared by
/// criteria 1 and 12.
fn cubic_error_series() -> &'static CubicSeries {
    static SERIES: OnceLock<CubicSeries> = OnceLock::new();
    SERIES.get_or_init(|| {
        let started = Instant::now();
        let cubic = make_builtin::<f64>("cubic_gl", None).map_err(|e| e.to_string())?;
        let mut points = Vec::new();
        for steps in [16usize, 32, 64, 128, 256, 512] {
            let config = StrongErrorConfig::new(steps, 8192, 2.0, 2000, 1001);
            let estimate =
                strong_error(&cubic, Scheme::Tamed, &config).map_err(|e| e.to_string())?;
            points.push((steps, estimate.value));
        }
        let fit = estimate_order(&points).map_err(|e| e.to_string())?;
        Ok((points, fit, started.elapsed().as_secs_f64()))
    })
}

/// 1. The tamed scheme converges at strong order 1/2 on the cubic problem
///    with multiplicative noise.
fn criterion_01() -> CriterionResult {
    let (points, fit, wall) = cubic_error_series().as_ref().map_err(Clone::clone)?;
    if !(fit.slope >= -0.65 && fit.slope <= -0.35) {
        return Err(format!("slope {:.4} outside [-0.65, -0.35]", fit.slope));
    }
    if fit.r_squared < 0.9 {
        return Err(format!("r^2 {:.4} below 0.9", fit.r_squared));
    }
    if *wall >= 120.0 {
        return Err(format!("took {wall:.1}s, budget 120s"));
    }
    let last = points.last().unwrap();
    Ok(format!(
        "slope {:.3}, r^2 {:.4}, err(N={}) = {:.3e}, {:.1}s",
        fit.slope, fit.r_squared, last.0, last.1, wall
    ))
}

/// 2. Against the closed-form solution of the zero-drift problem, the tamed
///    and explicit schemes both converge at strong order 1/2 and collapse to
///    the same bitwise path.
fn criterion_02() -> CriterionResult {
    let gbm = make_builtin::<f64>("gbm", None).unwrap();
    let options = SolverOptions::default();
    for path_id in 0..50u64 {
        let grid = sample_grid::<f64>(64, 1, 1.0, 1002, path_id).unwrap();
        let tamed = tamed_euler(&gbm, &grid).unwrap();
        let explicit = explicit_euler(&gbm, &grid).unwrap();
        let implicit = implicit_euler(&gbm, &grid, &options).unwrap();
        for n in 0..=64 {
            if tamed.state(n) != explicit.state(n) || tamed.state(n) != implicit.state(n) {
                return Err(format!("schemes differ at path {path_id}, step {n}"));
            }
        }
    }
    let mut tamed_points = Vec::new();
    let mut explicit_points = Vec::new();
    for steps in [16usize, 32, 64, 128, 256, 512] {
        let mut config = StrongErrorConfig::new(steps, 8192, 2.0, 2000, 1002);
        config.reference = ReferenceKind::ExactGbm;
        let tamed = strong_error(&gbm, Scheme::Tamed, &config).map_err(|e| e.to_string())?;
        let explicit = strong_error(&gbm, Scheme::Explicit, &config).map_err(|e| e.to_string())?;
        if tamed != explicit {
            return Err(format!(
                "estimates differ at N = {steps}: {tamed:?} vs {explicit:?}"
            ));
        }
        tamed_points.push((steps, tamed.value));
        explicit_points.push((steps, explicit.value));
    }
    let tamed_fit = estimate_order(&tamed_points).map_err(|e| e.to_string())?;
    let explicit_fit = estimate_order(&explicit_points).map_err(|e| e.to_string())?;
    for (name, fit) in [("tamed", &tamed_fit), ("explicit", &explicit_fit)] {
        if !(fit.slope >= -0.65 && fit.slope <= -0.35) {
            return Err(format!(
                "{name} slope {:.4} outside [-0.65, -0.35]",
                fit.slope
            ));
        }
    }
    Ok(format!(
        "slopes {:.3} (tamed) / {:.3} (explicit) vs the exact solution; estimates bitwise equal; 50 paths state-identical across all three schemes",
        tamed_fit.slope, explicit_fit.slope
    ))
}

/// 3. With additive noise the tamed scheme converges at strong order 1.
fn criterion_03() -> CriterionResult {
    let langevin = make_builtin::<f64>("langevin_double_well", Some(10)).unwrap();
    let mut points = Vec::new();
    for steps in [16usize, 32, 64, 128, 256, 512] {
        let config = StrongErrorConfig::new(steps, 8192, 2.0, 500, 1003);
        let estimate =
            strong_error(&langevin, Scheme::Tamed, &config).map_err(|e| e.to_string())?;
        points.push((steps, estimate.value));
    }
    let fit = estimate_order(&points).map_err(|e| e.to_string())?;
    if !(fit.slope >= -1.25 && fit.slope <= -0.75) {
        return Err(format!("slope {:.4} outside [-1.25, -0.75]", fit.slope));
    }
    if fit.r_squared < 0.9 {
        return Err(format!("r^2 {:.4} below 0.9", fit.r_squared));
    }
    Ok(format!("slope {:.3}, r^2 {:.4}", fit.slope, fit.r_squared))
}

/// 4. The dominating process bounds the tamed iterates on every armed step,
///    across resolutions and a large path batch.
fn criterion_04() -> CriterionResult {
    let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
    let mut checked = 0usize;
    let mut complement = 0.0f64;
    for steps in [16usize, 64, 256] {
        for path_id in 0..10_000u64 {
            let grid = sample_grid::<f64>(steps, 1, 1.0, 1004, path_id).unwrap();
            let path = tamed_euler(&quintic, &grid).unwrap();
            let trace = DominatorTrace::compute(&quintic, &path, &grid).unwrap();
            let violations = trace.assert_domination(&path).unwrap();
            if !violations.is_empty() {
                return Err(format!(
                    "{} violation(s) at N = {steps}, path {path_id}: first at step {}",
                    violations.len(),
                    violations[0].index
                ));
            }
            checked += 1;
            complement += trace.omega_complement_rate();
        }
    }
    Ok(format!(
        "0 violations over {checked} traces; mean off-guarantee fraction {:.3}",
        complement / checked as f64
    ))
}

/// 5. Tamed drift increments have norm strictly below one on every step.
///    The stepper contains an unconditional per-step assertion of this bound,
///    armed in every tamed run of this suite (any firing panics the criterion
///    that triggered it); here the bound is additionally recomputed directly
///    over all four built-in problems.
fn criterion_05() -> CriterionResult {
    let problems = [
        make_builtin::<f64>("quintic_gl", None).unwrap(),
        make_builtin::<f64>("cubic_gl", None).unwrap(),
        make_builtin::<f64>("gbm", None).unwrap(),
        make_builtin::<f64>("langevin_double_well", Some(10)).unwrap(),
    ];
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for problem in &problems {
        let d = problem.dim_state();
        let m = problem.dim_noise();
        for path_id in 0..20u64 {
            let grid = sample_grid::<f64>(64, m, 1.0, 1005, path_id).unwrap();
            let path = tamed_euler(problem, &grid).unwrap();
            let h = 1.0 / 64.0;
            for n in 0..64 {
                let mut mu = vec![0.0; d];
                problem.drift_into(path.state(n), &mut mu);
                let scaled = h * norm(&mu);
                let increment_norm = scaled / (1.0 + scaled);
                if increment_norm >= 1.0 {
                    return Err(format!(
                        "increment norm {increment_norm} at {} step {n}",
                        problem.label()
                    ));
                }
                worst = worst.max(increment_norm);
                checked += 1;
            }
        }
    }
    Ok(format!(
        "max over {checked} recomputed increments: {worst:.6} < 1; in-stepper assertion armed throughout"
    ))
}

/// 6. One tamed step minus one explicit step equals the closed-form taming
///    defect, at state-scale precision, across random problems and triples.
fn criterion_06() -> CriterionResult {
    let mut rng = PathRng::new(1006, 0);
    let mut worst = 0.0f64;
    for k in 0..1000u32 {
        let state = 3.0 * rng.standard_normal();
        let noise = rng.standard_normal();
        let steps = 1 + (rng.uniform_open() * 999.0) as usize;
        let which = k % 3;
        let (drift, diffusion, reg): (BoxedDrift, _, f64) = match which {
            0 => (
                Arc::new(|x: &[f64], out: &mut [f64]| out[0] = -x[0].powi(5)),
                Diffusion::Scalar(Arc::new(|x: f64| x)),
                5.0,
            ),
            1 => (
                Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0] - x[0].powi(3)),
                Diffusion::Scalar(Arc::new(|x: f64| x)),
                3.0,
            ),
            _ => (
                Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 0.0),
                Diffusion::Scalar(Arc::new(|x: f64| x)),
                1.0,
            ),
        };
        let problem = SdeProblem::new("defect_probe", 1.0, vec![state], 1, reg, drift, diffusion)
            .map_err(|e| e.to_string())?;
        let mut increments = vec![0.0; steps];
        increments[0] = noise;
        let grid = tamed_sde::brownian::IncrementGrid::from_parts(steps, 1, 1.0, increments, 0, 0)
            .unwrap();
        let tamed = tamed_euler(&problem, &grid).unwrap();
        let explicit = explicit_euler(&problem, &grid).unwrap();
        let defect = taming_defect(&problem, &[state], steps).unwrap()[0];
        let gap = (tamed.state(1)[0] - explicit.state(1)[0]) - defect;
        let scale = tamed.state(1)[0]
            .abs()
            .max(explicit.state(1)[0].abs())
            .max(1.0);
        let relative = gap.abs() / scale;
        if relative > 1e-12 {
            return Err(format!(
                "triple {k} (state {state:.4}, steps {steps}): defect off by {relative:.2e} relative"
            ));
        }
        worst = worst.max(relative);
    }
    Ok(format!(
        "1000 triples, worst deviation {worst:.2e} (state scale)"
    ))
}

/// 7. The closed-form implicit step agrees with the Newton-solved implicit
///    step along coupled paths.
fn criterion_07() -> CriterionResult {
    let cubic = make_builtin::<f64>("cubic_gl", None).unwrap();
    let options = SolverOptions {
        residual_tol: 1e-13,
        ..SolverOptions::default()
    };
    let mut worst = 0.0f64;
    for path_id in 0..1000u64 {
        let grid = sample_grid::<f64>(128, 1, 1.0, 1007, path_id).unwrap();
        let newton = implicit_euler(&cubic, &grid, &options).map_err(|e| e.to_string())?;
        let cardano = implicit_cardano_cubic(1.0, &grid).map_err(|e| e.to_string())?;
        for n in 0..=128 {
            let gap = (newton.state(n)[0] - cardano.state(n)[0]).abs();
            if gap > 1e-10 {
                return Err(format!("path {path_id}, step {n}: gap {gap:.2e} > 1e-10"));
            }
            worst = worst.max(gap);
        }
    }
    Ok(format!("1000 paths, max |Newton - Cardano| = {worst:.2e}"))
}

/// 8. On an increment sequence with a single jump of 10 at step 0 and 16
///    steps, the explicit scheme blows past 1e100 before the horizon while
///    the tamed scheme stays below 1e3 and within its dominating process.
fn criterion_08() -> CriterionResult {
    let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
    let report = divergence_demo(&quintic, 16, 0, 10.0).map_err(|e| e.to_string())?;
    if !report.ignited {
        return Err("the jump never pushed the explicit run past ignition".into());
    }
    let explicit_max = (0..=report.explicit.recorded_steps())
        .map(|n| report.explicit.state(n)[0].abs())
        .fold(0.0, f64::max);
    if !(explicit_max > 1e100) {
        return Err(format!(
            "explicit max |Y| = {explicit_max:.3e} never passed 1e100"
        ));
    }
    if report.explicit.recorded_steps() >= 16 && report.explicit.overflowed_at().is_none() {
        return Err("explicit run reached the horizon without overflowing".into());
    }
    if report.tamed.overflowed_at().is_some() {
        return Err("tamed run overflowed".into());
    }
    let tamed_max = (0..=16)
        .map(|n| report.tamed.state(n)[0].abs())
        .fold(0.0, f64::max);
    if !(tamed_max < 1e3) {
        return Err(format!("tamed max |Y| = {tamed_max:.3e} not below 1e3"));
    }
    if !report.violations.is_empty() {
        return Err(format!("{} domination violations", report.violations.len()));
    }
    Ok(format!(
        "explicit past 1e100 by step {}, tamed max |Y| = {tamed_max:.2}, no violations",
        report.explicit.recorded_steps()
    ))
}

/// 9. Higher moments of the tamed scheme stay bounded uniformly in the
///    resolution (no overflow, max/min spread below 2).
fn criterion_09() -> CriterionResult {
    let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
    let steps_list = [16usize, 32, 64, 128, 256, 512, 1024];
    let rows = moment_sweep(
        &quintic,
        Scheme::Tamed,
        &steps_list,
        4.0,
        5000,
        1009,
        &SolverOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for row in &rows {
        if row.overflowed_fraction != 0.0 {
            return Err(format!(
                "{:.4}% of paths overflowed at N = {}",
                100.0 * row.overflowed_fraction,
                row.steps
            ));
        }
        if !row.max_mean_moment.is_finite() {
            return Err(format!("infinite moment at N = {}", row.steps));
        }
        lo = lo.min(row.max_mean_moment);
        hi = hi.max(row.max_mean_moment);
    }
    if hi / lo >= 2.0 {
        return Err(format!("moment spread {hi:.4}/{lo:.4} exceeds factor 2"));
    }
    Ok(format!(
        "sup_n E||Y_n||^4 in [{lo:.4}, {hi:.4}] across N = 16..1024, no overflow"
    ))
}

/// 10. Advancing tamed paths costs at most a fifth of Newton-based implicit
///     stepping at the same resolution.
fn criterion_10() -> CriterionResult {
    let quintic = make_builtin::<f64>("quintic_gl", None).unwrap();
    let options = SolverOptions::default();
    let grids: Vec<_> = (0..100u64)
        .map(|path_id| sample_grid::<f64>(4096, 1, 1.0, 1010, path_id).unwrap())
        .collect();
    let tamed_wall = measure(|| {
        for grid in &grids {
            std::hint::black_box(tamed_euler(&quintic, grid).unwrap());
        }
    });
    let implicit_wall = measure(|| {
        for grid in &grids {
            std::hint::black_box(implicit_euler(&quintic, grid, &options).unwrap());
        }
    });
    if tamed_wall > implicit_wall / 5.0 {
        return Err(format!(
            "tamed {tamed_wall:.4}s vs implicit {implicit_wall:.4}s: ratio {:.1} < 5",
            implicit_wall / tamed_wall
        ));
    }
    Ok(format!(
        "tamed {:.1}ms vs implicit {:.1}ms (ratio {:.1}x)",
        1e3 * tamed_wall,
        1e3 * implicit_wall,
        implicit_wall / tamed_wall
    ))
}

/// 11. Raising the dimension 10 -> 40 inflates implicit stepping cost
///     superlinearly (>= 8x) while tamed stepping stays near-linear (<= 6x).
fn criterion_11() -> CriterionResult {
    let rows = dimension_scaling::<f64>(
        &[10, 20, 40],
        &[Scheme::Tamed, Scheme::Implicit],
        128,
        500,
        1011,
        &SolverOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let wall = |scheme: Scheme, dim: usize| -> Result<f64, String> {
        rows.iter()
            .find(|r| r.scheme == scheme && r.dim == dim)
            .map(|r| r.wall_seconds)
            .ok_or_else(|| format!("missing row {scheme} d={dim}"))
    };
    let implicit_ratio = wall(Scheme::Implicit, 40)? / wall(Scheme::Implicit, 10)?;
    let tamed_ratio = wall(Scheme::Tamed, 40)? / wall(Scheme::Tamed, 10)?;
    if implicit_ratio < 8.0 {
        return Err(format!("implicit 40/10 ratio {implicit_ratio:.2} < 8"));
    }
    if tamed_ratio > 6.0 {
        return Err(format!("tamed 40/10 ratio {tamed_ratio:.2} > 6"));
    }
    Ok(format!(
        "implicit cost x{implicit_ratio:.1}, tamed cost x{tamed_ratio:.1} from d=10 to d=40"
    ))
}

/// 12. Extrapolating the fitted error law of the cubic run to N = 2^16
///     predicts an error at or below 2e-3.
fn criterion_12() -> CriterionResult {
    let (_, fit, _) = cubic_error_series().as_ref().map_err(Clone::clone)?;
    let predicted = fit.predicted_value(1 << 16);
    if !(predicted > 0.0 && predicted <= 2e-3) {
        return Err(format!(
            "predicted err(2^16) = {predicted:.3e} exceeds 2e-3"
        ));
    }
    Ok(format!("predicted err(2^16) = {predicted:.3e}"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(u32, &str, CriterionFn); 12] = [
        (
            1,
            "tamed strong order 1/2 on the cubic problem",
            criterion_01,
        ),
        (
            2,
            "scheme collapse and exact reference on gbm",
            criterion_02,
        ),
        (3, "tamed strong order 1 under additive noise", criterion_03),
        (4, "dominating process bounds tamed iterates", criterion_04),
        (5, "taming caps drift increments below one", criterion_05),
        (6, "taming defect identity", criterion_06),
        (
            7,
            "closed-form and Newton implicit steps agree",
            criterion_07,
        ),
        (
            8,
            "explicit explodes where tamed stays dominated",
            criterion_08,
        ),
        (
            9,
            "tamed higher moments bounded uniformly in N",
            criterion_09,
        ),
        (
            10,
            "taming is at least 5x cheaper than Newton",
            criterion_10,
        ),
        (
            11,
            "dimension scaling: implicit superlinear, tamed linear",
            criterion_11,
        ),
        (12, "extrapolated accuracy at N = 2^16", criterion_12),
    ];
    let mut failures = Vec::new();
    for (number, title, criterion) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {message}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {number:02}: PASS — {title} ({detail})"),
            Err(reason) => {
                println!("criterion {number:02}: FAIL — {title}: {reason}");
                failures.push(number);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
