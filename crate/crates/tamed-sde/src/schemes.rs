//! Euler-type one-step schemes for SDEs with superlinearly growing drift.
//!
//! All schemes advance on a fixed increment grid with step `h = T/N`:
//!
//! ```text
//! explicit:  Y_{n+1} = Y_n + h mu(Y_n) + sigma(Y_n) dW_n
//! tamed:     Y_{n+1} = Y_n + h mu(Y_n) / (1 + h ||mu(Y_n)||) + sigma(Y_n) dW_n
//! implicit:  Y_{n+1} = Y_n + h mu(Y_{n+1}) + sigma(Y_n) dW_n
//! ```
//!
//! The tamed drift increment always has norm strictly below one, which is
//! what prevents the explosion the explicit scheme suffers when a large
//! Brownian increment lands in the superlinear region. The difference
//! between a tamed and an explicit step is the second-order defect
//! `-h^2 mu(Y) ||mu(Y)|| / (1 + h ||mu(Y)||)` ([`taming_defect`]), so taming
//! perturbs the explicit scheme only at order `h^2`.
//!
//! The implicit scheme solves `F(y) = y - h mu(y) - a = 0` each step (Newton
//! with a central finite-difference Jacobian, bisection fallback in one
//! dimension); for the cubic problem on unit horizon the root is available in
//! closed form via Cardano ([`implicit_cardano_cubic`]):
//!
//! ```text
//! Y_{n+1} = (sqrt(q^2 + (N-1)^3/27) + q)^(1/3)
//!         - (sqrt(q^2 + (N-1)^3/27) - q)^(1/3),
//! q = Y_n (N/2) (1 + dW_n).
//! ```

use std::fmt;
use std::str::FromStr;

use crate::brownian::IncrementGrid;
use crate::error::{Result, SdeError};
use crate::la;
use crate::model::SdeProblem;
use crate::scalar::{real, real_of_usize, Scalar};

/// The available one-step schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Explicit (forward) Euler; may explode on superlinear drift.
    Explicit,
    /// Tamed Euler with drift increments capped at norm one.
    Tamed,
    /// Implicit (backward) Euler via per-step Newton solves.
    Implicit,
    /// Implicit Euler through the closed-form Cardano step (cubic drift,
    /// unit horizon only).
    ImplicitCardano,
    /// Exact solution map; only produced by reference constructions, never
    /// parsed as a simulation scheme.
    Exact,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Explicit => "explicit",
            Scheme::Tamed => "tamed",
            Scheme::Implicit => "implicit",
            Scheme::ImplicitCardano => "implicit-cardano",
            Scheme::Exact => "exact",
        })
    }
}

impl FromStr for Scheme {
    type Err = SdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "tamed" => Ok(Scheme::Tamed),
            "implicit" => Ok(Scheme::Implicit),
            "implicit-cardano" => Ok(Scheme::ImplicitCardano),
            other => Err(SdeError::Argument(format!(
                "unknown scheme `{other}`; available: explicit, tamed, implicit, implicit-cardano"
            ))),
        }
    }
}

/// Options for the per-step nonlinear solve of the implicit scheme.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T: Scalar> {
    /// Accept a step once the residual norm is at or below this.
    pub residual_tol: T,
    /// Newton update budget per step before falling back or failing.
    pub max_iterations: usize,
    /// Finite-difference scale; the actual offset is `fd_step * (1 + ||y||)`.
    pub fd_step: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            residual_tol: real(1e-12),
            max_iterations: 50,
            fd_step: real(1e-7),
        }
    }
}

/// A discrete trajectory produced by one scheme on one increment grid.
///
/// States are stored row-major, one row of `dim` entries per recorded time
/// `t_n = nT/N`. When a state turns non-finite or exceeds
/// [`Scalar::overflow_limit`] in magnitude, [`DiscretePath::overflowed_at`]
/// records that step index, the offending state is kept as the last row, and
/// iteration stops — so an overflowed path is shorter than `N + 1` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath<T: Scalar> {
    scheme: Scheme,
    steps: usize,
    dim: usize,
    states: Vec<T>,
    overflowed_at: Option<usize>,
    newton_iters: Option<u64>,
}

impl<T: Scalar> DiscretePath<T> {
    /// The scheme that produced this path.
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// The grid resolution `N` the path was computed on.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps actually recorded (`N`, or the overflow index).
    pub fn recorded_steps(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    /// The state at step `n`.
    pub fn state(&self, n: usize) -> &[T] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    /// The last recorded state.
    pub fn last_state(&self) -> &[T] {
        self.state(self.recorded_steps())
    }

    /// First step at which the path overflowed, if it did.
    pub fn overflowed_at(&self) -> Option<usize> {
        self.overflowed_at
    }

    /// Total Newton (plus bisection fallback) iterations, for implicit runs.
    pub fn newton_iters(&self) -> Option<u64> {
        self.newton_iters
    }
}

/// Assembles a path from raw parts; used by reference constructions.
pub(crate) fn path_from_states<T: Scalar>(
    scheme: Scheme,
    steps: usize,
    dim: usize,
    states: Vec<T>,
    overflowed_at: Option<usize>,
    newton_iters: Option<u64>,
) -> DiscretePath<T> {
    debug_assert_eq!(states.len() % dim, 0);
    DiscretePath {
        scheme,
        steps,
        dim,
        states,
        overflowed_at,
        newton_iters,
    }
}

/// Runs `scheme` on the grid; the uniform entry point used by the error and
/// benchmark machinery.
pub fn run_scheme<T: Scalar>(
    problem: &SdeProblem<T>,
    grid: &IncrementGrid<T>,
    scheme: Scheme,
    options: &SolverOptions<T>,
) -> Result<DiscretePath<T>> {
    match scheme {
        Scheme::Explicit => explicit_euler(problem, grid),
        Scheme::Tamed => tamed_euler(problem, grid),
        Scheme::Implicit => implicit_euler(problem, grid, options),
        Scheme::ImplicitCardano => {
            if problem.label() != "cubic_gl" {
                return Err(SdeError::Argument(format!(
                    "the closed-form implicit step is derived for cubic_gl, not `{}`",
                    problem.label()
                )));
            }
            implicit_cardano_cubic(problem.initial_value()[0], grid)
        }
        Scheme::Exact => Err(SdeError::Argument(
            "the exact map is a reference construction, not a runnable scheme".into(),
        )),
    }
}

/// Explicit (forward) Euler. Diverges with positive probability when the
/// drift grows superlinearly; overflow is recorded, not an error.
pub fn explicit_euler<T: Scalar>(
    problem: &SdeProblem<T>,
    grid: &IncrementGrid<T>,
) -> Result<DiscretePath<T>> {
    check_compatible(problem, grid)?;
    let h = grid.dt();
    step_loop(problem, grid, Scheme::Explicit, None, |drift, _| {
        for slot in drift.iter_mut() {
            *slot = h * *slot;
        }
    })
}

/// Tamed Euler: the drift increment `h mu / (1 + h ||mu||)` has norm
/// strictly below one, asserted on every step.
pub fn tamed_euler<T: Scalar>(
    problem: &SdeProblem<T>,
    grid: &IncrementGrid<T>,
) -> Result<DiscretePath<T>> {
    check_compatible(problem, grid)?;
    let h = grid.dt();
    step_loop(problem, grid, Scheme::Tamed, None, |drift, _| {
        for slot in drift.iter_mut() {
            *slot = h * *slot;
        }
        let denominator = T::one() + la::norm(drift);
        for slot in drift.iter_mut() {
            *slot = *slot / denominator;
        }
        let increment_norm = la::norm(drift);
        assert!(
            increment_norm < T::one(),
            "tamed drift increment must have norm < 1, got {increment_norm}"
        );
    })
}

/// Shared stepping loop: `make_increment` turns `mu(Y_n)` (passed in the
/// buffer) into the drift increment in place.
fn step_loop<T: Scalar>(
    problem: &SdeProblem<T>,
    grid: &IncrementGrid<T>,
    scheme: Scheme,
    newton_iters: Option<u64>,
    mut make_increment: impl FnMut(&mut [T], usize),
) -> Result<DiscretePath<T>> {
    let d = problem.dim_state();
    let n_steps = grid.steps();
    let mut states = Vec::with_capacity((n_steps + 1) * d);
    states.extend_from_slice(problem.initial_value());
    let mut y = problem.initial_value().to_vec();
    let mut drift = vec![T::zero(); d];
    let mut noise = vec![T::zero(); d];
    let mut overflowed_at = None;
    for n in 0..n_steps {
        problem.drift_into(&y, &mut drift);
        make_increment(&mut drift, n);
        problem.diffusion_apply(&y, grid.increment(n), &mut noise);
        for i in 0..d {
            y[i] = y[i] + drift[i] + noise[i];
        }
        states.extend_from_slice(&y);
        if state_overflowed(&y) {
            overflowed_at = Some(n + 1);
            break;
        }
    }
    Ok(DiscretePath {
        scheme,
        steps: n_steps,
        dim: d,
        states,
        overflowed_at,
        newton_iters,
    })
}

fn state_overflowed<T: Scalar>(y: &[T]) -> bool {
    y.iter()
        .any(|x| !x.is_finite() || x.abs() > T::overflow_limit())
}

fn check_compatible<T: Scalar>(problem: &SdeProblem<T>, grid: &IncrementGrid<T>) -> Result<()> {
    if grid.dim_noise() != problem.dim_noise() {
        return Err(SdeError::Argument(format!(
            "grid noise dimension {} does not match problem noise dimension {}",
            grid.dim_noise(),
            problem.dim_noise()
        )));
    }
    if grid.horizon() != problem.horizon() {
        return Err(SdeError::Argument(format!(
            "grid horizon {} does not match problem horizon {}",
            grid.horizon(),
            problem.horizon()
        )));
    }
    Ok(())
}

/// The elementwise difference between a tamed and an explicit Euler step from
/// `state` at resolution `steps`:
///
/// ```text
/// -(T/N)^2 mu(y) ||mu(y)|| / (1 + (T/N) ||mu(y)||)
/// ```
pub fn taming_defect<T: Scalar>(
    problem: &SdeProblem<T>,
    state: &[T],
    steps: usize,
) -> Result<Vec<T>> {
    if state.len() != problem.dim_state() {
        return Err(SdeError::Argument(format!(
            "state dimension {} does not match problem dimension {}",
            state.len(),
            problem.dim_state()
        )));
    }
    if steps == 0 {
        return Err(SdeError::Argument("step count must be positive".into()));
    }
    let h = problem.horizon() / real_of_usize(steps);
    let mut mu = vec![T::zero(); state.len()];
    problem.drift_into(state, &mut mu);
    let mu_norm = la::norm(&mu);
    let denominator = T::one() + h * mu_norm;
    for slot in mu.iter_mut() {
        *slot = -(h * h * *slot * mu_norm) / denominator;
    }
    Ok(mu)
}

/// Evaluates the time-continuous tamed interpolant at `t`:
///
/// ```text
/// Ybar_t = Y_n + (t - t_n) mu(Y_n) / (1 + h ||mu(Y_n)||)
///        + sigma(Y_n) (W_t - W_{t_n}),    n = floor(t N / T),
/// ```
///
/// with `n = N - 1` at `t = T`. The caller supplies `W_t` (`w_at_t`)
/// consistent with the grid's Brownian path; `W_{t_n}` is accumulated from
/// the grid increments.
pub fn tamed_interpolant<T: Scalar>(
    problem: &SdeProblem<T>,
    path: &DiscretePath<T>,
    grid: &IncrementGrid<T>,
    t: T,
    w_at_t: &[T],
) -> Result<Vec<T>> {
    check_compatible(problem, grid)?;
    if path.scheme() != Scheme::Tamed || path.recorded_steps() != grid.steps() {
        return Err(SdeError::Argument(
            "interpolant needs the complete tamed path of the given grid".into(),
        ));
    }
    if w_at_t.len() != grid.dim_noise() {
        return Err(SdeError::Argument(format!(
            "W_t has dimension {}, expected {}",
            w_at_t.len(),
            grid.dim_noise()
        )));
    }
    let horizon = grid.horizon();
    if !(t >= T::zero() && t <= horizon) {
        return Err(SdeError::Argument(format!(
            "time {t} outside [0, {horizon}]"
        )));
    }
    let n_steps = grid.steps();
    let d = problem.dim_state();
    let position = t * real_of_usize::<T>(n_steps) / horizon;
    let n = (position.floor().to_usize().unwrap_or(0)).min(n_steps - 1);
    let t_n = horizon * real_of_usize::<T>(n) / real_of_usize::<T>(n_steps);
    let y = path.state(n);
    let h = grid.dt();

    let mut mu = vec![T::zero(); d];
    problem.drift_into(y, &mut mu);
    let tamed_denominator = T::one() + h * la::norm(&mu);

    // W_{t_n} per component, ascending index order.
    let m = grid.dim_noise();
    let mut w_anchor = vec![T::zero(); m];
    for k in 0..n {
        for (slot, &inc) in w_anchor.iter_mut().zip(grid.increment(k)) {
            *slot += inc;
        }
    }
    let mut dw = vec![T::zero(); m];
    for j in 0..m {
        dw[j] = w_at_t[j] - w_anchor[j];
    }
    let mut noise = vec![T::zero(); d];
    problem.diffusion_apply(y, &dw, &mut noise);

    let mut value = vec![T::zero(); d];
    for i in 0..d {
        value[i] = y[i] + (t - t_n) * mu[i] / tamed_denominator + noise[i];
    }
    Ok(value)
}

/// Implicit (backward) Euler.
///
/// Requires `N > cT` so the per-step map `y -> y - h mu(y)` is strongly
/// monotone and the root unique. Each step solves
/// `F(y) = y - h mu(y) - a = 0` by Newton with a central finite-difference
/// Jacobian; a one-dimensional step that exhausts its Newton budget falls
/// back to bisection on a bracketing interval, higher dimensions fail with a
/// solver error naming the step.
pub fn implicit_euler<T: Scalar>(
    problem: &SdeProblem<T>,
    grid: &IncrementGrid<T>,
    options: &SolverOptions<T>,
) -> Result<DiscretePath<T>> {
    check_compatible(problem, grid)?;
    let ct = problem.reg_constant() * problem.horizon();
    if real_of_usize::<T>(grid.steps()) <= ct {
        return Err(SdeError::Precondition(format!(
            "implicit Euler needs steps > c*T for a unique per-step root (steps = {}, c*T = {ct})",
            grid.steps()
        )));
    }
    let d = problem.dim_state();
    let n_steps = grid.steps();
    let h = grid.dt();
    let mut states = Vec::with_capacity((n_steps + 1) * d);
    states.extend_from_slice(problem.initial_value());
    let mut y = problem.initial_value().to_vec();
    let mut noise = vec![T::zero(); d];
    let mut rhs = vec![T::zero(); d];
    let mut workspace = NewtonWorkspace::new(d);
    let mut overflowed_at = None;
    let mut total_iters = 0u64;
    for n in 0..n_steps {
        problem.diffusion_apply(&y, grid.increment(n), &mut noise);
        for i in 0..d {
            rhs[i] = y[i] + noise[i];
        }
        total_iters += solve_implicit_step(problem, h, &rhs, &mut y, options, &mut workspace, n)?;
        states.extend_from_slice(&y);
        if state_overflowed(&y) {
            overflowed_at = Some(n + 1);
            break;
        }
    }
    Ok(DiscretePath {
        scheme: Scheme::Implicit,
        steps: n_steps,
        dim: d,
        states,
        overflowed_at,
        newton_iters: Some(total_iters),
    })
}

struct NewtonWorkspace<T> {
    residual: Vec<T>,
    mu: Vec<T>,
    mu_plus: Vec<T>,
    mu_minus: Vec<T>,
    jacobian: Vec<T>,
    update: Vec<T>,
    probe: Vec<T>,
}

impl<T: Scalar> NewtonWorkspace<T> {
    fn new(d: usize) -> Self {
        Self {
            residual: vec![T::zero(); d],
            mu: vec![T::zero(); d],
            mu_plus: vec![T::zero(); d],
            mu_minus: vec![T::zero(); d],
            jacobian: vec![T::zero(); d * d],
            update: vec![T::zero(); d],
            probe: vec![T::zero(); d],
        }
    }
}

/// Solves `y - h mu(y) - a = 0` starting from `y = a`; returns the number of
/// solver iterations spent.
fn solve_implicit_step<T: Scalar>(
    problem: &SdeProblem<T>,
    h: T,
    a: &[T],
    y: &mut [T],
    options: &SolverOptions<T>,
    ws: &mut NewtonWorkspace<T>,
    step_index: usize,
) -> Result<u64> {
    let d = a.len();
    y.copy_from_slice(a);
    let mut iterations = 0u64;
    loop {
        problem.drift_into(y, &mut ws.mu);
        for i in 0..d {
            ws.residual[i] = y[i] - h * ws.mu[i] - a[i];
        }
        let residual_norm = la::norm(&ws.residual);
        if residual_norm <= options.residual_tol {
            return Ok(iterations);
        }
        if iterations >= options.max_iterations as u64 || !residual_norm.is_finite() {
            break;
        }
        let delta = options.fd_step * (T::one() + la::norm(y));
        ws.probe.copy_from_slice(y);
        for j in 0..d {
            let saved = ws.probe[j];
            ws.probe[j] = saved + delta;
            problem.drift_into(&ws.probe, &mut ws.mu_plus);
            ws.probe[j] = saved - delta;
            problem.drift_into(&ws.probe, &mut ws.mu_minus);
            ws.probe[j] = saved;
            for i in 0..d {
                let derivative = (ws.mu_plus[i] - ws.mu_minus[i]) / (delta + delta);
                let identity = if i == j { T::one() } else { T::zero() };
                ws.jacobian[i * d + j] = identity - h * derivative;
            }
        }
        ws.update.copy_from_slice(&ws.residual);
        if la::lu_solve(&mut ws.jacobian, &mut ws.update).is_none() {
            break;
        }
        for (y_i, &update_i) in y.iter_mut().zip(&ws.update) {
            *y_i -= update_i;
        }
        iterations += 1;
    }
    if d == 1 {
        let (root, bisections) = bisect_implicit_step(problem, h, a[0], options, step_index)?;
        y[0] = root;
        return Ok(iterations + bisections);
    }
    Err(SdeError::Solver {
        step: step_index,
        message: format!(
            "Newton did not reach residual {} within {} iterations",
            options.residual_tol, options.max_iterations
        ),
    })
}

/// Bisection fallback for scalar steps. `F(y) = y - h mu(y) - a` is strictly
/// increasing under the scheme's precondition, so a sign change brackets the
/// unique root.
fn bisect_implicit_step<T: Scalar>(
    problem: &SdeProblem<T>,
    h: T,
    a: T,
    options: &SolverOptions<T>,
    step_index: usize,
) -> Result<(T, u64)> {
    let mut mu = [T::zero()];
    let residual = |y: T, mu: &mut [T; 1]| {
        problem.drift_into(&[y], mu);
        y - h * mu[0] - a
    };
    let f_a = residual(a, &mut mu);
    if !f_a.is_finite() {
        return Err(SdeError::Solver {
            step: step_index,
            message: format!("residual is non-finite at the step's right side {a}"),
        });
    }
    let mut width = T::one().max(a.abs());
    let (mut lo, mut hi) = (a, a);
    let (mut f_lo, mut f_hi) = (f_a, f_a);
    let mut spent = 0u64;
    for _ in 0..200 {
        if f_lo < T::zero() && f_hi > T::zero() {
            break;
        }
        spent += 1;
        if f_a > T::zero() {
            lo -= width;
            f_lo = residual(lo, &mut mu);
        } else {
            hi += width;
            f_hi = residual(hi, &mut mu);
        }
        width += width;
    }
    if !(f_lo < T::zero() && f_hi > T::zero()) {
        return Err(SdeError::Solver {
            step: step_index,
            message: "bisection fallback found no bracketing interval".into(),
        });
    }
    for _ in 0..500 {
        spent += 1;
        let mid = (lo + hi) / real(2.0);
        let f_mid = residual(mid, &mut mu);
        if f_mid.abs() <= options.residual_tol {
            return Ok((mid, spent));
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if f_mid < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(SdeError::Solver {
        step: step_index,
        message: format!(
            "bisection exhausted the interval without reaching residual {}",
            options.residual_tol
        ),
    })
}

/// Implicit Euler for the cubic problem (`mu(x) = x - x^3`, unit horizon)
/// through Cardano's closed form; no iteration, no tolerance.
///
/// Each step solves `y^3 + (N-1) y = N Y_n (1 + dW_n)` exactly:
///
/// ```text
/// q = Y_n (N/2) (1 + dW_n),    v = (N-1)^3 / 27,
/// Y_{n+1} = cbrt(sqrt(q^2 + v) + q) - cbrt(sqrt(q^2 + v) - q),
/// ```
///
/// evaluated in the cancellation-free form `sqrt(q^2+v) - |q| = v / (sqrt(q^2+v) + |q|)`.
/// Needs `N >= 2` (the linear coefficient must be positive) and scalar noise.
pub fn implicit_cardano_cubic<T: Scalar>(
    initial: T,
    grid: &IncrementGrid<T>,
) -> Result<DiscretePath<T>> {
    if grid.dim_noise() != 1 {
        return Err(SdeError::Argument(format!(
            "closed-form implicit step needs scalar noise, got dimension {}",
            grid.dim_noise()
        )));
    }
    if grid.steps() < 2 {
        return Err(SdeError::Argument(
            "closed-form implicit step needs at least 2 steps".into(),
        ));
    }
    if grid.horizon() != T::one() {
        return Err(SdeError::Argument(format!(
            "closed-form implicit step is derived for unit horizon, got {}",
            grid.horizon()
        )));
    }
    let n_steps = grid.steps();
    let n_real = real_of_usize::<T>(n_steps);
    let half_n = n_real / real(2.0);
    let v = (n_real - T::one()).powi(3) / real(27.0);
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(initial);
    let mut y = initial;
    for n in 0..n_steps {
        let q = y * half_n * (T::one() + grid.increment(n)[0]);
        let root = (q * q + v).sqrt();
        let far = root + q.abs();
        let near = v / far;
        y = if q >= T::zero() {
            far.cbrt() - near.cbrt()
        } else {
            near.cbrt() - far.cbrt()
        };
        states.push(y);
    }
    Ok(DiscretePath {
        scheme: Scheme::ImplicitCardano,
        steps: n_steps,
        dim: 1,
        states,
        overflowed_at: None,
        newton_iters: None,
    })
}
