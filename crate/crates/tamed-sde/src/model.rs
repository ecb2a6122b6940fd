//! SDE problem descriptions and the built-in test problems.
//!
//! A problem is the autonomous Itô equation
//!
//! ```text
//! dX_t = mu(X_t) dt + sigma(X_t) dW_t,    X_0 = xi,    t in [0, T],
//! ```
//!
//! with `mu: R^d -> R^d`, `sigma: R^d -> R^{d x m}`, and a deterministic
//! initial value. The drift may grow superlinearly; the class covered here is
//! characterised by one constant `c >= 1` bounding all three of
//!
//! * the one-sided Lipschitz quotient `<x-y, mu(x)-mu(y)> / ||x-y||^2 <= c`,
//! * the diffusion Lipschitz quotient `||sigma(x)-sigma(y)|| / ||x-y|| <= c`,
//! * the drift derivative growth `||mu'(x)|| <= c (1 + ||x||^c)`.
//!
//! [`SdeProblem::reg_constant`] stores such a `c`; the Monte Carlo estimators
//! in this module let tests confirm the witnessed bounds.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SdeError};
use crate::la;
use crate::rng::{PathRng, AUX_STREAM};
use crate::scalar::{real, real_of_usize, Scalar};

/// A vector field writing its value into the output slice.
pub type VectorField<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;
/// A scalar coefficient function.
pub type ScalarField<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Diffusion coefficient `sigma: R^d -> R^{d x m}`.
///
/// The structured variants let the steppers apply `sigma(x) dW` in `O(d)`
/// instead of materialising a matrix; [`Diffusion::Dense`] covers everything
/// else with a row-major `d x m` writer.
#[derive(Clone)]
pub enum Diffusion<T: Scalar> {
    /// `sigma(x) = I` (additive unit noise); requires `m = d`.
    Identity,
    /// `sigma(x) = [f(x)]` for scalar problems; requires `d = m = 1`.
    Scalar(ScalarField<T>),
    /// General coefficient writing the row-major `d x m` matrix.
    Dense(VectorField<T>),
}

/// An SDE problem, immutable after construction and shareable across worker
/// threads.
#[derive(Clone)]
pub struct SdeProblem<T: Scalar> {
    label: String,
    dim_state: usize,
    dim_noise: usize,
    horizon: T,
    initial: Vec<T>,
    reg_constant: T,
    drift: VectorField<T>,
    diffusion: Diffusion<T>,
}

impl<T: Scalar> fmt::Debug for SdeProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("label", &self.label)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("horizon", &self.horizon)
            .field("reg_constant", &self.reg_constant)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> SdeProblem<T> {
    /// Builds a problem after validating its shape.
    ///
    /// `drift` writes `mu(x)` into its second argument (length `d`, with
    /// `d = initial.len()`). Errors: empty initial value or non-finite
    /// entries, non-positive or non-finite horizon, `reg_constant < 1`,
    /// `dim_noise = 0`, or a structured diffusion whose shape constraint
    /// fails.
    pub fn new(
        label: impl Into<String>,
        horizon: T,
        initial: Vec<T>,
        dim_noise: usize,
        reg_constant: T,
        drift: VectorField<T>,
        diffusion: Diffusion<T>,
    ) -> Result<Self> {
        let label = label.into();
        let dim_state = initial.len();
        if dim_state == 0 {
            return Err(SdeError::Config("initial value must be non-empty".into()));
        }
        if initial.iter().any(|x| !x.is_finite()) {
            return Err(SdeError::Config(format!(
                "initial value must be finite, got {initial:?}"
            )));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(SdeError::Config(format!(
                "time horizon must be positive and finite, got {horizon}"
            )));
        }
        if !(reg_constant >= T::one()) {
            return Err(SdeError::Config(format!(
                "regularity constant must be at least 1, got {reg_constant}"
            )));
        }
        if dim_noise == 0 {
            return Err(SdeError::Config("noise dimension must be positive".into()));
        }
        match diffusion {
            Diffusion::Identity if dim_noise != dim_state => {
                return Err(SdeError::Config(format!(
                    "identity diffusion requires dim_noise = dim_state, got {dim_noise} vs {dim_state}"
                )));
            }
            Diffusion::Scalar(_) if dim_state != 1 || dim_noise != 1 => {
                return Err(SdeError::Config(
                    "scalar diffusion requires a one-dimensional problem".into(),
                ));
            }
            _ => {}
        }
        Ok(Self {
            label,
            dim_state,
            dim_noise,
            horizon,
            initial,
            reg_constant,
            drift,
            diffusion,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn initial_value(&self) -> &[T] {
        &self.initial
    }

    /// The regularity constant `c` bounding the three growth conditions.
    pub fn reg_constant(&self) -> T {
        self.reg_constant
    }

    /// Evaluates `mu(x)` into `out`.
    pub fn drift_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(out.len(), self.dim_state);
        (self.drift)(x, out);
    }

    /// Evaluates `sigma(x) dw` into `out` without materialising the matrix.
    pub fn diffusion_apply(&self, x: &[T], dw: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(dw.len(), self.dim_noise);
        debug_assert_eq!(out.len(), self.dim_state);
        match &self.diffusion {
            Diffusion::Identity => out.copy_from_slice(dw),
            Diffusion::Scalar(f) => out[0] = f(x[0]) * dw[0],
            Diffusion::Dense(writer) => {
                let m = self.dim_noise;
                let mut matrix = vec![T::zero(); self.dim_state * m];
                writer(x, &mut matrix);
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = la::dot(&matrix[i * m..(i + 1) * m], dw);
                }
            }
        }
    }

    /// Writes the row-major `d x m` matrix `sigma(x)` into `out`.
    pub fn diffusion_matrix(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(out.len(), self.dim_state * self.dim_noise);
        match &self.diffusion {
            Diffusion::Identity => {
                out.fill(T::zero());
                for i in 0..self.dim_state {
                    out[i * self.dim_noise + i] = T::one();
                }
            }
            Diffusion::Scalar(f) => out[0] = f(x[0]),
            Diffusion::Dense(writer) => writer(x, out),
        }
    }

    /// Operator norm of `sigma(x)`.
    pub fn diffusion_operator_norm(&self, x: &[T]) -> T {
        match &self.diffusion {
            Diffusion::Identity => T::one(),
            Diffusion::Scalar(f) => f(x[0]).abs(),
            Diffusion::Dense(_) => {
                let mut matrix = vec![T::zero(); self.dim_state * self.dim_noise];
                self.diffusion_matrix(x, &mut matrix);
                la::operator_norm(&matrix, self.dim_state, self.dim_noise)
            }
        }
    }
}

/// Builds one of the built-in problems by label.
///
/// | label                  | equation                                        | c |
/// |------------------------|--------------------------------------------------|---|
/// | `quintic_gl`           | `dX = -X^5 dt + X dW`, `X_0 = 1`, `T = 1`        | 5 |
/// | `cubic_gl`             | `dX = (X - X^3) dt + X dW`, `X_0 = 1`, `T = 1`   | 3 |
/// | `langevin_double_well` | `dX = (1 - ||X||^2) X dt + dW`, `X_0 = 0`, `T = 1` | 3 |
/// | `gbm`                  | `dX = X dW`, `X_0 = 1`, `T = 1`                  | 1 |
///
/// `dim` selects the state dimension of `langevin_double_well` (default 10);
/// the scalar problems accept only `None` or `Some(1)`. Unknown labels and
/// invalid dimensions are configuration errors.
pub fn make_builtin<T: Scalar>(label: &str, dim: Option<usize>) -> Result<SdeProblem<T>> {
    let require_scalar = |label: &str| -> Result<()> {
        match dim {
            None | Some(1) => Ok(()),
            Some(d) => Err(SdeError::Config(format!(
                "problem `{label}` is one-dimensional, got dim = {d}"
            ))),
        }
    };
    match label {
        "quintic_gl" => {
            require_scalar(label)?;
            SdeProblem::new(
                label,
                T::one(),
                vec![T::one()],
                1,
                real(5.0),
                Arc::new(|x: &[T], out: &mut [T]| out[0] = -x[0].powi(5)),
                Diffusion::Scalar(Arc::new(|x| x)),
            )
        }
        "cubic_gl" => {
            require_scalar(label)?;
            SdeProblem::new(
                label,
                T::one(),
                vec![T::one()],
                1,
                real(3.0),
                Arc::new(|x: &[T], out: &mut [T]| out[0] = x[0] - x[0].powi(3)),
                Diffusion::Scalar(Arc::new(|x| x)),
            )
        }
        "gbm" => {
            require_scalar(label)?;
            SdeProblem::new(
                label,
                T::one(),
                vec![T::one()],
                1,
                T::one(),
                Arc::new(|_x: &[T], out: &mut [T]| out[0] = T::zero()),
                Diffusion::Scalar(Arc::new(|x| x)),
            )
        }
        "langevin_double_well" => {
            let d = dim.unwrap_or(10);
            if d == 0 {
                return Err(SdeError::Config(
                    "langevin_double_well needs dim >= 1".into(),
                ));
            }
            SdeProblem::new(
                label,
                T::one(),
                vec![T::zero(); d],
                d,
                real(3.0),
                Arc::new(|x: &[T], out: &mut [T]| {
                    let factor = T::one() - la::dot(x, x);
                    for (slot, &xi) in out.iter_mut().zip(x) {
                        *slot = factor * xi;
                    }
                }),
                Diffusion::Identity,
            )
        }
        other => Err(SdeError::Config(format!(
            "unknown problem `{other}`; available: quintic_gl, cubic_gl, langevin_double_well, gbm"
        ))),
    }
}

/// Monte Carlo estimate of the one-sided Lipschitz constant of the drift:
/// the largest observed `<x-y, mu(x)-mu(y)> / ||x-y||^2` over `samples`
/// independent point pairs drawn uniformly from the ball of the given
/// radius.
///
/// Deterministic for a fixed seed. A non-finite drift value at a sampled
/// point is a numeric error carrying the offending input.
pub fn estimate_one_sided_lipschitz<T: Scalar>(
    problem: &SdeProblem<T>,
    samples: usize,
    radius: T,
    seed: u64,
) -> Result<T> {
    estimate_quotient(problem, samples, radius, seed, |problem, x, y, buffers| {
        let (mu_x, mu_y) = buffers;
        problem.drift_into(x, mu_x);
        problem.drift_into(y, mu_y);
        if mu_x.iter().chain(mu_y.iter()).any(|v| !v.is_finite()) {
            return Err(SdeError::Numeric(format!(
                "drift is non-finite at sampled points {x:?} / {y:?}"
            )));
        }
        let mut inner = T::zero();
        let mut dist_sq = T::zero();
        for i in 0..x.len() {
            let dx = x[i] - y[i];
            inner += dx * (mu_x[i] - mu_y[i]);
            dist_sq += dx * dx;
        }
        Ok(inner / dist_sq)
    })
}

/// Monte Carlo estimate of the diffusion Lipschitz constant: the largest
/// observed `||sigma(x)-sigma(y)|| / ||x-y||` (operator norm) over pairs
/// sampled as in [`estimate_one_sided_lipschitz`].
pub fn estimate_diffusion_lipschitz<T: Scalar>(
    problem: &SdeProblem<T>,
    samples: usize,
    radius: T,
    seed: u64,
) -> Result<T> {
    let d = problem.dim_state();
    let m = problem.dim_noise();
    let mut sigma_x = vec![T::zero(); d * m];
    let mut sigma_y = vec![T::zero(); d * m];
    estimate_quotient(problem, samples, radius, seed, |problem, x, y, _| {
        problem.diffusion_matrix(x, &mut sigma_x);
        problem.diffusion_matrix(y, &mut sigma_y);
        if sigma_x.iter().chain(sigma_y.iter()).any(|v| !v.is_finite()) {
            return Err(SdeError::Numeric(format!(
                "diffusion is non-finite at sampled points {x:?} / {y:?}"
            )));
        }
        for (sx, &sy) in sigma_x.iter_mut().zip(&sigma_y) {
            *sx -= sy;
        }
        Ok(la::operator_norm(&sigma_x, d, m) / la::distance(x, y))
    })
}

fn estimate_quotient<T: Scalar>(
    problem: &SdeProblem<T>,
    samples: usize,
    radius: T,
    seed: u64,
    mut quotient: impl FnMut(&SdeProblem<T>, &[T], &[T], (&mut [T], &mut [T])) -> Result<T>,
) -> Result<T> {
    if samples == 0 {
        return Err(SdeError::Argument("sample count must be positive".into()));
    }
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(SdeError::Argument(format!(
            "sampling radius must be positive and finite, got {radius}"
        )));
    }
    let d = problem.dim_state();
    let mut rng = PathRng::new(seed, AUX_STREAM);
    let mut x = vec![T::zero(); d];
    let mut y = vec![T::zero(); d];
    let mut buf_a = vec![T::zero(); d];
    let mut buf_b = vec![T::zero(); d];
    let mut largest = T::neg_infinity();
    for _ in 0..samples {
        sample_in_ball(&mut rng, radius, &mut x);
        sample_in_ball(&mut rng, radius, &mut y);
        if la::distance(&x, &y) == T::zero() {
            continue;
        }
        largest = largest.max(quotient(problem, &x, &y, (&mut buf_a, &mut buf_b))?);
    }
    Ok(largest)
}

/// Uniform draw from the ball of the given radius: Gaussian direction scaled
/// by `radius * u^{1/d}`.
fn sample_in_ball<T: Scalar>(rng: &mut PathRng, radius: T, out: &mut [T]) {
    let d = out.len();
    loop {
        for slot in out.iter_mut() {
            *slot = real(rng.standard_normal());
        }
        let norm = la::norm(out);
        if norm > T::zero() {
            let u: T = real(rng.uniform_open());
            let scale = radius * u.powf(T::one() / real_of_usize(d)) / norm;
            for slot in out.iter_mut() {
                *slot *= scale;
            }
            return;
        }
    }
}
