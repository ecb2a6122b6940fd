//! Counter-addressable Gaussian generation.
//!
//! Every random draw in the toolkit is a pure function of
//! `(seed, stream, draw index)`, so simulations are bitwise reproducible no
//! matter how work is split across threads or in which order paths run. The
//! recipe is fixed:
//!
//! 1. A ChaCha12 generator is keyed with the 64-bit `seed`
//!    (`ChaCha12Rng::seed_from_u64`) and its 64-bit stream id is set to the
//!    `stream` (the path id for Brownian grids); the k-th 64-bit output of
//!    that stream is draw k.
//! 2. A 64-bit draw maps to the open unit interval as
//!    `((x >> 11) + 0.5) * 2^-53`, which is symmetric and never hits 0 or 1.
//! 3. The uniform value passes through [`standard_normal_quantile`], a
//!    rational approximation of the standard normal inverse CDF in the style
//!    of Wichura's PPND16, accurate to full double precision.
//!
//! Within one increment grid of noise dimension `m`, component `j` of step
//! `n` is draw `n * m + j`; coarsening and cross-resolution coupling never
//! re-draw. All sampling is computed in `f64` regardless of the caller's
//! scalar type.

// The quantile coefficients and the frozen draw oracles in the tests are
// written with their full published precision, beyond what f64 stores.
#![allow(clippy::excessive_precision)]

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Stream id reserved for auxiliary sampling (regularity estimators), so it
/// can never collide with a Brownian path id in the same run.
pub(crate) const AUX_STREAM: u64 = u64::MAX;

/// One keyed stream of uniform and Gaussian draws.
pub struct PathRng {
    rng: ChaCha12Rng,
}

impl PathRng {
    /// Opens the stream identified by `(seed, stream)` at draw 0.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Next uniform draw in the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        let x = self.rng.next_u64();
        ((x >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Next standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        standard_normal_quantile(self.uniform_open())
    }
}

/// Quantile function (inverse CDF) of the standard normal distribution.
///
/// Rational Chebyshev-like approximations on three regions (central,
/// intermediate, far tail), following Wichura's PPND16 layout. Relative error
/// is below 1e-15 over the full open interval.
///
/// # Panics
///
/// Panics when `p` does not lie strictly inside (0, 1).
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "quantile argument must lie strictly inside (0, 1), got {p}"
    );
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        horner(&MIDDLE_NUM, r) / horner(&MIDDLE_DEN, r)
    } else {
        let r = r - 5.0;
        horner(&TAIL_NUM, r) / horner(&TAIL_DEN, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Two-sided 95% coverage factor, `standard_normal_quantile(0.975)`.
pub const NORMAL_QUANTILE_975: f64 = 1.959963984540054;

fn horner(coefficients: &[f64; 8], r: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

const CENTRAL_NUM: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];

const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];

const MIDDLE_NUM: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];

const MIDDLE_DEN: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];

const TAIL_NUM: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];

const TAIL_DEN: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];
