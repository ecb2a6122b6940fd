//! Reproducible Brownian increment grids and coupling across resolutions.
//!
//! A grid holds the `N x m` increments `dW_n = W_{(n+1)T/N} - W_{nT/N}` of an
//! `m`-dimensional Brownian motion on `[0, T]`, each component drawn as
//! `sqrt(T/N) * z` with `z` standard normal from the keyed generator in
//! [`crate::rng`]. Because a draw is addressed purely by
//! `(seed, path_id, step, component)`, regenerating a grid is bitwise stable.
//!
//! Two resolutions of the *same* Brownian path are always coupled by sampling
//! once at the finest level and summing blocks of increments ([`coarsen`]);
//! nothing is ever interpolated upward. Block sums use balanced pairwise
//! summation, which makes a factor-4 coarsening bitwise identical to two
//! successive factor-2 coarsenings.

use std::io::{Read, Write};

use crate::error::{Result, SdeError};
use crate::rng::PathRng;
use crate::scalar::{real, real_of_usize, Scalar};

/// Increments of one Brownian path on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementGrid<T: Scalar> {
    steps: usize,
    dim_noise: usize,
    horizon: T,
    increments: Vec<T>,
    seed: u64,
    path_id: u64,
}

impl<T: Scalar> IncrementGrid<T> {
    /// Wraps explicit increment data (testing, forced scenarios).
    ///
    /// `increments` is row-major `steps x dim_noise`.
    pub fn from_parts(
        steps: usize,
        dim_noise: usize,
        horizon: T,
        increments: Vec<T>,
        seed: u64,
        path_id: u64,
    ) -> Result<Self> {
        if steps == 0 || dim_noise == 0 {
            return Err(SdeError::Argument(
                "grid needs at least one step and one noise dimension".into(),
            ));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(SdeError::Argument(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if increments.len() != steps * dim_noise {
            return Err(SdeError::Argument(format!(
                "expected {} increments ({} steps x {} components), got {}",
                steps * dim_noise,
                steps,
                dim_noise,
                increments.len()
            )));
        }
        Ok(Self {
            steps,
            dim_noise,
            horizon,
            increments,
            seed,
            path_id,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    /// Step size `T/N`.
    pub fn dt(&self) -> T {
        self.horizon / real_of_usize(self.steps)
    }

    /// The increment vector of step `n`.
    pub fn increment(&self, n: usize) -> &[T] {
        &self.increments[n * self.dim_noise..(n + 1) * self.dim_noise]
    }

    /// All increments, row-major `steps x dim_noise`.
    pub fn increments(&self) -> &[T] {
        &self.increments
    }

    /// Brownian path values at the grid times: `W_{t_n}` for `n = 0..=N`,
    /// row-major `(N+1) x m`, accumulated in ascending index order.
    pub fn cumulative(&self) -> Vec<T> {
        let m = self.dim_noise;
        let mut w = vec![T::zero(); (self.steps + 1) * m];
        for n in 0..self.steps {
            for j in 0..m {
                w[(n + 1) * m + j] = w[n * m + j] + self.increments[n * m + j];
            }
        }
        w
    }

    /// Method form of [`coarsen`].
    pub fn coarsen(&self, factor: usize) -> Result<IncrementGrid<T>> {
        coarsen(self, factor)
    }
}

/// Samples the increment grid of path `path_id` at resolution `steps`.
///
/// Component `j` of step `n` consumes draw `n * dim_noise + j` of the
/// `(seed, path_id)` stream, so the result does not depend on call order or
/// threading. Sampling is computed in `f64` and converted to the working
/// scalar type.
pub fn sample_grid<T: Scalar>(
    steps: usize,
    dim_noise: usize,
    horizon: T,
    seed: u64,
    path_id: u64,
) -> Result<IncrementGrid<T>> {
    if steps == 0 || dim_noise == 0 {
        return Err(SdeError::Argument(
            "grid needs at least one step and one noise dimension".into(),
        ));
    }
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(SdeError::Argument(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    let horizon_f64 = horizon
        .to_f64()
        .expect("horizon representable as f64 for sampling");
    let scale = (horizon_f64 / steps as f64).sqrt();
    let mut rng = PathRng::new(seed, path_id);
    let mut increments = Vec::with_capacity(steps * dim_noise);
    for _ in 0..steps * dim_noise {
        increments.push(real::<T>(scale * rng.standard_normal()));
    }
    IncrementGrid::from_parts(steps, dim_noise, horizon, increments, seed, path_id)
}

/// Coarsens a grid by an integer factor: increment `k` of the result is the
/// sum of fine increments `k*factor ..= (k+1)*factor - 1`, per component.
///
/// `factor` must divide `steps`. Blocks are summed by balanced pairwise
/// halving, so `coarsen(coarsen(g, 2), 2)` equals `coarsen(g, 4)` bitwise.
pub fn coarsen<T: Scalar>(grid: &IncrementGrid<T>, factor: usize) -> Result<IncrementGrid<T>> {
    if factor == 0 {
        return Err(SdeError::Argument(
            "coarsening factor must be positive".into(),
        ));
    }
    if !grid.steps.is_multiple_of(factor) {
        return Err(SdeError::Argument(format!(
            "coarsening factor {factor} does not divide {} steps",
            grid.steps
        )));
    }
    let coarse_steps = grid.steps / factor;
    let m = grid.dim_noise;
    let mut increments = Vec::with_capacity(coarse_steps * m);
    for k in 0..coarse_steps {
        for j in 0..m {
            increments.push(block_sum(&grid.increments, (k * factor) * m + j, m, factor));
        }
    }
    IncrementGrid::from_parts(
        coarse_steps,
        m,
        grid.horizon,
        increments,
        grid.seed,
        grid.path_id,
    )
}

/// Balanced pairwise sum of `count` elements starting at `start`, `stride`
/// apart.
fn block_sum<T: Scalar>(data: &[T], start: usize, stride: usize, count: usize) -> T {
    match count {
        1 => data[start],
        2 => data[start] + data[start + stride],
        _ => {
            let half = count / 2;
            block_sum(data, start, stride, half)
                + block_sum(data, start + half * stride, stride, count - half)
        }
    }
}

/// Writes a grid as a little-endian binary dump for debugging.
///
/// Layout: `steps: u64`, `dim_noise: u64`, `horizon: f64`, `seed: u64`,
/// `path_id: u64`, then the `steps * dim_noise` increments as `f64`, all
/// little-endian.
pub fn write_grid<T: Scalar>(grid: &IncrementGrid<T>, sink: &mut impl Write) -> Result<()> {
    sink.write_all(&(grid.steps as u64).to_le_bytes())?;
    sink.write_all(&(grid.dim_noise as u64).to_le_bytes())?;
    let horizon = grid.horizon.to_f64().expect("horizon representable as f64");
    sink.write_all(&horizon.to_le_bytes())?;
    sink.write_all(&grid.seed.to_le_bytes())?;
    sink.write_all(&grid.path_id.to_le_bytes())?;
    for &x in &grid.increments {
        let x = x.to_f64().expect("increment representable as f64");
        sink.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a grid written by [`write_grid`].
pub fn read_grid<T: Scalar>(source: &mut impl Read) -> Result<IncrementGrid<T>> {
    fn read_u64(source: &mut impl Read) -> Result<u64> {
        let mut buf = [0u8; 8];
        source.read_exact(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }
    let steps = read_u64(source)? as usize;
    let dim_noise = read_u64(source)? as usize;
    let mut f64_buf = [0u8; 8];
    source.read_exact(&mut f64_buf)?;
    let horizon = f64::from_le_bytes(f64_buf);
    let seed = read_u64(source)?;
    let path_id = read_u64(source)?;
    let count = steps
        .checked_mul(dim_noise)
        .ok_or_else(|| SdeError::Argument("grid dump header overflows".into()))?;
    let mut increments = Vec::with_capacity(count);
    for _ in 0..count {
        source.read_exact(&mut f64_buf)?;
        increments.push(real::<T>(f64::from_le_bytes(f64_buf)));
    }
    IncrementGrid::from_parts(steps, dim_noise, real(horizon), increments, seed, path_id)
}
