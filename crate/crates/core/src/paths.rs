//! Brownian and Itô paths on a [`TimeGrid`], plus the law of the Brownian
//! running maximum.
//!
//! All generators draw increment `k` as `sqrt(dt) * Z_k` with `Z_k` the
//! `k`-th standard normal of the [`RandomSource`], so a Brownian path and an
//! Itô path built from the same source share their driving noise.

use std::io::Write;
use std::path::Path;

use libm::erfc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io::{create_csv, write_row};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl BrownianPath {
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Subsample every `factor`-th point; the result is the Brownian path on
    /// the coarse grid driven by the pairwise-aggregated fine increments.
    pub fn coarsen(&self, factor: u32) -> Result<BrownianPath> {
        let grid = self.grid.coarsen(factor)?;
        let values = self.values.iter().step_by(factor as usize).copied().collect();
        Ok(BrownianPath { grid, values })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_series_csv(path.as_ref(), &self.grid, &self.values)
    }
}

/// Discretized `Y(t) = -∫a ds + ∫b dW` with the per-step coefficients used.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub drift_series: Vec<f64>,
    pub diffusion_series: Vec<f64>,
}

impl ItoPath {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_series_csv(path.as_ref(), &self.grid, &self.values)
    }
}

pub fn brownian_path(grid: &TimeGrid, source: &RandomSource) -> BrownianPath {
    let sqrt_dt = grid.sqrt_dt();
    let mut values = Vec::with_capacity(grid.n_points());
    let mut w = 0.0;
    values.push(w);
    for z in source.normals().take(grid.n_steps()) {
        w += sqrt_dt * z;
        values.push(w);
    }
    BrownianPath { grid: *grid, values }
}

/// Itô path with prescribed per-step drift `a(t_k)` and diffusion `b(t_k)`.
pub fn ito_path(
    grid: &TimeGrid,
    drift: &[f64],
    diffusion: &[f64],
    source: &RandomSource,
) -> Result<ItoPath> {
    let n = grid.n_steps();
    if drift.len() != n || diffusion.len() != n {
        return Err(Error::invalid(format!(
            "coefficient series lengths ({}, {}) must equal n_steps = {n}",
            drift.len(),
            diffusion.len()
        )));
    }
    Ok(ito_path_adapted(grid, source, |k, _| (drift[k], diffusion[k])))
}

/// State handed to an adapted coefficient rule at the left end of each step.
#[derive(Debug, Clone, Copy)]
pub struct StepState {
    pub t: f64,
    pub y: f64,
    pub w: f64,
}

/// Itô path whose coefficients may depend on the current state and noise,
/// e.g. `b(s) = σ·sign(W(s))`. The rule sees step index `k` and the state
/// at `t_k` and returns `(a, b)`.
pub fn ito_path_adapted(
    grid: &TimeGrid,
    source: &RandomSource,
    mut rule: impl FnMut(usize, StepState) -> (f64, f64),
) -> ItoPath {
    let n = grid.n_steps();
    let dt = grid.dt();
    let sqrt_dt = grid.sqrt_dt();
    let mut values = Vec::with_capacity(n + 1);
    let mut drift_series = Vec::with_capacity(n);
    let mut diffusion_series = Vec::with_capacity(n);
    let (mut y, mut w) = (0.0, 0.0);
    values.push(y);
    for (k, z) in source.normals().take(n).enumerate() {
        let (a, b) = rule(k, StepState { t: grid.time(k), y, w });
        let dw = sqrt_dt * z;
        y += -a * dt + b * dw;
        w += dw;
        values.push(y);
        drift_series.push(a);
        diffusion_series.push(b);
    }
    ItoPath {
        grid: *grid,
        values,
        drift_series,
        diffusion_series,
    }
}

/// Running maximum `max(values[0..=k])`.
pub fn running_max(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(f64::NEG_INFINITY, |m, &v| {
            *m = m.max(v);
            Some(*m)
        })
        .collect()
}

fn check_max_args(c: f64, t: f64) -> Result<()> {
    if !(c >= 0.0) {
        return Err(Error::invalid(format!("level c = {c} must be >= 0")));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time t = {t} must be > 0")));
    }
    Ok(())
}

/// `P(max_{s<=t} W(s) >= c)`: integrating the density
/// `sqrt(2/(πt)) exp(-x²/2t)` of the running maximum over `[c, ∞)` gives
/// `2(1 - Φ(c/√t)) = erfc(c / √(2t))`.
pub fn brownian_max_tail_exact(c: f64, t: f64) -> Result<f64> {
    check_max_args(c, t)?;
    Ok(erfc(c / (2.0 * t).sqrt()).clamp(0.0, 1.0))
}

/// Gaussian-type upper bound `exp(-c²/2t)` on the same tail.
pub fn brownian_max_tail_bound(c: f64, t: f64) -> Result<f64> {
    check_max_args(c, t)?;
    Ok((-c * c / (2.0 * t)).exp())
}

/// Exponential martingale `exp(∫b dW - ½∫b² ds)` along the grid, `M(t_0) = 1`.
pub fn exp_martingale_path(b: &[f64], source: &RandomSource, grid: &TimeGrid) -> Result<Vec<f64>> {
    if b.len() != grid.n_steps() {
        return Err(Error::invalid(format!(
            "series length {} must equal n_steps = {}",
            b.len(),
            grid.n_steps()
        )));
    }
    let dt = grid.dt();
    let sqrt_dt = grid.sqrt_dt();
    let mut log_m = 0.0;
    let mut out = Vec::with_capacity(b.len() + 1);
    out.push(1.0);
    for (bk, z) in b.iter().zip(source.normals()) {
        log_m += bk * sqrt_dt * z - 0.5 * bk * bk * dt;
        out.push(log_m.exp());
    }
    Ok(out)
}

fn write_series_csv(path: &Path, grid: &TimeGrid, values: &[f64]) -> Result<()> {
    let mut w = create_csv(path)?;
    write_row(&mut w, path, format_args!("t,value"))?;
    for (t, v) in grid.times().zip(values) {
        write_row(&mut w, path, format_args!("{t},{v}"))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
