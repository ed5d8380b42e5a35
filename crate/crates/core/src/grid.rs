use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid whose step divides the unit delay exactly.
///
/// The step is stored as the rational `1 / steps_per_delay`; grid times are
/// materialized as `t_start + k / steps_per_delay` so long horizons do not
/// accumulate rounding drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Start time in whole delay units (typically -1 or 0).
    t_start: i64,
    steps_per_delay: u32,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: i64, steps_per_delay: u32, n_steps: usize) -> Result<Self> {
        if steps_per_delay == 0 {
            return Err(Error::invalid("steps_per_delay must be positive"));
        }
        Ok(Self {
            t_start,
            steps_per_delay,
            n_steps,
        })
    }

    /// Grid on `[0, horizon]`.
    pub fn from_origin(steps_per_delay: u32, horizon: f64) -> Result<Self> {
        let steps = steps_for(horizon, steps_per_delay)?;
        Self::new(0, steps_per_delay, steps)
    }

    /// Grid on `[-1, horizon]` as used by the delay integrator; the first
    /// `steps_per_delay + 1` points carry the initial history.
    pub fn for_delay(steps_per_delay: u32, horizon: f64) -> Result<Self> {
        let steps = steps_for(horizon, steps_per_delay)?;
        Self::new(-1, steps_per_delay, steps + steps_per_delay as usize)
    }

    /// Resolve a floating step size into `1 / n`; rejects steps that do not
    /// divide the delay.
    pub fn steps_per_delay_for_dt(dt: f64) -> Result<u32> {
        if !(dt > 0.0 && dt <= 1.0) {
            return Err(Error::invalid(format!("dt = {dt} must lie in (0, 1]")));
        }
        let n = (1.0 / dt).round();
        if ((1.0 / dt) - n).abs() > 1e-9 * n {
            return Err(Error::invalid(format!(
                "dt = {dt} does not divide the unit delay"
            )));
        }
        Ok(n as u32)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start as f64
    }

    pub fn start_index(&self) -> i64 {
        self.t_start
    }

    pub fn steps_per_delay(&self) -> u32 {
        self.steps_per_delay
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_delay as f64
    }

    pub fn sqrt_dt(&self) -> f64 {
        self.dt().sqrt()
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        let n = self.steps_per_delay as i64;
        let whole = self.t_start + (k as i64).div_euclid(n);
        let frac = (k as i64).rem_euclid(n);
        whole as f64 + frac as f64 / n as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|k| self.time(k))
    }

    /// Index of the grid point at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let n = self.steps_per_delay as f64;
        let k = ((t - self.t_start()) * n).round();
        if k < 0.0 || k > self.n_steps as f64 || ((t - self.t_start()) * n - k).abs() > 1e-6 {
            return None;
        }
        Some(k as usize)
    }

    /// Index of the first grid point at or after `t`, clamped to the grid.
    pub fn ceil_index(&self, t: f64) -> usize {
        let n = self.steps_per_delay as f64;
        let k = ((t - self.t_start()) * n - 1e-9).ceil().max(0.0) as usize;
        k.min(self.n_steps)
    }

    /// Index of the last grid point at or before `t`, clamped to the grid.
    pub fn floor_index(&self, t: f64) -> usize {
        let n = self.steps_per_delay as f64;
        let k = ((t - self.t_start()) * n + 1e-9).floor().max(0.0) as usize;
        k.min(self.n_steps)
    }

    /// Same grid with a coarser step `factor / steps_per_delay`.
    pub fn coarsen(&self, factor: u32) -> Result<Self> {
        if factor == 0 || !self.steps_per_delay.is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "factor {factor} does not divide steps_per_delay {}",
                self.steps_per_delay
            )));
        }
        if !self.n_steps.is_multiple_of(factor as usize) {
            return Err(Error::invalid("factor does not divide n_steps"));
        }
        Self::new(
            self.t_start,
            self.steps_per_delay / factor,
            self.n_steps / factor as usize,
        )
    }
}

fn steps_for(horizon: f64, steps_per_delay: u32) -> Result<usize> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon {horizon} must be finite and >= 0")));
    }
    let exact = horizon * steps_per_delay as f64;
    let steps = exact.round();
    if (exact - steps).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "horizon {horizon} is not a multiple of dt = 1/{steps_per_delay}"
        )));
    }
    Ok(steps as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_grid_times_are_exact() {
        let g = TimeGrid::for_delay(4, 2.0).unwrap();
        assert_eq!(g.n_points(), 13);
        let t: Vec<f64> = g.times().collect();
        assert_eq!(t[0], -1.0);
        assert_eq!(t[4], 0.0);
        assert_eq!(t[5], 0.25);
        assert_eq!(t[12], 2.0);
    }

    #[test]
    fn long_horizon_has_no_drift() {
        let g = TimeGrid::for_delay(1000, 500.0).unwrap();
        assert_eq!(g.t_end(), 500.0);
        assert_eq!(g.time(1000 + 250_000), 250.0);
    }

    #[test]
    fn rejects_misaligned_dt_and_horizon() {
        assert!(TimeGrid::steps_per_delay_for_dt(0.3).is_err());
        assert_eq!(TimeGrid::steps_per_delay_for_dt(1e-3).unwrap(), 1000);
        assert!(TimeGrid::for_delay(10, 1.05).is_err());
        assert!(TimeGrid::new(0, 0, 3).is_err());
    }

    #[test]
    fn index_lookup() {
        let g = TimeGrid::for_delay(100, 10.0).unwrap();
        assert_eq!(g.index_of(-1.0), Some(0));
        assert_eq!(g.index_of(0.0), Some(100));
        assert_eq!(g.index_of(2.5), Some(350));
        assert_eq!(g.index_of(2.505), None);
        assert_eq!(g.ceil_index(2.505), 351);
        assert_eq!(g.floor_index(2.505), 350);
    }
}
