//! Delay-aligned Euler–Maruyama for `dz(t) = F(z_t) dt + B(z_t) dW(t)` with
//! unit delay, a deterministic method-of-steps reference solver, and the
//! `x = log(1 + y)` coordinate change.
//!
//! The step is always `dt = 1 / steps_per_delay`, so the segment `z_t` at grid
//! index `k` is the slice `values[k - n ..= k]` and the delayed value is read
//! straight off the grid. No interpolation happens in the stochastic
//! integrator.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io::{create_csv, write_row};
use crate::paths::{brownian_path, BrownianPath};
use crate::rng::RandomSource;

/// History window of a path over the last delay unit, sampled at
/// `steps_per_delay + 1` points. `values()[0]` is `z(t - 1)`, the last entry
/// is `z(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<'a>(&'a [f64]);

impl<'a> Segment<'a> {
    pub fn new(values: &'a [f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("a segment needs at least two points"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("segment entry {v} is not finite")));
        }
        Ok(Segment(values))
    }

    pub(crate) fn new_unchecked(values: &'a [f64]) -> Self {
        Segment(values)
    }

    pub fn values(&self) -> &'a [f64] {
        self.0
    }

    /// `u(-1)`
    #[inline]
    pub fn delayed(&self) -> f64 {
        self.0[0]
    }

    /// `u(0)`
    #[inline]
    pub fn current(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn steps_per_delay(&self) -> usize {
        self.0.len() - 1
    }
}

pub type SegmentFn = Arc<dyn Fn(Segment<'_>) -> f64 + Send + Sync>;

/// A pair of segment functionals `(F, B)` plus optional declared bounds.
#[derive(Clone)]
pub struct DelayModel {
    id: String,
    drift: SegmentFn,
    diffusion: SegmentFn,
    drift_bounds: Option<(f64, f64)>,
    diffusion_sq_bound: Option<f64>,
    barrier_safe: bool,
}

impl fmt::Debug for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayModel")
            .field("id", &self.id)
            .field("drift_bounds", &self.drift_bounds)
            .field("diffusion_sq_bound", &self.diffusion_sq_bound)
            .field("barrier_safe", &self.barrier_safe)
            .finish_non_exhaustive()
    }
}

impl DelayModel {
    pub fn new(
        id: impl Into<String>,
        drift: impl Fn(Segment<'_>) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(Segment<'_>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            drift_bounds: None,
            diffusion_sq_bound: None,
            barrier_safe: true,
        }
    }

    /// Declare `lower <= F(u) <= upper`; either end may be infinite.
    pub fn with_drift_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.drift_bounds = Some((lower, upper));
        self
    }

    /// Declare `B(u)² <= bound`.
    pub fn with_diffusion_sq_bound(mut self, bound: f64) -> Self {
        self.diffusion_sq_bound = Some(bound);
        self
    }

    /// Mark a model whose Euler discretization can cross a barrier that the
    /// continuous equation never reaches.
    pub fn barrier_unsafe(mut self) -> Self {
        self.barrier_safe = false;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn drift_bounds(&self) -> Option<(f64, f64)> {
        self.drift_bounds
    }

    pub fn diffusion_sq_bound(&self) -> Option<f64> {
        self.diffusion_sq_bound
    }

    pub fn is_barrier_safe(&self) -> bool {
        self.barrier_safe
    }

    #[inline]
    pub fn drift(&self, u: Segment<'_>) -> f64 {
        let f = (self.drift)(u);
        #[cfg(debug_assertions)]
        if let Some((lo, hi)) = self.drift_bounds {
            let slack = 1e-9 * (1.0 + f.abs());
            debug_assert!(
                !f.is_finite() || (f >= lo - slack && f <= hi + slack),
                "{}: drift {f} outside declared [{lo}, {hi}]",
                self.id
            );
        }
        f
    }

    #[inline]
    pub fn diffusion(&self, u: Segment<'_>) -> f64 {
        let b = (self.diffusion)(u);
        #[cfg(debug_assertions)]
        if let Some(bound) = self.diffusion_sq_bound {
            debug_assert!(
                !b.is_finite() || b * b <= bound * (1.0 + 1e-12) + 1e-300,
                "{}: diffusion² {} exceeds declared {bound}",
                self.id,
                b * b
            );
        }
        b
    }
}

/// Initial segment `φ` on `[-1, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialHistory {
    Constant(f64),
    /// Values on the `steps_per_delay + 1` history grid points.
    Sampled(Vec<f64>),
}

impl InitialHistory {
    pub fn materialize(&self, steps_per_delay: u32) -> Result<Vec<f64>> {
        let n = steps_per_delay as usize + 1;
        let values = match self {
            InitialHistory::Constant(c) => vec![*c; n],
            InitialHistory::Sampled(v) => {
                if v.len() != n {
                    return Err(Error::invalid(format!(
                        "sampled history has {} points, expected {n}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("history contains non-finite values"));
        }
        Ok(values)
    }
}

/// A full path on `[-1, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSolution {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub model_id: String,
    pub source: Option<RandomSource>,
}

impl PathSolution {
    pub fn steps_per_delay(&self) -> usize {
        self.grid.steps_per_delay() as usize
    }

    /// The segment ending at grid index `k` (counted from `t = -1`).
    pub fn segment_at(&self, k: usize) -> Result<Segment<'_>> {
        let n = self.steps_per_delay();
        if k < n || k >= self.values.len() {
            return Err(Error::invalid(format!(
                "segment index {k} outside [{n}, {}]",
                self.values.len().saturating_sub(1)
            )));
        }
        Ok(Segment::new_unchecked(&self.values[k - n..=k]))
    }

    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.grid.index_of(t).map(|k| self.values[k])
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.times()
    }

    /// Brownian path on `[0, T]` that drove this solution.
    pub fn driving_noise(&self) -> Option<BrownianPath> {
        let src = self.source?;
        let n = self.steps_per_delay();
        let grid = TimeGrid::new(0, self.grid.steps_per_delay(), self.grid.n_steps() - n).ok()?;
        Some(brownian_path(&grid, &src))
    }

    /// Map an `x`-coordinate path to `y = eˣ - 1`.
    pub fn to_y_values(&self) -> Vec<f64> {
        self.values.iter().map(|&x| to_y(x)).collect()
    }

    /// `t,x` or `t,x,y` CSV.
    pub fn write_csv(&self, path: impl AsRef<Path>, with_y: bool) -> Result<()> {
        let path = path.as_ref();
        let mut w = create_csv(path)?;
        if with_y {
            write_row(&mut w, path, format_args!("t,x,y"))?;
            for (t, x) in self.times().zip(&self.values) {
                write_row(&mut w, path, format_args!("{t},{x},{}", to_y(*x)))?;
            }
        } else {
            write_row(&mut w, path, format_args!("t,x"))?;
            for (t, x) in self.times().zip(&self.values) {
                write_row(&mut w, path, format_args!("{t},{x}"))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_delay_grid(grid: &TimeGrid) -> Result<()> {
    if grid.start_index() != -1 {
        return Err(Error::invalid(format!(
            "delay grid must start at t = -1, got {}",
            grid.t_start()
        )));
    }
    if grid.n_steps() < grid.steps_per_delay() as usize {
        return Err(Error::invalid("grid does not cover the history interval"));
    }
    Ok(())
}

/// Euler–Maruyama on a grid starting at `t = -1`:
///
/// `z(t_{k+1}) = z(t_k) + F(z_{t_k}) dt + B(z_{t_k}) ΔW_k`
///
/// for every `k` from the end of the history onward. `ΔW_k` is the `k`-th
/// increment of `source`, counted from `t = 0`.
pub fn euler_maruyama(
    model: &DelayModel,
    history: &InitialHistory,
    grid: &TimeGrid,
    source: &RandomSource,
) -> Result<PathSolution> {
    check_delay_grid(grid)?;
    let n = grid.steps_per_delay() as usize;
    let dt = grid.dt();
    let sqrt_dt = grid.sqrt_dt();
    let mut values = history.materialize(grid.steps_per_delay())?;
    values.reserve_exact(grid.n_points() - values.len());
    let mut noise = source.normals();
    for k in n..grid.n_steps() {
        let seg = Segment::new_unchecked(&values[k - n..=k]);
        let f = model.drift(seg);
        let b = model.diffusion(seg);
        let z = noise.next().expect("infinite stream");
        let next = values[k] + f * dt + b * sqrt_dt * z;
        if !next.is_finite() {
            return Err(Error::Divergence {
                step: k + 1,
                t: grid.time(k + 1),
                value: next,
            });
        }
        values.push(next);
    }
    Ok(PathSolution {
        grid: *grid,
        values,
        model_id: model.id().to_string(),
        source: Some(*source),
    })
}

/// Memory-light variant of [`euler_maruyama`] that keeps only the current
/// segment. `observe(k, segment)` is called for every grid index from the
/// end of the history (`k = steps_per_delay`) to the last point; the final
/// segment is returned. Produces the same states bit for bit.
pub fn euler_maruyama_streaming(
    model: &DelayModel,
    history: &InitialHistory,
    grid: &TimeGrid,
    source: &RandomSource,
    mut observe: impl FnMut(usize, Segment<'_>),
) -> Result<Vec<f64>> {
    check_delay_grid(grid)?;
    let n = grid.steps_per_delay() as usize;
    let width = n + 1;
    let dt = grid.dt();
    let sqrt_dt = grid.sqrt_dt();
    // Each state is written twice, at i and i + width, so the window
    // [head, head + width) is always a contiguous slice.
    let hist = history.materialize(grid.steps_per_delay())?;
    let mut ring = vec![0.0; 2 * width];
    ring[..width].copy_from_slice(&hist);
    ring[width..].copy_from_slice(&hist);
    let mut head = 0;
    let mut noise = source.normals();
    observe(n, Segment::new_unchecked(&ring[head..head + width]));
    for k in n..grid.n_steps() {
        let seg = Segment::new_unchecked(&ring[head..head + width]);
        let f = model.drift(seg);
        let b = model.diffusion(seg);
        let z = noise.next().expect("infinite stream");
        let next = seg.current() + f * dt + b * sqrt_dt * z;
        if !next.is_finite() {
            return Err(Error::Divergence {
                step: k + 1,
                t: grid.time(k + 1),
                value: next,
            });
        }
        // the oldest entry sits at `head`; overwrite it and slide.
        ring[head] = next;
        ring[head + width] = next;
        head = (head + 1) % width;
        observe(k + 1, Segment::new_unchecked(&ring[head..head + width]));
    }
    Ok(ring[head..head + width].to_vec())
}

/// Deterministic reference solver for `x'(t) = f(x(t-1), x(t), t)`.
///
/// Works interval by interval with classical RK4 on the fine grid
/// `1 / fine_steps_per_delay`; the delayed argument at half steps comes from
/// linear interpolation of the already computed previous interval. Intended
/// as an oracle for the stochastic integrator with zero noise, so the fine
/// step should be at least ten times smaller than the step under test.
pub fn method_of_steps_reference(
    drift_rhs: impl Fn(f64, f64, f64) -> f64,
    history: &InitialHistory,
    horizon: f64,
    fine_steps_per_delay: u32,
) -> Result<PathSolution> {
    let grid = TimeGrid::for_delay(fine_steps_per_delay, horizon)?;
    let n = fine_steps_per_delay as usize;
    let h = grid.dt();
    let mut values = history.materialize(fine_steps_per_delay)?;
    values.reserve_exact(grid.n_points() - values.len());
    for k in n..grid.n_steps() {
        let t = grid.time(k);
        let x = values[k];
        let d0 = values[k - n];
        let d1 = values[k - n + 1];
        let dm = 0.5 * (d0 + d1);
        let k1 = drift_rhs(d0, x, t);
        let k2 = drift_rhs(dm, x + 0.5 * h * k1, t + 0.5 * h);
        let k3 = drift_rhs(dm, x + 0.5 * h * k2, t + 0.5 * h);
        let k4 = drift_rhs(d1, x + h * k3, t + h);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Divergence {
                step: k + 1,
                t: grid.time(k + 1),
                value: next,
            });
        }
        values.push(next);
    }
    Ok(PathSolution {
        grid,
        values,
        model_id: "method_of_steps_reference".into(),
        source: None,
    })
}

/// `x = log(1 + y)`; defined only above the barrier `y = -1`.
pub fn to_x(y: f64) -> Result<f64> {
    if !(y > -1.0) {
        return Err(Error::invalid(format!("y = {y} must exceed -1")));
    }
    Ok(y.ln_1p())
}

/// `y = eˣ - 1`, always `> -1` for finite `x`.
pub fn to_y(x: f64) -> f64 {
    x.exp_m1()
}

/// Parameters of the pathwise comparison bound
/// `z(t) <= max{x0, x0 + c + δ + u(t) - u(aᵗ)}`, where `aᵗ` is the last
/// time before `t` at which `z <= x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathwiseBound {
    pub x0: f64,
    pub c: f64,
    pub delta: f64,
    /// Absolute slack added to the bound.
    pub tolerance: f64,
}

impl PathwiseBound {
    pub fn new(x0: f64, c: f64, delta: f64) -> Self {
        Self {
            x0,
            c,
            delta,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathwiseViolation {
    pub index: usize,
    pub t: f64,
    pub z: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathwiseReport {
    pub holds: bool,
    pub checked: usize,
    /// Smallest `bound - z` seen over the checked points.
    pub min_margin: f64,
    pub first_violation: Option<PathwiseViolation>,
}

/// Check the pathwise comparison bound along `solution` from grid index
/// `start` on. `u_path` lives on the same grid as the solution.
///
/// The discrete crossing index lags the continuous crossing time by at most
/// one step, so `u(aᵗ)` is taken as the smaller of the two grid values
/// bracketing it.
pub fn pathwise_upper_bound_check(
    solution: &PathSolution,
    bound: &PathwiseBound,
    u_path: &[f64],
    start: usize,
) -> Result<PathwiseReport> {
    let z = &solution.values;
    if u_path.len() != z.len() {
        return Err(Error::invalid(format!(
            "u_path has {} points, solution has {}",
            u_path.len(),
            z.len()
        )));
    }
    if start >= z.len() {
        return Err(Error::invalid("check start beyond the path"));
    }
    if bound.c < 0.0 || bound.delta < 0.0 {
        return Err(Error::invalid("c and delta must be non-negative"));
    }
    if z[start] > bound.x0 {
        return Err(Error::invalid(format!(
            "z at check start ({}) exceeds x0 = {}",
            z[start], bound.x0
        )));
    }
    let mut last_below = start;
    let mut min_margin = f64::INFINITY;
    let mut first_violation = None;
    for k in start + 1..z.len() {
        let a_hi = (last_below + 1).min(k);
        let u_a = u_path[last_below].min(u_path[a_hi]);
        let value = bound.x0.max(bound.x0 + bound.c + bound.delta + u_path[k] - u_a);
        let margin = value - z[k];
        min_margin = min_margin.min(margin);
        if margin < -bound.tolerance && first_violation.is_none() {
            first_violation = Some(PathwiseViolation {
                index: k,
                t: solution.grid.time(k),
                z: z[k],
                bound: value,
            });
        }
        if z[k] <= bound.x0 {
            last_below = k;
        }
    }
    Ok(PathwiseReport {
        holds: first_violation.is_none(),
        checked: z.len() - start,
        min_margin,
        first_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zero_model() -> DelayModel {
        DelayModel::new("zero", |_| 0.0, |_| 0.0)
    }

    #[test]
    fn segment_indexing() {
        let grid = TimeGrid::for_delay(4, 2.0).unwrap();
        let values: Vec<f64> = grid.times().collect();
        let sol = PathSolution {
            grid,
            values,
            model_id: "linear".into(),
            source: None,
        };
        assert_eq!(sol.segment_at(8).unwrap().values(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sol.segment_at(4).unwrap().values(), &[-1.0, -0.75, -0.5, -0.25, 0.0]);
        assert!(sol.segment_at(3).is_err());
        assert!(sol.segment_at(13).is_err());
    }

    #[test]
    fn first_segment_is_history_and_constant_paths_stay_constant() {
        let grid = TimeGrid::for_delay(10, 3.0).unwrap();
        let sol = euler_maruyama(&zero_model(), &InitialHistory::Constant(2.5), &grid, &RandomSource::new(1, 1)).unwrap();
        assert!(sol.values.iter().all(|&v| v == 2.5));
        assert_eq!(sol.segment_at(10).unwrap().values(), &[2.5; 11]);
        assert!(sol.segment_at(25).unwrap().values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn sampled_history_length_is_checked() {
        let grid = TimeGrid::for_delay(4, 1.0).unwrap();
        let h = InitialHistory::Sampled(vec![0.0; 4]);
        assert!(euler_maruyama(&zero_model(), &h, &grid, &RandomSource::new(0, 0)).is_err());
    }

    #[test]
    fn rejects_grid_not_starting_at_minus_one() {
        let grid = TimeGrid::from_origin(4, 1.0).unwrap();
        let r = euler_maruyama(&zero_model(), &InitialHistory::Constant(0.0), &grid, &RandomSource::new(0, 0));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn divergence_reports_first_bad_step() {
        let grid = TimeGrid::for_delay(10, 50.0).unwrap();
        let blowup = DelayModel::new("blowup", |u| u.current().exp(), |_| 0.0);
        let err = euler_maruyama(&blowup, &InitialHistory::Constant(1.0), &grid, &RandomSource::new(0, 0))
            .unwrap_err();
        match err {
            Error::Divergence { step, .. } => assert!(step > 10 && step < grid.n_points()),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn linear_delay_equation_matches_closed_form() {
        // x' = -x(t-1), x = 1 on [-1, 0]: x = 1 - t on [0, 1],
        // x = 1 - t + (t-1)²/2 on [1, 2].
        let grid = TimeGrid::for_delay(1000, 2.0).unwrap();
        let model = DelayModel::new("linear", |u| -u.delayed(), |_| 0.0);
        let sol = euler_maruyama(&model, &InitialHistory::Constant(1.0), &grid, &RandomSource::new(0, 0)).unwrap();
        assert!(sol.value_at(1.0).unwrap().abs() < 5e-3);
        assert!((sol.value_at(2.0).unwrap() + 0.5).abs() < 5e-3);

        let reference = method_of_steps_reference(|d, _, _| -d, &InitialHistory::Constant(1.0), 2.0, 10_000).unwrap();
        assert!((reference.value_at(2.0).unwrap() + 0.5).abs() < 1e-6);
        assert!(reference.value_at(1.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn reference_with_zero_rhs_is_constant() {
        let r = method_of_steps_reference(|_, _, _| 0.0, &InitialHistory::Constant(-0.3), 5.0, 100).unwrap();
        assert!(r.values.iter().all(|&v| v == -0.3));
    }

    #[test]
    fn streaming_matches_full_path() {
        let grid = TimeGrid::for_delay(20, 15.0).unwrap();
        let model = DelayModel::new("wright", |u| -1.5 * u.delayed().exp_m1() - 0.02, |_| 0.2);
        let src = RandomSource::new(5, 17);
        let hist = InitialHistory::Constant(0.4);
        let full = euler_maruyama(&model, &hist, &grid, &src).unwrap();
        let mut seen = Vec::new();
        let last = euler_maruyama_streaming(&model, &hist, &grid, &src, |k, seg| {
            seen.push((k, seg.current()));
        })
        .unwrap();
        assert_eq!(last, full.segment_at(grid.n_steps()).unwrap().values());
        assert_eq!(seen.len(), grid.n_points() - 20);
        for (k, v) in seen {
            assert_eq!(v, full.values[k]);
        }
    }

    #[test]
    fn transforms() {
        assert_eq!(to_x(0.0).unwrap(), 0.0);
        assert_eq!(to_y(0.0), 0.0);
        assert_relative_eq!(to_x(-0.5).unwrap(), -std::f64::consts::LN_2, epsilon = 1e-15);
        assert_relative_eq!(to_y(1.0), std::f64::consts::E - 1.0, epsilon = 1e-15);
        assert!(to_x(-1.0).is_err());
        assert!(to_x(-2.0).is_err());
    }

    #[test]
    fn pathwise_bound_trivial_case() {
        let grid = TimeGrid::for_delay(10, 5.0).unwrap();
        let sol = euler_maruyama(&zero_model(), &InitialHistory::Constant(0.5), &grid, &RandomSource::new(0, 0)).unwrap();
        let u = vec![0.0; sol.values.len()];
        let rep = pathwise_upper_bound_check(&sol, &PathwiseBound::new(0.5, 0.0, 0.0), &u, 10).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.min_margin, 0.0);
    }

    #[test]
    fn pathwise_bound_detects_violation_and_bad_start() {
        let grid = TimeGrid::for_delay(10, 2.0).unwrap();
        let growth = DelayModel::new("growth", |_| 1.0, |_| 0.0);
        let sol = euler_maruyama(&growth, &InitialHistory::Constant(0.0), &grid, &RandomSource::new(0, 0)).unwrap();
        let u = vec![0.0; sol.values.len()];
        let rep = pathwise_upper_bound_check(&sol, &PathwiseBound::new(0.0, 0.5, 0.0), &u, 10).unwrap();
        assert!(!rep.holds);
        let v = rep.first_violation.unwrap();
        assert!(v.z > v.bound);
        assert!(pathwise_upper_bound_check(&sol, &PathwiseBound::new(0.0, 0.5, 0.0), &u, 25).is_err());
    }
}
