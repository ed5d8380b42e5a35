//! Time-averaged empirical measures of path ensembles.
//!
//! The occupation measure `ν_T(A) = (1/T) ∫_{t0}^{t0+T} P(x(t) ∈ A) dt` is
//! approximated by the discrete double sum over paths `i` and strided grid
//! times `t_k` in the window,
//!
//! ```text
//! ν(A) ≈ 1/((M+1) N) Σ_i Σ_k 1_A(x_i(t_k)),
//! ```
//!
//! and the segment measure is only ever seen through its projections: the
//! value histogram and the phase map `φ ↦ (φ(-1), φ(0))`.
//!
//! All accumulation is integer counting, so results do not depend on path
//! order or on how the work is split across threads.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{euler_maruyama, to_y, DelayModel, InitialHistory, PathSolution};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io::{create_csv, write_row};
use crate::rng::RandomSource;

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::invalid("a histogram needs at least two edges"));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("edges must be finite and strictly increasing"));
    }
    Ok(())
}

/// Bin of `x` among half-open bins `[e_i, e_{i+1})`.
#[inline]
fn locate(edges: &[f64], x: f64) -> Option<usize> {
    if !(x >= edges[0]) || x >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// Uniform edges on `[lo, hi]`.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::invalid(format!("cannot bin [{lo}, {hi}] into {bins} bins")));
    }
    Ok((0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    edges: Vec<f64>,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    total: u64,
}

impl Histogram1D {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        check_edges(&edges)?;
        let n = edges.len() - 1;
        Ok(Self {
            edges,
            counts: vec![0; n],
            underflow: 0,
            overflow: 0,
            total: 0,
        })
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::new(uniform_edges(lo, hi, bins)?)
    }

    fn empty_like(&self) -> Self {
        Self {
            edges: self.edges.clone(),
            counts: vec![0; self.counts.len()],
            underflow: 0,
            overflow: 0,
            total: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        self.total += 1;
        match locate(&self.edges, x) {
            Some(i) => self.counts[i] += 1,
            None if x < self.edges[0] => self.underflow += 1,
            None => self.overflow += 1,
        }
    }

    pub fn merge(&mut self, other: &Histogram1D) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::invalid("cannot merge histograms with different edges"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.total += other.total;
        Ok(())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        locate(&self.edges, x)
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// Per-bin probabilities `count / total`.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Fraction of samples that fell inside the edges.
    pub fn in_range_mass(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.iter().sum::<u64>() as f64 / self.total as f64
    }

    /// Mean of the in-range samples, quantized to bin centers.
    pub fn mean(&self) -> f64 {
        let n: u64 = self.counts.iter().sum();
        let s: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * self.center(i))
            .sum();
        s / n as f64
    }

    /// Standard deviation of the in-range samples, quantized to bin centers.
    pub fn std(&self) -> f64 {
        let n: u64 = self.counts.iter().sum();
        let m = self.mean();
        let ss: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * (self.center(i) - m).powi(2))
            .sum();
        (ss / n as f64).sqrt()
    }

    /// Mass of the bins whose centers lie in `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let inside: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(i, _)| (lo..=hi).contains(&self.center(*i)))
            .map(|(_, c)| c)
            .sum();
        inside as f64 / self.total.max(1) as f64
    }

    /// Merge each run of `group` adjacent bins; a trailing partial run is
    /// merged as well.
    pub fn coarsen(&self, group: usize) -> Result<Histogram1D> {
        if group == 0 {
            return Err(Error::invalid("group must be positive"));
        }
        let n = self.n_bins();
        let mut edges: Vec<f64> = (0..n).step_by(group).map(|i| self.edges[i]).collect();
        edges.push(self.edges[n]);
        let counts = self.counts.chunks(group).map(|c| c.iter().sum()).collect();
        Ok(Histogram1D {
            edges,
            counts,
            underflow: self.underflow,
            overflow: self.overflow,
            total: self.total,
        })
    }

    /// `bin_lo,bin_hi,count` with `#`-prefixed metadata lines.
    pub fn write_csv(&self, path: impl AsRef<Path>, metadata: &[(String, String)]) -> Result<()> {
        let path = path.as_ref();
        let mut w = create_csv(path)?;
        for (k, v) in metadata {
            write_row(&mut w, path, format_args!("# {k} = {v}"))?;
        }
        write_row(
            &mut w,
            path,
            format_args!(
                "# total = {}, underflow = {}, overflow = {}",
                self.total, self.underflow, self.overflow
            ),
        )?;
        write_row(&mut w, path, format_args!("bin_lo,bin_hi,count"))?;
        for (i, c) in self.counts.iter().enumerate() {
            write_row(
                &mut w,
                path,
                format_args!("{},{},{}", self.edges[i], self.edges[i + 1], c),
            )?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Total-variation distance `½ Σ |p_i - q_i|` on shared edges; the under-
/// and overflow tallies count as two extra bins.
pub fn tv_distance(a: &Histogram1D, b: &Histogram1D) -> Result<f64> {
    if a.edges != b.edges {
        return Err(Error::invalid("total variation needs shared edges"));
    }
    if a.total == 0 || b.total == 0 {
        return Err(Error::invalid("total variation of an empty histogram"));
    }
    let (na, nb) = (a.total as f64, b.total as f64);
    let cells = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(&x, &y)| (x, y))
        .chain([(a.underflow, b.underflow), (a.overflow, b.overflow)]);
    let sum: f64 = cells.map(|(x, y)| (x as f64 / na - y as f64 / nb).abs()).sum();
    Ok((0.5 * sum).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
    /// Row-major, `counts[ix * ny + iy]`.
    counts: Vec<u64>,
    out_of_range: u64,
    total: u64,
}

impl Histogram2D {
    pub fn new(x_edges: Vec<f64>, y_edges: Vec<f64>) -> Result<Self> {
        check_edges(&x_edges)?;
        check_edges(&y_edges)?;
        let n = (x_edges.len() - 1) * (y_edges.len() - 1);
        Ok(Self {
            x_edges,
            y_edges,
            counts: vec![0; n],
            out_of_range: 0,
            total: 0,
        })
    }

    fn ny(&self) -> usize {
        self.y_edges.len() - 1
    }

    #[inline]
    pub fn add(&mut self, x: f64, y: f64) {
        self.total += 1;
        match (locate(&self.x_edges, x), locate(&self.y_edges, y)) {
            (Some(i), Some(j)) => {
                let ny = self.ny();
                self.counts[i * ny + j] += 1
            }
            _ => self.out_of_range += 1,
        }
    }

    pub fn merge(&mut self, other: &Histogram2D) -> Result<()> {
        if self.x_edges != other.x_edges || self.y_edges != other.y_edges {
            return Err(Error::invalid("cannot merge histograms with different edges"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.out_of_range += other.out_of_range;
        self.total += other.total;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn x_edges(&self) -> &[f64] {
        &self.x_edges
    }

    pub fn y_edges(&self) -> &[f64] {
        &self.y_edges
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[ix * self.ny() + iy]
    }

    /// Count of the cell containing `(x, y)`, if any.
    pub fn count_at(&self, x: f64, y: f64) -> Option<u64> {
        Some(self.count(locate(&self.x_edges, x)?, locate(&self.y_edges, y)?))
    }

    /// Fraction of all samples in cells whose centers lie in the rectangle.
    pub fn mass_in_rect(&self, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> f64 {
        let ny = self.ny();
        let mut inside = 0u64;
        for i in 0..self.x_edges.len() - 1 {
            let cx = 0.5 * (self.x_edges[i] + self.x_edges[i + 1]);
            if !(x_lo..=x_hi).contains(&cx) {
                continue;
            }
            for j in 0..ny {
                let cy = 0.5 * (self.y_edges[j] + self.y_edges[j + 1]);
                if (y_lo..=y_hi).contains(&cy) {
                    inside += self.counts[i * ny + j];
                }
            }
        }
        inside as f64 / self.total.max(1) as f64
    }

    /// `x_lo,x_hi,y_lo,y_hi,count`, one row per cell.
    pub fn write_csv(&self, path: impl AsRef<Path>, metadata: &[(String, String)]) -> Result<()> {
        let path = path.as_ref();
        let mut w = create_csv(path)?;
        for (k, v) in metadata {
            write_row(&mut w, path, format_args!("# {k} = {v}"))?;
        }
        write_row(
            &mut w,
            path,
            format_args!("# total = {}, out_of_range = {}", self.total, self.out_of_range),
        )?;
        write_row(&mut w, path, format_args!("x_lo,x_hi,y_lo,y_hi,count"))?;
        let ny = self.ny();
        for i in 0..self.x_edges.len() - 1 {
            for j in 0..ny {
                write_row(
                    &mut w,
                    path,
                    format_args!(
                        "{},{},{},{},{}",
                        self.x_edges[i],
                        self.x_edges[i + 1],
                        self.y_edges[j],
                        self.y_edges[j + 1],
                        self.counts[i * ny + j]
                    ),
                )?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Observation window `[t0, t0 + len]`, sampled every `stride` grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureWindow {
    pub t0: f64,
    pub len: f64,
    pub stride: usize,
}

impl Default for MeasureWindow {
    fn default() -> Self {
        Self {
            t0: 250.0,
            len: 250.0,
            stride: 10,
        }
    }
}

impl MeasureWindow {
    pub fn new(t0: f64, len: f64, stride: usize) -> Self {
        Self { t0, len, stride }
    }

    /// Grid indices that contribute.
    pub fn indices(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        if self.stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        if !(self.len >= 0.0) || !self.t0.is_finite() {
            return Err(Error::invalid(format!("bad window [{}, +{}]", self.t0, self.len)));
        }
        let end = self.t0 + self.len;
        if self.t0 < grid.t_start() - 1e-9 || end > grid.t_end() + 1e-9 {
            return Err(Error::invalid(format!(
                "window [{}, {end}] outside the computed horizon [{}, {}]",
                self.t0,
                grid.t_start(),
                grid.t_end()
            )));
        }
        let first = grid.ceil_index(self.t0);
        let last = grid.floor_index(end);
        if first > last {
            return Err(Error::invalid("empty window"));
        }
        Ok((first..=last).step_by(self.stride).collect())
    }
}

/// How to choose histogram edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    Edges(Vec<f64>),
    /// Uniform bins over the empirical range, widened by 5% on each side.
    Auto { bins: usize },
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Auto { bins: 100 }
    }
}

impl Binning {
    fn resolve(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        match self {
            Binning::Edges(e) => {
                check_edges(e)?;
                Ok(e.clone())
            }
            Binning::Auto { bins } => {
                let (lo, hi) = if hi > lo {
                    let pad = 0.05 * (hi - lo);
                    (lo - pad, hi + pad)
                } else {
                    let pad = 0.05 * lo.abs().max(1.0);
                    (lo - pad, hi + pad)
                };
                uniform_edges(lo, hi, *bins)
            }
        }
    }
}

/// `N` paths on a shared grid, path `i` driven by stream `stream_indices[i]`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    solutions: Vec<PathSolution>,
    model_id: String,
    master_seed: u64,
    stream_indices: Vec<u64>,
}

impl PathEnsemble {
    /// Simulate `n_paths` paths with streams `0..n_paths`, in parallel.
    pub fn simulate(
        model: &DelayModel,
        history: &InitialHistory,
        grid: &TimeGrid,
        master_seed: u64,
        n_paths: usize,
    ) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::invalid("ensemble needs at least one path"));
        }
        let solutions = (0..n_paths as u64)
            .into_par_iter()
            .map(|i| euler_maruyama(model, history, grid, &RandomSource::new(master_seed, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            solutions,
            model_id: model.id().to_string(),
            master_seed,
            stream_indices: (0..n_paths as u64).collect(),
        })
    }

    pub fn from_solutions(solutions: Vec<PathSolution>) -> Result<Self> {
        let first = solutions
            .first()
            .ok_or_else(|| Error::invalid("ensemble needs at least one path"))?;
        if solutions.iter().any(|s| s.grid != first.grid) {
            return Err(Error::invalid("ensemble paths must share one grid"));
        }
        let model_id = first.model_id.clone();
        let master_seed = first.source.map_or(0, |s| s.master_seed);
        let stream_indices: Vec<u64> = solutions
            .iter()
            .enumerate()
            .map(|(i, s)| s.source.map_or(i as u64, |s| s.stream_index))
            .collect();
        let mut sorted = stream_indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != stream_indices.len() {
            return Err(Error::invalid("stream indices must be distinct"));
        }
        Ok(Self {
            solutions,
            model_id,
            master_seed,
            stream_indices,
        })
    }

    pub fn solutions(&self) -> &[PathSolution] {
        &self.solutions
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.solutions[0].grid
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_indices(&self) -> &[u64] {
        &self.stream_indices
    }

    fn sample_range(&self, idx: &[usize]) -> (f64, f64) {
        self.solutions
            .par_iter()
            .map(|s| range_at(&s.values, idx))
            .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
    }
}

fn range_at(values: &[f64], idx: &[usize]) -> (f64, f64) {
    idx.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(values[k]), hi.max(values[k])))
}

fn histogram_of(solutions: &[PathSolution], idx: &[usize], edges: &[f64]) -> Result<Histogram1D> {
    let empty = Histogram1D::new(edges.to_vec())?;
    Ok(solutions
        .par_iter()
        .map(|s| {
            let mut h = empty.empty_like();
            for &k in idx {
                h.add(s.values[k]);
            }
            h
        })
        .reduce(
            || empty.empty_like(),
            |mut a, b| {
                a.merge(&b).expect("shared edges");
                a
            },
        ))
}

/// Value histogram `ν` over a window, with the window it was taken on.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePair {
    pub nu: Histogram1D,
    pub window: MeasureWindow,
}

/// Histogram of all `x_i(t_k)` for strided `t_k` in the window.
pub fn empirical_stationary_1d(
    ensemble: &PathEnsemble,
    window: &MeasureWindow,
    binning: &Binning,
) -> Result<MeasurePair> {
    let idx = window.indices(ensemble.grid())?;
    let (lo, hi) = ensemble.sample_range(&idx);
    let edges = binning.resolve(lo, hi)?;
    Ok(MeasurePair {
        nu: histogram_of(&ensemble.solutions, &idx, &edges)?,
        window: *window,
    })
}

/// Histogram of the pairs `(x(t - 1), x(t))` over the window.
pub fn phase_pushforward_2d(
    ensemble: &PathEnsemble,
    window: &MeasureWindow,
    x_binning: &Binning,
    y_binning: &Binning,
) -> Result<Histogram2D> {
    let grid = ensemble.grid();
    if window.t0 < grid.t_start() + 1.0 - 1e-9 {
        return Err(Error::invalid(format!(
            "phase window must start at least one delay after t = {}",
            grid.t_start()
        )));
    }
    let idx = window.indices(grid)?;
    let n = grid.steps_per_delay() as usize;
    let delayed: Vec<usize> = idx.iter().map(|k| k - n).collect();
    let (xlo, xhi) = ensemble.sample_range(&delayed);
    let (ylo, yhi) = ensemble.sample_range(&idx);
    let empty = Histogram2D::new(x_binning.resolve(xlo, xhi)?, y_binning.resolve(ylo, yhi)?)?;
    Ok(ensemble
        .solutions
        .par_iter()
        .map(|s| {
            let mut h = empty.clone();
            for &k in &idx {
                h.add(s.values[k - n], s.values[k]);
            }
            h
        })
        .reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b).expect("shared edges");
                a
            },
        ))
}

/// Push a histogram in `x` forward under `x ↦ eˣ - 1`. The map is strictly
/// increasing, so every count moves to the image bin unchanged.
pub fn pushforward_to_y(hist: &Histogram1D) -> Histogram1D {
    Histogram1D {
        edges: hist.edges.iter().map(|&x| to_y(x)).collect(),
        ..hist.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    pub epsilon: f64,
    /// Smallest `R` with `#{i: |x_i(t)| <= R} >= (1 - ε) N` at every time.
    pub r_eps: f64,
    pub times: Vec<f64>,
    /// Empirical `ε/2` quantile per time.
    pub q_lo: Vec<f64>,
    /// Empirical `1 - ε/2` quantile per time.
    pub q_hi: Vec<f64>,
    /// Per-time radius; `r_eps` is its maximum.
    pub radius: Vec<f64>,
}

impl BoundednessReport {
    /// `max - min` of the lower quantile track over `[t_a, t_b]`.
    pub fn q_lo_variation(&self, t_a: f64, t_b: f64) -> f64 {
        track_variation(&self.times, &self.q_lo, t_a, t_b)
    }

    pub fn q_hi_variation(&self, t_a: f64, t_b: f64) -> f64 {
        track_variation(&self.times, &self.q_hi, t_a, t_b)
    }

    /// `t,q_lo,q_hi`
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create_csv(path)?;
        write_row(&mut w, path, format_args!("# epsilon = {}", self.epsilon))?;
        write_row(&mut w, path, format_args!("# r_eps = {}", self.r_eps))?;
        write_row(&mut w, path, format_args!("t,q_lo,q_hi"))?;
        for ((t, lo), hi) in self.times.iter().zip(&self.q_lo).zip(&self.q_hi) {
            write_row(&mut w, path, format_args!("{t},{lo},{hi}"))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn track_variation(times: &[f64], track: &[f64], t_a: f64, t_b: f64) -> f64 {
    let (lo, hi) = times
        .iter()
        .zip(track)
        .filter(|(t, _)| (t_a..=t_b).contains(*t))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Empirical face of boundedness in probability over the window's times.
pub fn boundedness_in_probability(
    ensemble: &PathEnsemble,
    epsilon: f64,
    window: &MeasureWindow,
) -> Result<BoundednessReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let grid = ensemble.grid();
    let idx = window.indices(grid)?;
    let n = ensemble.len();
    if n * idx.len() < 1000 {
        return Err(Error::invalid(format!(
            "{} samples are too few for a boundedness estimate (need 1000)",
            n * idx.len()
        )));
    }
    // |x| <= R must hold for at least ceil((1 - ε) N) paths.
    let need = ((1.0 - epsilon) * n as f64 - 1e-9).ceil().max(1.0) as usize;
    let per_time: Vec<(f64, f64, f64)> = idx
        .par_iter()
        .map(|&k| {
            let mut xs: Vec<f64> = ensemble.solutions.iter().map(|s| s.values[k]).collect();
            let mut abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
            xs.sort_unstable_by(f64::total_cmp);
            abs.sort_unstable_by(f64::total_cmp);
            (
                quantile_sorted(&xs, 0.5 * epsilon),
                quantile_sorted(&xs, 1.0 - 0.5 * epsilon),
                abs[need - 1],
            )
        })
        .collect();
    let radius: Vec<f64> = per_time.iter().map(|p| p.2).collect();
    let r_eps = radius.iter().copied().fold(0.0, f64::max);
    if !r_eps.is_finite() || radius.iter().any(|r| r.is_nan()) {
        return Err(Error::UnboundedInSample(format!(
            "no finite radius covers a 1 - {epsilon} fraction at every time"
        )));
    }
    Ok(BoundednessReport {
        epsilon,
        r_eps,
        times: idx.iter().map(|&k| grid.time(k)).collect(),
        q_lo: per_time.iter().map(|p| p.0).collect(),
        q_hi: per_time.iter().map(|p| p.1).collect(),
        radius,
    })
}

/// Total-variation distance between the value histograms of two windows.
pub fn stationarity_distance(
    ensemble: &PathEnsemble,
    window_a: &MeasureWindow,
    window_b: &MeasureWindow,
    binning: &Binning,
) -> Result<f64> {
    let ia = window_a.indices(ensemble.grid())?;
    let ib = window_b.indices(ensemble.grid())?;
    let (la, ha) = ensemble.sample_range(&ia);
    let (lb, hb) = ensemble.sample_range(&ib);
    let edges = binning.resolve(la.min(lb), ha.max(hb))?;
    tv_distance(
        &histogram_of(&ensemble.solutions, &ia, &edges)?,
        &histogram_of(&ensemble.solutions, &ib, &edges)?,
    )
}

/// Total-variation distance between the `ν` histograms of two ensembles,
/// each over its own window, on edges resolved from the union of samples.
pub fn ensemble_distance(
    a: &PathEnsemble,
    window_a: &MeasureWindow,
    b: &PathEnsemble,
    window_b: &MeasureWindow,
    binning: &Binning,
) -> Result<f64> {
    let ia = window_a.indices(a.grid())?;
    let ib = window_b.indices(b.grid())?;
    let (la, ha) = a.sample_range(&ia);
    let (lb, hb) = b.sample_range(&ib);
    let edges = binning.resolve(la.min(lb), ha.max(hb))?;
    tv_distance(
        &histogram_of(&a.solutions, &ia, &edges)?,
        &histogram_of(&b.solutions, &ib, &edges)?,
    )
}

/// Total-variation distance between one long path's time average and the
/// ensemble average.
pub fn ergodicity_check(
    single: &PathSolution,
    single_window: &MeasureWindow,
    ensemble: &PathEnsemble,
    ensemble_window: &MeasureWindow,
    binning: &Binning,
) -> Result<f64> {
    let is = single_window.indices(&single.grid)?;
    let ie = ensemble_window.indices(ensemble.grid())?;
    let (ls, hs) = range_at(&single.values, &is);
    let (le, he) = ensemble.sample_range(&ie);
    let edges = binning.resolve(ls.min(le), hs.max(he))?;
    tv_distance(
        &histogram_of(std::slice::from_ref(single), &is, &edges)?,
        &histogram_of(&ensemble.solutions, &ie, &edges)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant_ensemble(c: f64, n_paths: usize, horizon: f64) -> PathEnsemble {
        let grid = TimeGrid::for_delay(10, horizon).unwrap();
        let model = DelayModel::new("zero", |_| 0.0, |_| 0.0);
        PathEnsemble::simulate(&model, &InitialHistory::Constant(c), &grid, 1, n_paths).unwrap()
    }

    #[test]
    fn histogram_counts_and_overflow() {
        let mut h = Histogram1D::uniform(0.0, 1.0, 4).unwrap();
        for x in [-0.1, 0.0, 0.2, 0.25, 0.99, 1.0, 3.0] {
            h.add(x);
        }
        assert_eq!(h.counts(), &[2, 1, 0, 1]);
        assert_eq!((h.underflow(), h.overflow(), h.total()), (1, 2, 7));
        assert!(Histogram1D::new(vec![0.0, 0.0]).is_err());
        assert!(Histogram1D::new(vec![1.0]).is_err());
    }

    #[test]
    fn coarsening_matches_direct_binning() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 37) % 129) as f64 / 128.0 - 0.1).collect();
        let mut fine = Histogram1D::uniform(0.0, 1.0, 8).unwrap();
        let mut coarse = Histogram1D::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        for &x in &xs {
            fine.add(x);
            coarse.add(x);
        }
        let merged = fine.coarsen(2).unwrap();
        assert_eq!(merged.counts(), coarse.counts());
        for (a, b) in merged.edges().iter().zip(coarse.edges()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_paths_put_all_mass_in_one_bin() {
        let ens = constant_ensemble(0.3, 4, 20.0);
        let w = MeasureWindow::new(5.0, 10.0, 1);
        let nu = empirical_stationary_1d(&ens, &w, &Binning::default()).unwrap().nu;
        assert_eq!(nu.total(), 4 * 101);
        assert_eq!(nu.counts().iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(nu.counts()[nu.bin_of(0.3).unwrap()], nu.total());

        let ph = phase_pushforward_2d(&ens, &w, &Binning::default(), &Binning::default()).unwrap();
        assert_eq!(ph.count_at(0.3, 0.3), Some(ph.total()));
    }

    #[test]
    fn window_validation() {
        let ens = constant_ensemble(0.0, 2, 5.0);
        assert!(empirical_stationary_1d(&ens, &MeasureWindow::new(4.0, 2.0, 1), &Binning::default()).is_err());
        assert!(MeasureWindow::new(1.0, 1.0, 0).indices(ens.grid()).is_err());
        assert!(phase_pushforward_2d(&ens, &MeasureWindow::new(-0.5, 1.0, 1), &Binning::default(), &Binning::default()).is_err());
        // strided count
        assert_eq!(MeasureWindow::new(0.0, 5.0, 10).indices(ens.grid()).unwrap().len(), 6);
    }

    #[test]
    fn pushforward_edges() {
        let mut h = Histogram1D::new(vec![-0.7, 0.0, 0.7]).unwrap();
        h.add(-0.1);
        h.add(0.2);
        let y = pushforward_to_y(&h);
        assert_relative_eq!(y.edges()[0], -0.503_414_696_2, epsilon = 1e-9);
        assert_eq!(y.edges()[1], 0.0);
        assert_relative_eq!(y.edges()[2], 1.013_752_707_5, epsilon = 1e-9);
        assert_eq!(y.counts(), h.counts());
        assert!(y.edges()[0] > -1.0);
    }

    #[test]
    fn tv_distance_basics() {
        let mut a = Histogram1D::uniform(0.0, 1.0, 2).unwrap();
        let mut b = a.clone();
        a.add(0.1);
        b.add(0.9);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let c = Histogram1D::uniform(0.0, 2.0, 2).unwrap();
        assert!(tv_distance(&a, &c).is_err());
    }

    #[test]
    fn boundedness_of_zero_paths() {
        let ens = constant_ensemble(0.0, 100, 20.0);
        for eps in [0.01, 0.1, 0.5] {
            let rep = boundedness_in_probability(&ens, eps, &MeasureWindow::new(0.0, 20.0, 10)).unwrap();
            assert_eq!(rep.r_eps, 0.0);
        }
        assert!(boundedness_in_probability(&ens, 0.0, &MeasureWindow::new(0.0, 20.0, 10)).is_err());
        let small = constant_ensemble(0.0, 2, 5.0);
        assert!(boundedness_in_probability(&small, 0.1, &MeasureWindow::new(0.0, 5.0, 10)).is_err());
    }

    #[test]
    fn identical_windows_and_copies_have_zero_distance() {
        let grid = TimeGrid::for_delay(10, 30.0).unwrap();
        let model = DelayModel::new("ou", |u| -u.delayed(), |_| 0.3);
        let ens = PathEnsemble::simulate(&model, &InitialHistory::Constant(0.0), &grid, 9, 8).unwrap();
        let w = MeasureWindow::new(10.0, 20.0, 1);
        assert_eq!(stationarity_distance(&ens, &w, &w, &Binning::default()).unwrap(), 0.0);

        let one = ens.solutions()[0].clone();
        let copies = PathEnsemble::from_solutions(
            (0..3u64)
                .map(|i| PathSolution {
                    source: Some(RandomSource::new(0, i)),
                    ..one.clone()
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(ergodicity_check(&one, &w, &copies, &w, &Binning::default()).unwrap(), 0.0);
    }

    #[test]
    fn ensemble_rejects_mixed_grids_and_duplicate_streams() {
        let a = constant_ensemble(0.0, 1, 5.0).solutions()[0].clone();
        let b = constant_ensemble(0.0, 1, 6.0).solutions()[0].clone();
        assert!(PathEnsemble::from_solutions(vec![a.clone(), b]).is_err());
        assert!(PathEnsemble::from_solutions(vec![a.clone(), a]).is_err());
        assert!(PathEnsemble::from_solutions(vec![]).is_err());
    }
}
