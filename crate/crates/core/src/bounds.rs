//! Closed-form tail and sum bounds for Itô processes with negative drift,
//!
//! ```text
//! Y(t) = -∫_0^t a(s) ds + ∫_0^t b(s) dW(s),
//! ```
//!
//! and Monte Carlo dominance checks of each bound against simulated paths.
//!
//! Raw formula values are returned unclamped; [`BoundReport`] clamps to
//! `[0, 1]` and compares the 99% Wilson upper endpoint of the empirical
//! frequency against the clamped value. Suprema are taken over grid points,
//! which can only underestimate the continuous supremum, so the empirical
//! side is biased low.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io::{create_csv, write_row};
use crate::rng::{splitmix64, RandomSource};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

// ---------------------------------------------------------------------------
// Formulas

/// `P(sup_{θ<=t} Y(θ) >= R) <= exp(-2βR)` whenever `∫a >= β∫b²`.
/// With constant `a = α`, `b = σ` take `β = α/σ²`.
pub fn drift_dominated_sup_bound(r: f64, beta: f64) -> f64 {
    (-2.0 * beta * r).exp()
}

/// Reverse-time supremum bound for `a >= α`, `0 < β0² <= b² <= β1²`:
/// `2e^{-R²/8β1²} + 2e^{-αR/8β1²} / (1 - e^{-α²/16β1²})`, independent of `l`.
pub fn reverse_sup_bound_nonvanishing(_l: u32, r: f64, alpha: f64, beta1: f64) -> f64 {
    let s = beta1 * beta1;
    2.0 * (-r * r / (8.0 * s)).exp()
        + 2.0 * (-alpha * r / (8.0 * s)).exp() / -(-alpha * alpha / (16.0 * s)).exp_m1()
}

/// Reverse-time supremum bound for `a >= α`, `b² <= β²` (no lower bound on
/// `b`): `4e^{-R²/64β²} + 4e^{-αR/64β²} / (1 - e^{-α²/128β²})`.
pub fn reverse_sup_bound(_l: u32, r: f64, alpha: f64, beta: f64) -> f64 {
    let s = beta * beta;
    4.0 * (-r * r / (64.0 * s)).exp()
        + 4.0 * (-alpha * r / (64.0 * s)).exp() / -(-alpha * alpha / (128.0 * s)).exp_m1()
}

/// `P(sup_{t0<=t<=t0+T} ∫_{t0}^t b dW >= R) <= 2 e^{-R²/16β²T}` for `b² <= β²`.
pub fn fixed_window_bound(r: f64, beta: f64, t: f64) -> f64 {
    2.0 * (-r * r / (16.0 * beta * beta * t)).exp()
}

/// The same supremum with `b` bounded away from zero: `e^{-R²/2β0²T}`.
pub fn fixed_window_bound_nonvanishing(r: f64, beta0: f64, t: f64) -> f64 {
    (-r * r / (2.0 * beta0 * beta0 * t)).exp()
}

/// `Σ_{l>=0} 1/(pl+q)² <= 1/(p(q-p))` for `0 < p < q`.
pub fn inverse_square_sum_bound(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0) || !(q > p) {
        return Err(Error::invalid(format!("need 0 < p < q, got p = {p}, q = {q}")));
    }
    Ok(1.0 / (p * (q - p)))
}

/// Parameters shared by the summed bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusionBand {
    /// Drift bound; its direction depends on the bound being evaluated.
    pub alpha: f64,
    /// Upper bound `σ` on `|b|`.
    pub sigma: f64,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub c: f64,
}

impl DriftDiffusionBand {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma > 0.0
            && self.lambda > 0.0
            && self.p > 0.0
            && self.q > self.p
            && self.c > 0.0
            && self.alpha.is_finite();
        if !ok {
            return Err(Error::invalid(format!(
                "band needs sigma, lambda, C > 0 and 0 < p < q: {self:?}"
            )));
        }
        Ok(())
    }

    /// The same band after `Y ↦ 2λY`, which reduces every statement to
    /// `λ = 1/2`: drift, noise and `C` scale by `2λ`.
    pub fn rescaled(&self) -> DriftDiffusionBand {
        let s = 2.0 * self.lambda;
        DriftDiffusionBand {
            alpha: s * self.alpha,
            sigma: s * self.sigma,
            lambda: 0.5,
            c: s * self.c,
            ..*self
        }
    }
}

/// Logarithmic threshold `R_l = -C + log(pl + q) / 2λ`.
pub fn log_threshold(l: u32, band: &DriftDiffusionBand) -> f64 {
    -band.c + (band.p * l as f64 + band.q).ln() / (2.0 * band.lambda)
}

/// Bound on `Σ_{l=0}^m P(sup_{θ<=m-l}(Y(m-l) - Y(θ)) >= R_l)` for
/// `a >= α`, `b² <= σ²`:
///
/// `4(1 + e^{αC/64σ²} / (1 - e^{-α²/128σ²})) / (p(q-p))`.
///
/// Claimed only when `α > 32λσ²` and, after rescaling to `λ = 1/2`,
/// `log q - 2C >= 128σ²`. The closed form is invariant under the rescaling.
pub fn summed_reverse_bound(_m: u32, band: &DriftDiffusionBand) -> Result<f64> {
    band.validate()?;
    if !(band.alpha > 32.0 * band.lambda * band.sigma * band.sigma) {
        return Err(Error::NotApplicable(format!(
            "alpha = {} must exceed 32 λ σ² = {}",
            band.alpha,
            32.0 * band.lambda * band.sigma * band.sigma
        )));
    }
    let unit = band.rescaled();
    let lhs = band.q.ln() - 2.0 * unit.c;
    let rhs = 128.0 * unit.sigma * unit.sigma;
    if lhs < rhs - 1e-12 * rhs.abs().max(1.0) {
        return Err(Error::NotApplicable(format!(
            "log q - 2C = {lhs} must be at least 128 σ² = {rhs} (after rescaling to λ = 1/2)"
        )));
    }
    let s = band.sigma * band.sigma;
    let head = (band.alpha * band.c / (64.0 * s)).exp()
        / -(-band.alpha * band.alpha / (128.0 * s)).exp_m1();
    Ok(4.0 * (1.0 + head) * inverse_square_sum_bound(band.p, band.q)?)
}

/// Bound on `Σ_{l=0}^m P(sup_{m-l-1<=t<=m-l+1}(Y(t) - Y(m-l-1)) >= R_l)` for
/// `-a <= alpha_pos`, `b² <= σ²`: `2/(p(q-p))`. Claimed when, after
/// rescaling to `λ = 1/2`, `log q > 32σ² + 2C + 4α`.
pub fn summed_window_bound(_m: u32, band: &DriftDiffusionBand, alpha_pos: f64) -> Result<f64> {
    band.validate()?;
    if !(alpha_pos >= 0.0) {
        return Err(Error::invalid(format!("alpha_pos = {alpha_pos} must be >= 0")));
    }
    let unit = DriftDiffusionBand {
        alpha: alpha_pos,
        ..*band
    }
    .rescaled();
    let need = 32.0 * unit.sigma * unit.sigma + 2.0 * unit.c + 4.0 * unit.alpha;
    if !(band.q.ln() > need) {
        return Err(Error::NotApplicable(format!(
            "log q = {} must exceed 32σ² + 2C + 4α = {need} (after rescaling to λ = 1/2)",
            band.q.ln()
        )));
    }
    Ok(2.0 * inverse_square_sum_bound(band.p, band.q)?)
}

/// Bound on `Σ_{l=0}^m P(sup_{m-l<=t<=m-l+1} ∓(Y(m+1) - Y(t)) >= pl + q)`
/// (minus sign for `a <= 0`, plus sign for `a >= 0`), `b² <= σ²`:
///
/// `4e^{-q²/64σ²} + 4e^{-pq/64σ²} / (1 - e^{-p²/128σ²})`.
pub fn summed_linear_bound(_m: u32, p: f64, q: f64, sigma: f64) -> f64 {
    let s = sigma * sigma;
    4.0 * (-q * q / (64.0 * s)).exp()
        + 4.0 * (-p * q / (64.0 * s)).exp() / -(-p * p / (128.0 * s)).exp_m1()
}

// ---------------------------------------------------------------------------
// Monte Carlo side

/// Coefficients `(a, b)` of the simulated Itô process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficients {
    Constant { a: f64, b: f64 },
    /// `b(s) = σ·sign(W(s))` with `sign(0) = 1`: never vanishes but changes
    /// sign along the path.
    SignOfW { a: f64, sigma: f64 },
}

impl Coefficients {
    pub fn drift(&self) -> f64 {
        match *self {
            Coefficients::Constant { a, .. } | Coefficients::SignOfW { a, .. } => a,
        }
    }

    /// `(min b², max b²)` over all states.
    pub fn diffusion_sq_range(&self) -> (f64, f64) {
        let s = match *self {
            Coefficients::Constant { b, .. } => b * b,
            Coefficients::SignOfW { sigma, .. } => sigma * sigma,
        };
        (s, s)
    }

    #[inline]
    fn eval(&self, w: f64) -> (f64, f64) {
        match *self {
            Coefficients::Constant { a, b } => (a, b),
            Coefficients::SignOfW { a, sigma } => (a, if w >= 0.0 { sigma } else { -sigma }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSign {
    /// `sup -(Y(m+1) - Y(t))`, processes with `a <= 0`.
    Minus,
    /// `sup (Y(m+1) - Y(t))`, processes with `a >= 0`.
    Plus,
}

impl LinearSign {
    fn factor(self) -> f64 {
        match self {
            LinearSign::Minus => -1.0,
            LinearSign::Plus => 1.0,
        }
    }
}

/// Events whose frequencies are estimated. The summed variants are
/// estimated term by term on the same paths and the frequencies added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// `sup_{0<=θ<=t} Y(θ) >= R`
    Sup { horizon: f64, r: f64 },
    /// `sup_{0<=θ<=l} (Y(l) - Y(θ)) >= R`
    ReverseSup { l: u32, r: f64 },
    /// `sup_{t0<=t<=t0+T} ∫_{t0}^t b dW >= R`
    Window { t0: f64, len: f64, r: f64 },
    /// Terms `sup_{0<=θ<=m-l} (Y(m-l) - Y(θ)) >= R_l`, `l = 0..=m`.
    SummedReverse { m: u32, thresholds: Vec<f64> },
    /// Terms `sup_{m-l-1<=t<=m-l+1} (Y(t) - Y(m-l-1)) >= R_l`, `l = 0..=m`,
    /// with `Y ≡ 0` before time 0.
    SummedWindowShifted { m: u32, thresholds: Vec<f64> },
    /// Terms `sup_{m-l<=t<=m-l+1} ±(Y(m+1) - Y(t)) >= pl + q`, `l = 0..=m`.
    SummedLinear { m: u32, p: f64, q: f64, sign: LinearSign },
}

impl Event {
    fn horizon(&self) -> f64 {
        match self {
            Event::Sup { horizon, .. } => *horizon,
            Event::ReverseSup { l, .. } => *l as f64,
            Event::Window { t0, len, .. } => t0 + len,
            Event::SummedReverse { m, .. } => *m as f64,
            Event::SummedWindowShifted { m, .. } | Event::SummedLinear { m, .. } => *m as f64 + 1.0,
        }
    }

    fn n_terms(&self) -> usize {
        match self {
            Event::SummedReverse { m, .. }
            | Event::SummedWindowShifted { m, .. }
            | Event::SummedLinear { m, .. } => *m as usize + 1,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("{msg}: {self:?}")));
        match self {
            Event::Sup { horizon, .. } if !(*horizon > 0.0) => bad("horizon must be positive"),
            Event::ReverseSup { l: 0, .. } => bad("l must be positive"),
            Event::Window { t0, len, .. } if !(*t0 >= 0.0 && *len > 0.0) => bad("bad window"),
            Event::SummedReverse { m, thresholds } | Event::SummedWindowShifted { m, thresholds }
                if thresholds.len() != *m as usize + 1 =>
            {
                bad("need m + 1 thresholds")
            }
            _ => Ok(()),
        }
    }

    /// Evaluate every term's indicator on one path. `y` and `mart` hold `Y`
    /// and `∫b dW` on the grid `k / n`.
    fn indicators(&self, y: &[f64], mart: &[f64], n: usize, hit: &mut [bool]) {
        let idx = |t: f64| (t * n as f64).round() as usize;
        match self {
            Event::Sup { horizon, r } => {
                let top = y[..=idx(*horizon)].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hit[0] = top >= *r;
            }
            Event::ReverseSup { l, r } => {
                let k = *l as usize * n;
                let low = y[..=k].iter().copied().fold(f64::INFINITY, f64::min);
                hit[0] = y[k] - low >= *r;
            }
            Event::Window { t0, len, r } => {
                let (a, b) = (idx(*t0), idx(t0 + len));
                let top = mart[a..=b].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hit[0] = top - mart[a] >= *r;
            }
            Event::SummedReverse { m, thresholds } => {
                // running minimum once, then read off every L = m - l
                let mut low = f64::INFINITY;
                let mut gap = vec![0.0; *m as usize + 1];
                for (k, &v) in y.iter().enumerate() {
                    low = low.min(v);
                    if k % n == 0 {
                        gap[k / n] = v - low;
                    }
                }
                for (l, h) in hit.iter_mut().enumerate() {
                    *h = gap[*m as usize - l] >= thresholds[l];
                }
            }
            Event::SummedWindowShifted { m, thresholds } => {
                for (l, h) in hit.iter_mut().enumerate() {
                    // window [s, s + 2] with s = m - l - 1 >= -1; Y = 0 before 0
                    let s = *m as i64 - l as i64 - 1;
                    let end = ((s + 2) as usize) * n;
                    let (start_val, from) = if s < 0 { (0.0, 0) } else { (y[s as usize * n], s as usize * n) };
                    let mut top = y[from..=end].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if s < 0 {
                        top = top.max(0.0);
                    }
                    *h = top - start_val >= thresholds[l];
                }
            }
            Event::SummedLinear { m, p, q, sign } => {
                let f = sign.factor();
                let end = y[(*m as usize + 1) * n];
                for (l, h) in hit.iter_mut().enumerate() {
                    let a = (*m as usize - l) * n;
                    let top = y[a..=a + n]
                        .iter()
                        .map(|&v| f * (end - v))
                        .fold(f64::NEG_INFINITY, f64::max);
                    *h = top >= p * l as f64 + q;
                }
            }
        }
    }
}

/// Wilson score interval for `successes / n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermEstimate {
    pub hits: u64,
    pub frequency: f64,
    pub ci: (f64, f64),
}

/// Empirical frequency of an event. For summed events `frequency` is the sum
/// of the term frequencies and `ci` the sum of the term intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventEstimate {
    pub frequency: f64,
    pub ci: (f64, f64),
    pub n_paths: u64,
    pub terms: Vec<TermEstimate>,
}

/// Simulate `n_paths` Itô paths on the grid `1 / steps_per_unit` and count
/// how often the event occurs. Path `i` uses stream `i` of `source`'s
/// master seed, so counts are independent of thread scheduling.
pub fn mc_event_frequency(
    event: &Event,
    coefficients: &Coefficients,
    n_paths: u64,
    steps_per_unit: u32,
    master_seed: u64,
) -> Result<EventEstimate> {
    if n_paths < 100 {
        return Err(Error::invalid(format!(
            "n_paths = {n_paths} is too small for a meaningful interval (need >= 100)"
        )));
    }
    event.validate()?;
    let grid = TimeGrid::from_origin(steps_per_unit, event.horizon())?;
    let n = steps_per_unit as usize;
    let n_terms = event.n_terms();
    let dt = grid.dt();
    let sqrt_dt = grid.sqrt_dt();
    let len = grid.n_points();

    let counts = (0..n_paths)
        .into_par_iter()
        .fold(
            || (vec![0u64; n_terms], vec![0.0; len], vec![0.0; len], vec![false; n_terms]),
            |(mut counts, mut y, mut mart, mut hit), i| {
                let src = RandomSource::new(master_seed, i);
                let (mut yv, mut mv, mut w) = (0.0, 0.0, 0.0);
                y[0] = 0.0;
                mart[0] = 0.0;
                for (k, z) in src.normals().take(len - 1).enumerate() {
                    let (a, b) = coefficients.eval(w);
                    let dw = sqrt_dt * z;
                    mv += b * dw;
                    yv += -a * dt + b * dw;
                    w += dw;
                    y[k + 1] = yv;
                    mart[k + 1] = mv;
                }
                event.indicators(&y, &mart, n, &mut hit);
                for (c, &h) in counts.iter_mut().zip(&hit) {
                    *c += h as u64;
                }
                (counts, y, mart, hit)
            },
        )
        .map(|acc| acc.0)
        .reduce(
            || vec![0u64; n_terms],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let terms: Vec<TermEstimate> = counts
        .iter()
        .map(|&hits| TermEstimate {
            hits,
            frequency: hits as f64 / n_paths as f64,
            ci: wilson_interval(hits, n_paths, Z_99),
        })
        .collect();
    Ok(EventEstimate {
        frequency: terms.iter().map(|t| t.frequency).sum(),
        ci: (
            terms.iter().map(|t| t.ci.0).sum(),
            terms.iter().map(|t| t.ci.1).sum(),
        ),
        n_paths,
        terms,
    })
}

// ---------------------------------------------------------------------------
// Cases, reports, suites

/// A bound family with the parameters it is evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BoundFamily {
    DriftDominatedSup { beta: f64, r: f64, horizon: f64 },
    ReverseSupNonvanishing { l: u32, r: f64, alpha: f64, beta1: f64 },
    ReverseSup { l: u32, r: f64, alpha: f64, beta: f64 },
    FixedWindow { r: f64, beta: f64, t0: f64, len: f64 },
    FixedWindowNonvanishing { r: f64, beta0: f64, t0: f64, len: f64 },
    SummedReverse { m: u32, band: DriftDiffusionBand },
    SummedWindow { m: u32, band: DriftDiffusionBand, alpha_pos: f64 },
    SummedLinear { m: u32, p: f64, q: f64, sigma: f64, sign: LinearSign },
}

impl BoundFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BoundFamily::DriftDominatedSup { .. } => "drift_dominated_sup",
            BoundFamily::ReverseSupNonvanishing { .. } => "reverse_sup_nonvanishing",
            BoundFamily::ReverseSup { .. } => "reverse_sup",
            BoundFamily::FixedWindow { .. } => "fixed_window",
            BoundFamily::FixedWindowNonvanishing { .. } => "fixed_window_nonvanishing",
            BoundFamily::SummedReverse { .. } => "summed_reverse",
            BoundFamily::SummedWindow { .. } => "summed_window",
            BoundFamily::SummedLinear { sign: LinearSign::Minus, .. } => "summed_linear_neg",
            BoundFamily::SummedLinear { sign: LinearSign::Plus, .. } => "summed_linear_pos",
        }
    }

    pub fn params(&self) -> String {
        match self {
            BoundFamily::DriftDominatedSup { beta, r, horizon } => format!("beta={beta};R={r};t={horizon}"),
            BoundFamily::ReverseSupNonvanishing { l, r, alpha, beta1 } => {
                format!("l={l};R={r};alpha={alpha};beta1={beta1}")
            }
            BoundFamily::ReverseSup { l, r, alpha, beta } => format!("l={l};R={r};alpha={alpha};beta={beta}"),
            BoundFamily::FixedWindow { r, beta, t0, len } => format!("R={r};beta={beta};t0={t0};T={len}"),
            BoundFamily::FixedWindowNonvanishing { r, beta0, t0, len } => {
                format!("R={r};beta0={beta0};t0={t0};T={len}")
            }
            BoundFamily::SummedReverse { m, band } => format!(
                "m={m};alpha={};sigma={};lambda={};p={};q={};C={}",
                band.alpha, band.sigma, band.lambda, band.p, band.q, band.c
            ),
            BoundFamily::SummedWindow { m, band, alpha_pos } => format!(
                "m={m};alpha_pos={alpha_pos};sigma={};lambda={};p={};q={};C={}",
                band.sigma, band.lambda, band.p, band.q, band.c
            ),
            BoundFamily::SummedLinear { m, p, q, sigma, .. } => format!("m={m};p={p};q={q};sigma={sigma}"),
        }
    }

    pub fn analytic_raw(&self) -> Result<f64> {
        Ok(match self {
            BoundFamily::DriftDominatedSup { beta, r, .. } => drift_dominated_sup_bound(*r, *beta),
            BoundFamily::ReverseSupNonvanishing { l, r, alpha, beta1 } => {
                reverse_sup_bound_nonvanishing(*l, *r, *alpha, *beta1)
            }
            BoundFamily::ReverseSup { l, r, alpha, beta } => reverse_sup_bound(*l, *r, *alpha, *beta),
            BoundFamily::FixedWindow { r, beta, len, .. } => fixed_window_bound(*r, *beta, *len),
            BoundFamily::FixedWindowNonvanishing { r, beta0, len, .. } => {
                fixed_window_bound_nonvanishing(*r, *beta0, *len)
            }
            BoundFamily::SummedReverse { m, band } => summed_reverse_bound(*m, band)?,
            BoundFamily::SummedWindow { m, band, alpha_pos } => summed_window_bound(*m, band, *alpha_pos)?,
            BoundFamily::SummedLinear { m, p, q, sigma, .. } => summed_linear_bound(*m, *p, *q, *sigma),
        })
    }

    pub fn event(&self) -> Event {
        match self {
            BoundFamily::DriftDominatedSup { r, horizon, .. } => Event::Sup {
                horizon: *horizon,
                r: *r,
            },
            BoundFamily::ReverseSupNonvanishing { l, r, .. } | BoundFamily::ReverseSup { l, r, .. } => {
                Event::ReverseSup { l: *l, r: *r }
            }
            BoundFamily::FixedWindow { r, t0, len, .. } | BoundFamily::FixedWindowNonvanishing { r, t0, len, .. } => {
                Event::Window {
                    t0: *t0,
                    len: *len,
                    r: *r,
                }
            }
            BoundFamily::SummedReverse { m, band } => Event::SummedReverse {
                m: *m,
                thresholds: (0..=*m).map(|l| log_threshold(l, band)).collect(),
            },
            BoundFamily::SummedWindow { m, band, .. } => Event::SummedWindowShifted {
                m: *m,
                thresholds: (0..=*m).map(|l| log_threshold(l, band)).collect(),
            },
            BoundFamily::SummedLinear { m, p, q, sign, .. } => Event::SummedLinear {
                m: *m,
                p: *p,
                q: *q,
                sign: *sign,
            },
        }
    }

    /// Check that `coefficients` satisfy the hypotheses the bound needs.
    pub fn check_hypotheses(&self, coefficients: &Coefficients) -> Result<()> {
        let a = coefficients.drift();
        let (b2_lo, b2_hi) = coefficients.diffusion_sq_range();
        let tol = 1e-12;
        let fail = |what: String| Err(Error::invalid(format!("{}: {what}", self.name())));
        match self {
            BoundFamily::DriftDominatedSup { beta, .. } => {
                if !(*beta > 0.0) || a < beta * b2_hi - tol {
                    return fail(format!("need a >= β b², a = {a}, β b² = {}", beta * b2_hi));
                }
            }
            BoundFamily::ReverseSupNonvanishing { alpha, beta1, .. } => {
                if !(*alpha > 0.0) || a < alpha - tol || b2_lo <= 0.0 || b2_hi > beta1 * beta1 + tol {
                    return fail(format!("need a >= α > 0 and 0 < b² <= β1², got a = {a}, b² in [{b2_lo}, {b2_hi}]"));
                }
            }
            BoundFamily::ReverseSup { alpha, beta, .. } => {
                if !(*alpha > 0.0) || a < alpha - tol || b2_hi > beta * beta + tol {
                    return fail(format!("need a >= α > 0 and b² <= β², got a = {a}, b² <= {b2_hi}"));
                }
            }
            BoundFamily::FixedWindow { beta, .. } => {
                if !(*beta > 0.0) || b2_hi > beta * beta + tol {
                    return fail(format!("need b² <= β², got {b2_hi}"));
                }
            }
            BoundFamily::FixedWindowNonvanishing { beta0, .. } => {
                if !(*beta0 > 0.0) || b2_lo < beta0 * beta0 - tol {
                    return fail(format!("need b² >= β0² > 0, got {b2_lo}"));
                }
            }
            BoundFamily::SummedReverse { band, .. } => {
                if a < band.alpha - tol || b2_hi > band.sigma * band.sigma + tol {
                    return fail(format!("need a >= α and b² <= σ², got a = {a}, b² <= {b2_hi}"));
                }
            }
            BoundFamily::SummedWindow { band, alpha_pos, .. } => {
                if -a > alpha_pos + tol || b2_hi > band.sigma * band.sigma + tol {
                    return fail(format!("need -a <= α and b² <= σ², got a = {a}, b² <= {b2_hi}"));
                }
            }
            BoundFamily::SummedLinear { sigma, sign, .. } => {
                let sign_ok = match sign {
                    LinearSign::Minus => a <= 0.0,
                    LinearSign::Plus => a >= 0.0,
                };
                if !sign_ok || b2_hi > sigma * sigma + tol {
                    return fail(format!("drift sign or b² <= σ² violated, a = {a}, b² <= {b2_hi}"));
                }
            }
        }
        Ok(())
    }
}

/// One dominance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCase {
    #[serde(flatten)]
    pub family: BoundFamily,
    pub coefficients: Coefficients,
    pub n_paths: u64,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: u32,
    /// Multiplier applied to the analytic bound; `0.5` builds a negative
    /// control out of a valid bound.
    #[serde(default = "one")]
    pub bound_scale: f64,
}

fn default_steps_per_unit() -> u32 {
    1000
}

fn one() -> f64 {
    1.0
}

impl BoundCase {
    pub fn new(family: BoundFamily, coefficients: Coefficients, n_paths: u64) -> Self {
        Self {
            family,
            coefficients,
            n_paths,
            steps_per_unit: default_steps_per_unit(),
            bound_scale: 1.0,
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.bound_scale = factor;
        self
    }

    pub fn with_paths(mut self, n_paths: u64) -> Self {
        self.n_paths = n_paths;
        self
    }

    pub fn run(&self, master_seed: u64) -> Result<BoundReport> {
        self.family.check_hypotheses(&self.coefficients)?;
        let raw = self.family.analytic_raw()? * self.bound_scale;
        let est = mc_event_frequency(
            &self.family.event(),
            &self.coefficients,
            self.n_paths,
            self.steps_per_unit,
            master_seed,
        )?;
        let mut params = self.family.params();
        match self.coefficients {
            Coefficients::Constant { a, b } => params.push_str(&format!(";a={a};b={b}")),
            Coefficients::SignOfW { a, sigma } => params.push_str(&format!(";a={a};b={sigma}*sign(W)")),
        }
        if self.bound_scale != 1.0 {
            params.push_str(&format!(";bound_scale={}", self.bound_scale));
        }
        Ok(BoundReport::new(self.family.name(), params, raw, &est))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub family: String,
    pub params: String,
    pub analytic_raw: f64,
    /// `min(analytic_raw, 1)`
    pub analytic: f64,
    pub mc_estimate: f64,
    pub ci: (f64, f64),
    pub n_paths: u64,
    /// Upper interval endpoint at or below the clamped bound.
    pub dominated: bool,
}

impl BoundReport {
    pub fn new(family: impl Into<String>, params: String, analytic_raw: f64, est: &EventEstimate) -> Self {
        let analytic = analytic_raw.clamp(0.0, 1.0);
        Self {
            family: family.into(),
            params,
            analytic_raw,
            analytic,
            mc_estimate: est.frequency,
            ci: est.ci,
            n_paths: est.n_paths,
            dominated: est.ci.1 <= analytic,
        }
    }
}

/// `family,params,analytic_raw,analytic,mc_estimate,ci_lo,ci_hi,n_paths,dominated`;
/// `params` holds `key=value` pairs separated by `;`.
pub fn write_bounds_csv(reports: &[BoundReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_csv(path)?;
    write_row(
        &mut w,
        path,
        format_args!("family,params,analytic_raw,analytic,mc_estimate,ci_lo,ci_hi,n_paths,dominated"),
    )?;
    for r in reports {
        write_row(
            &mut w,
            path,
            format_args!(
                "{},{},{},{},{},{},{},{},{}",
                r.family, r.params, r.analytic_raw, r.analytic, r.mc_estimate, r.ci.0, r.ci.1, r.n_paths, r.dominated
            ),
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Run every case; case `i` draws from master seed `splitmix64(seed ^ i)`.
pub fn run_cases(cases: &[BoundCase], master_seed: u64) -> Result<Vec<BoundReport>> {
    cases
        .iter()
        .enumerate()
        .map(|(i, c)| c.run(splitmix64(master_seed ^ i as u64)))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CaseFile {
    case: Vec<BoundCase>,
}

/// Named parameter grids.
#[derive(Debug, Clone, PartialEq)]
pub enum Suite {
    Smoke,
    Full,
    Custom(Vec<BoundCase>),
}

impl Suite {
    /// `smoke`, `full`, or a path to a TOML file of `[[case]]` tables.
    pub fn from_selector(selector: &str) -> Result<Suite> {
        match selector {
            "smoke" => Ok(Suite::Smoke),
            "full" => Ok(Suite::Full),
            other => {
                let p = Path::new(other);
                if !p.is_file() {
                    return Err(Error::invalid(format!(
                        "unknown suite selector `{other}` (expected smoke, full, or a case file)"
                    )));
                }
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let file: CaseFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                Ok(Suite::Custom(file.case))
            }
        }
    }

    pub fn cases(&self) -> Vec<BoundCase> {
        match self {
            Suite::Smoke => smoke_cases(),
            Suite::Full => full_cases(),
            Suite::Custom(c) => c.clone(),
        }
    }
}

/// Serialize cases in the custom-grid file format.
pub fn cases_to_toml(cases: &[BoundCase]) -> Result<String> {
    toml::to_string(&CaseFile { case: cases.to_vec() }).map_err(|e| Error::Config(e.to_string()))
}

fn smoke_cases() -> Vec<BoundCase> {
    vec![
        BoundCase::new(
            BoundFamily::DriftDominatedSup { beta: 0.5, r: 1.0, horizon: 5.0 },
            Coefficients::Constant { a: 1.0, b: 1.0 },
            1000,
        ),
        BoundCase::new(
            BoundFamily::ReverseSupNonvanishing { l: 5, r: 20.0, alpha: 2.0, beta1: 1.0 },
            Coefficients::Constant { a: 2.0, b: 1.0 },
            1000,
        ),
        BoundCase::new(
            BoundFamily::FixedWindowNonvanishing { r: 2.0, beta0: 1.0, t0: 0.0, len: 1.0 },
            Coefficients::Constant { a: 0.0, b: 1.0 },
            1000,
        ),
    ]
}

/// Dominance grid covering every bound family, used by the acceptance suite.
pub fn full_cases() -> Vec<BoundCase> {
    let mut cases = Vec::new();
    let n = 10_000;

    // sup bound; the first case is tight (β = α/σ²) and needs more paths
    cases.push(
        BoundCase::new(
            BoundFamily::DriftDominatedSup { beta: 1.0, r: 1.0, horizon: 10.0 },
            Coefficients::Constant { a: 1.0, b: 1.0 },
            n,
        )
        .with_paths(100_000),
    );
    for (a, b, beta, r, t) in [(1.0, 1.0, 0.5, 2.0, 10.0), (2.0, 1.0, 1.0, 1.0, 5.0), (0.5, 0.5, 1.0, 0.5, 10.0)] {
        cases.push(BoundCase::new(
            BoundFamily::DriftDominatedSup { beta, r, horizon: t },
            Coefficients::Constant { a, b },
            n,
        ));
    }
    cases.push(BoundCase::new(
        BoundFamily::DriftDominatedSup { beta: 0.75, r: 1.0, horizon: 10.0 },
        Coefficients::SignOfW { a: 1.0, sigma: 1.0 },
        n,
    ));

    // reverse supremum, diffusion bounded away from zero
    for (alpha, beta1, r, l) in [
        (2.0, 1.0, 20.0, 5),
        (2.0, 1.0, 6.0, 5),
        (4.0, 1.0, 8.0, 8),
        (4.0, 0.5, 4.0, 3),
        (1.0, 0.5, 6.0, 8),
    ] {
        cases.push(BoundCase::new(
            BoundFamily::ReverseSupNonvanishing { l, r, alpha, beta1 },
            Coefficients::Constant { a: alpha, b: beta1 },
            n,
        ));
    }

    // reverse supremum, sign-changing diffusion
    for alpha in [1.0, 2.0] {
        for beta in [0.5, 1.0] {
            for r in [4.0, 16.0, 64.0] {
                for l in [3, 8] {
                    cases.push(BoundCase::new(
                        BoundFamily::ReverseSup { l, r, alpha, beta },
                        Coefficients::SignOfW { a: alpha, sigma: beta },
                        n,
                    ));
                }
            }
        }
    }

    // fixed window
    for (beta, len, r, coeff) in [
        (1.0, 1.0, 4.0, Coefficients::Constant { a: 0.0, b: 1.0 }),
        (1.0, 1.0, 6.0, Coefficients::SignOfW { a: 0.5, sigma: 1.0 }),
        (0.5, 2.0, 3.0, Coefficients::Constant { a: -0.3, b: 0.5 }),
    ] {
        cases.push(BoundCase::new(
            BoundFamily::FixedWindow { r, beta, t0: 1.0, len },
            coeff,
            n,
        ));
    }
    for (beta0, len, r) in [(1.0, 1.0, 2.0), (1.0, 1.0, 1.0), (0.5, 2.0, 1.5)] {
        cases.push(BoundCase::new(
            BoundFamily::FixedWindowNonvanishing { r, beta0, t0: 0.0, len },
            Coefficients::Constant { a: 0.0, b: beta0 },
            n,
        ));
    }

    // summed reverse
    let band = DriftDiffusionBand { alpha: 1.0, sigma: 0.1, lambda: 0.5, p: 1.0, q: (128.0 * 0.01 + 1.0f64).exp(), c: 0.5 };
    cases.push(BoundCase::new(
        BoundFamily::SummedReverse { m: 10, band },
        Coefficients::Constant { a: 1.0, b: 0.1 },
        n,
    ));
    let band = DriftDiffusionBand { alpha: 1.0, sigma: 0.1, lambda: 1.0, p: 1.0, q: 6.2f64.exp(), c: 0.25 };
    cases.push(BoundCase::new(
        BoundFamily::SummedReverse { m: 6, band },
        Coefficients::Constant { a: 1.0, b: 0.1 },
        n,
    ));

    // summed shifted window
    let band = DriftDiffusionBand { alpha: 0.0, sigma: 0.1, lambda: 0.5, p: 1.0, q: 1.33f64.exp(), c: 0.5 };
    cases.push(BoundCase::new(
        BoundFamily::SummedWindow { m: 10, band, alpha_pos: 0.0 },
        Coefficients::Constant { a: 0.0, b: 0.1 },
        n,
    ));
    let band = DriftDiffusionBand { alpha: 0.2, sigma: 0.1, lambda: 0.5, p: 1.0, q: 2.2f64.exp(), c: 0.5 };
    cases.push(BoundCase::new(
        BoundFamily::SummedWindow { m: 6, band, alpha_pos: 0.2 },
        Coefficients::Constant { a: -0.2, b: 0.1 },
        n,
    ));

    // summed linear thresholds, both sign conventions
    for (a, sign, q) in [(-0.5, LinearSign::Minus, 6.0), (0.5, LinearSign::Plus, 6.0), (0.0, LinearSign::Plus, 2.0)] {
        cases.push(BoundCase::new(
            BoundFamily::SummedLinear { m: 6, p: 2.0, q, sigma: 1.0, sign },
            Coefficients::Constant { a, b: 1.0 },
            n,
        ));
    }
    cases
}

/// The tight sup case with its bound halved; must be flagged.
pub fn negative_control() -> BoundCase {
    full_cases().remove(0).scaled(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_examples() {
        assert_eq!(drift_dominated_sup_bound(0.0, 3.0), 1.0);
        assert_relative_eq!(drift_dominated_sup_bound(1.0, 1.0), (-2.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(reverse_sup_bound_nonvanishing(1, 0.0, 4.0, 1.0), 5.163_953_413_738_653, epsilon = 1e-12);
        assert_relative_eq!(reverse_sup_bound_nonvanishing(7, 20.0, 2.0, 1.0), 0.060_921_978_772_289_5, epsilon = 1e-14);
        let r0 = reverse_sup_bound(3, 0.0, 2.0, 1.0);
        assert!(r0 >= 5.0);
        assert_relative_eq!(reverse_sup_bound(3, 64.0, 2.0, 1.0), 17.594_996_540_348_9, max_relative = 1e-12);
        assert_eq!(fixed_window_bound(0.0, 1.0, 1.0), 2.0);
        assert_eq!(fixed_window_bound_nonvanishing(0.0, 1.0, 1.0), 1.0);
        assert_relative_eq!(fixed_window_bound(4.0, 1.0, 1.0), 2.0 * (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(fixed_window_bound_nonvanishing(2.0, 1.0, 1.0), (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn inverse_square_sum() {
        assert_eq!(inverse_square_sum_bound(1.0, 2.0).unwrap(), 1.0);
        assert_eq!(inverse_square_sum_bound(2.0, 3.0).unwrap(), 0.5);
        assert_relative_eq!(inverse_square_sum_bound(1.0, 1.01).unwrap(), 100.0, epsilon = 1e-9);
        assert!(inverse_square_sum_bound(0.0, 1.0).is_err());
        assert!(inverse_square_sum_bound(2.0, 2.0).is_err());
    }

    #[test]
    fn thresholds() {
        let mut band = DriftDiffusionBand { alpha: 1.0, sigma: 0.1, lambda: 0.5, p: 1.0, q: 1.0, c: 1e-300 };
        assert_relative_eq!(log_threshold(0, &band), 0.0, epsilon = 1e-15);
        band.c = 1.0;
        band.q = 2.0f64.exp();
        assert_relative_eq!(log_threshold(0, &band), 1.0, epsilon = 1e-15);
        for l in 0..50 {
            assert!(log_threshold(l + 1, &band) > log_threshold(l, &band));
        }
    }

    #[test]
    fn summed_bounds_preconditions() {
        let ok = DriftDiffusionBand { alpha: 1.0, sigma: 0.1, lambda: 0.5, p: 1.0, q: 2.28f64.exp(), c: 0.5 };
        assert!(summed_reverse_bound(10, &ok).is_ok());
        let weak_drift = DriftDiffusionBand { alpha: 0.1, ..ok };
        assert!(matches!(summed_reverse_bound(10, &weak_drift), Err(Error::NotApplicable(_))));
        let small_q = DriftDiffusionBand { q: 2.0, ..ok };
        assert!(matches!(summed_reverse_bound(10, &small_q), Err(Error::NotApplicable(_))));
        let big = summed_reverse_bound(10, &DriftDiffusionBand { q: 1e3, ..ok }).unwrap();
        let bigger = summed_reverse_bound(10, &DriftDiffusionBand { q: 1e6, ..ok }).unwrap();
        assert!(bigger < big);

        let w = DriftDiffusionBand { alpha: 0.0, sigma: 0.1, lambda: 0.5, p: 1.0, q: 1.33f64.exp(), c: 0.5 };
        assert_relative_eq!(summed_window_bound(10, &w, 0.0).unwrap(), 2.0 / (w.q - 1.0), epsilon = 1e-15);
        assert!(matches!(summed_window_bound(10, &w, 1.0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn window_summand_uses_unit_length_constant() {
        // the per-window summand behind the summed window bound carries the
        // length-1 constant although the windows have length 2
        let band = DriftDiffusionBand { alpha: 0.3, sigma: 0.2, lambda: 0.5, p: 1.0, q: 20.0, c: 0.5 };
        let shifted = log_threshold(0, &band) - 2.0 * band.alpha;
        let summand = 2.0 * (-shifted * shifted / (16.0 * band.sigma * band.sigma)).exp();
        assert_relative_eq!(summand, fixed_window_bound(shifted, band.sigma, 1.0), max_relative = 1e-15);
        assert!(summand < fixed_window_bound(shifted, band.sigma, 2.0));
    }

    #[test]
    fn linear_bound_decays_in_q() {
        assert!(summed_linear_bound(3, 1.0, 1e4, 1.0) < 1e-60);
        let mut prev = f64::INFINITY;
        for q in [1.0, 10.0, 100.0, 1000.0] {
            let v = summed_linear_bound(3, 1.0, q, 1.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn wilson_interval_properties() {
        let (lo, hi) = wilson_interval(0, 10_000, Z_99);
        assert_eq!(lo, 0.0);
        assert_relative_eq!(hi, Z_99 * Z_99 / (10_000.0 + Z_99 * Z_99), epsilon = 1e-12);
        let (lo, hi) = wilson_interval(455, 10_000, Z_99);
        assert!(lo < 0.0455 && 0.0455 < hi);
        assert_eq!(wilson_interval(100, 100, Z_99).1, 1.0);
    }

    #[test]
    fn mc_trivial_events() {
        let e = mc_event_frequency(
            &Event::Sup { horizon: 1.0, r: -1.0 },
            &Coefficients::Constant { a: 0.0, b: 1.0 },
            200,
            100,
            1,
        )
        .unwrap();
        assert_eq!(e.frequency, 1.0);
        let e = mc_event_frequency(
            &Event::ReverseSup { l: 5, r: 1.0 },
            &Coefficients::Constant { a: 100.0, b: 0.01 },
            10_000,
            100,
            2,
        )
        .unwrap();
        assert_eq!(e.frequency, 0.0);
        assert!(mc_event_frequency(&Event::Sup { horizon: 1.0, r: 0.0 }, &Coefficients::Constant { a: 0.0, b: 1.0 }, 99, 10, 0).is_err());
    }

    #[test]
    fn mc_is_deterministic_per_seed() {
        let ev = Event::SummedLinear { m: 3, p: 0.5, q: 0.5, sign: LinearSign::Plus };
        let c = Coefficients::SignOfW { a: 0.2, sigma: 1.0 };
        let a = mc_event_frequency(&ev, &c, 500, 50, 7).unwrap();
        let b = mc_event_frequency(&ev, &c, 500, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.terms.len(), 4);
    }

    #[test]
    fn hypotheses_are_enforced() {
        let fam = BoundFamily::ReverseSup { l: 3, r: 4.0, alpha: 2.0, beta: 0.5 };
        assert!(fam.check_hypotheses(&Coefficients::SignOfW { a: 2.0, sigma: 0.5 }).is_ok());
        assert!(fam.check_hypotheses(&Coefficients::SignOfW { a: 1.0, sigma: 0.5 }).is_err());
        assert!(fam.check_hypotheses(&Coefficients::Constant { a: 2.0, b: 1.0 }).is_err());
        let nv = BoundFamily::ReverseSupNonvanishing { l: 3, r: 4.0, alpha: 2.0, beta1: 1.0 };
        assert!(nv.check_hypotheses(&Coefficients::Constant { a: 2.0, b: 0.0 }).is_err());
        for c in full_cases() {
            c.family.check_hypotheses(&c.coefficients).unwrap();
        }
    }

    #[test]
    fn full_suite_shape() {
        let cases = full_cases();
        assert!(cases.len() >= 30);
        let mut families: Vec<&str> = cases.iter().map(|c| c.family.name()).collect();
        families.dedup();
        for f in [
            "drift_dominated_sup",
            "reverse_sup_nonvanishing",
            "reverse_sup",
            "fixed_window",
            "fixed_window_nonvanishing",
            "summed_reverse",
            "summed_window",
            "summed_linear_neg",
            "summed_linear_pos",
        ] {
            assert!(families.contains(&f), "missing {f}");
        }
    }

    #[test]
    fn case_file_roundtrip() {
        let cases = smoke_cases();
        let text = cases_to_toml(&cases).unwrap();
        let back: CaseFile = toml::from_str(&text).unwrap();
        assert_eq!(back.case, cases);
    }
}
