//! Wright-type delay models and checkers for the hypotheses under which an
//! invariant measure is known to exist.
//!
//! Coordinates: `y` is the original Wright variable with barrier `y > -1`,
//! `x = log(1 + y)` is the transformed one. Drift and diffusion below are
//! written for unit delay; `u(-1)` and `u(0)` are the delayed and current
//! entries of a [`Segment`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{DelayModel, Segment};
use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrightParams {
    pub r: f64,
    pub sigma: f64,
}

impl WrightParams {
    pub fn new(r: f64, sigma: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("r = {r} must be positive")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma = {sigma} must be >= 0")));
        }
        Ok(Self { r, sigma })
    }
}

/// Growth envelope `0 <= G(x) <= γ0 + γ e^{λx}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEnvelope {
    pub gamma0: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl GEnvelope {
    pub fn new(gamma0: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(gamma0 >= 0.0) || !(gamma > 0.0) || !(lambda > 0.0) {
            return Err(Error::invalid(format!(
                "envelope needs gamma0 >= 0, gamma > 0, lambda > 0; got ({gamma0}, {gamma}, {lambda})"
            )));
        }
        Ok(Self {
            gamma0,
            gamma,
            lambda,
        })
    }

    pub fn upper(&self, x: f64) -> f64 {
        self.gamma0 + self.gamma * (self.lambda * x).exp()
    }
}

#[derive(Clone)]
pub enum NoiseKind {
    Constant(f64),
    /// `g(u(-1))`
    DelayedState(ScalarFn),
    /// `g(u(0))`
    CurrentState(ScalarFn),
}

/// Bounded noise coefficient on segments. Non-constant kinds are clamped to
/// `[-β, β]`, so the declared bound always holds.
#[derive(Clone)]
pub struct NoiseFunctional {
    kind: NoiseKind,
    bound: f64,
}

impl fmt::Debug for NoiseFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            NoiseKind::Constant(s) => format!("Constant({s})"),
            NoiseKind::DelayedState(_) => "DelayedState".into(),
            NoiseKind::CurrentState(_) => "CurrentState".into(),
        };
        f.debug_struct("NoiseFunctional")
            .field("kind", &kind)
            .field("bound", &self.bound)
            .finish()
    }
}

impl NoiseFunctional {
    pub fn constant(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Constant(sigma),
            bound: sigma.abs(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn delayed_state(g: impl Fn(f64) -> f64 + Send + Sync + 'static, beta: f64) -> Result<Self> {
        Self::clamped(NoiseKind::DelayedState(Arc::new(g)), beta)
    }

    pub fn current_state(g: impl Fn(f64) -> f64 + Send + Sync + 'static, beta: f64) -> Result<Self> {
        Self::clamped(NoiseKind::CurrentState(Arc::new(g)), beta)
    }

    fn clamped(kind: NoiseKind, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("noise bound {beta} must be finite and >= 0")));
        }
        Ok(Self { kind, bound: beta })
    }

    /// `β` with `b(u)² <= β²`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    #[inline]
    pub fn eval(&self, u: Segment<'_>) -> f64 {
        let beta = self.bound;
        match &self.kind {
            NoiseKind::Constant(s) => *s,
            NoiseKind::DelayedState(g) => g(u.delayed()).clamp(-beta, beta),
            NoiseKind::CurrentState(g) => g(u.current()).clamp(-beta, beta),
        }
    }
}

/// `dx = -r(e^{x(t-1)} - 1) dt - ½σ² dt + σ dW`.
pub fn transformed_wright_model(params: &WrightParams) -> DelayModel {
    let WrightParams { r, sigma } = *params;
    let half_var = 0.5 * sigma * sigma;
    DelayModel::new(
        "transformed_wright",
        move |u| -r * u.delayed().exp_m1() - half_var,
        move |_| sigma,
    )
    .with_drift_bounds(f64::NEG_INFINITY, r)
    .with_diffusion_sq_bound(sigma * sigma)
}

/// `dx = -r(e^{x(t-1)} - 1) dt - ½ b(x_t)² dt + b(x_t) dW`.
pub fn general_transformed_model(r: f64, b: NoiseFunctional) -> Result<DelayModel> {
    check_rate(r)?;
    let beta = b.bound();
    let bd = b.clone();
    Ok(DelayModel::new(
        "general_transformed_wright",
        move |u| {
            let bu = b.eval(u);
            -r * u.delayed().exp_m1() - 0.5 * bu * bu
        },
        move |u| bd.eval(u),
    )
    .with_drift_bounds(f64::NEG_INFINITY, r)
    .with_diffusion_sq_bound(beta * beta))
}

/// `dy = -r y(t-1)(1 + y(t)) dt + (1 + y(t)) h(y_t) dW` in the original
/// coordinates. Euler steps on this form can cross `y = -1`, so the model is
/// flagged barrier-unsafe.
pub fn original_wright_model(r: f64, h: NoiseFunctional) -> Result<DelayModel> {
    check_rate(r)?;
    Ok(DelayModel::new(
        "original_wright",
        move |u| -r * u.delayed() * (1.0 + u.current()),
        move |u| (1.0 + u.current()) * h.eval(u),
    )
    .barrier_unsafe())
}

/// `dz = -G(z(t-1)) dt + (r - a(z_t)) dt + b(z_t) dW`, with the caller
/// promising `0 <= a <= alpha` and `G >= 0`.
pub fn general_negative_feedback_model(
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    r: f64,
    a: impl Fn(Segment<'_>) -> f64 + Send + Sync + 'static,
    alpha: f64,
    b: NoiseFunctional,
) -> Result<DelayModel> {
    check_rate(r)?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must be >= 0")));
    }
    let beta = b.bound();
    Ok(DelayModel::new(
        "general_feedback",
        move |u| -g(u.delayed()) + r - a(u),
        move |u| b.eval(u),
    )
    .with_drift_bounds(f64::NEG_INFINITY, r)
    .with_diffusion_sq_bound(beta * beta))
}

/// The transformed Wright model written in negative-feedback form with
/// `G(x) = r eˣ` and `a = ½σ²`.
pub fn wright_as_negative_feedback(params: &WrightParams) -> Result<DelayModel> {
    let WrightParams { r, sigma } = *params;
    let half_var = 0.5 * sigma * sigma;
    general_negative_feedback_model(
        move |x| r * x.exp(),
        r,
        move |_| half_var,
        half_var,
        NoiseFunctional::constant(sigma),
    )
}

fn check_rate(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("r = {r} must be positive")));
    }
    Ok(())
}

/// Finite stand-ins for `G(x) → 0` as `x → -∞` and `G(x) → ∞` as `x → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSurrogates {
    pub x_low: f64,
    pub x_high: f64,
    /// Require `G(x_low) < rel_low * G(0) + abs_low`.
    pub rel_low: f64,
    pub abs_low: f64,
    /// Require `G(x_high) > high`.
    pub high: f64,
}

impl Default for LimitSurrogates {
    fn default() -> Self {
        Self {
            x_low: -50.0,
            x_high: 50.0,
            rel_low: 1e-6,
            abs_low: 1e-12,
            high: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeViolation {
    pub x: f64,
    pub g: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub probes: usize,
    pub envelope_violations: Vec<EnvelopeViolation>,
    pub lower_limit_ok: bool,
    pub upper_limit_ok: bool,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.envelope_violations.is_empty() && self.lower_limit_ok && self.upper_limit_ok
    }
}

/// Probe `0 <= G(x) <= γ0 + γe^{λx}` on `probes` and the limit surrogates.
pub fn check_envelope(
    g: impl Fn(f64) -> f64,
    env: &GEnvelope,
    probes: &[f64],
    limits: &LimitSurrogates,
) -> Result<EnvelopeReport> {
    let (lo, hi) = probes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo > limits.x_low || hi < limits.x_high {
        return Err(Error::invalid(format!(
            "probe grid [{lo}, {hi}] must cover [{}, {}]",
            limits.x_low, limits.x_high
        )));
    }
    let envelope_violations = probes
        .iter()
        .filter_map(|&x| {
            let gx = g(x);
            let upper = env.upper(x);
            let ok = gx >= 0.0 && gx <= upper * (1.0 + 1e-12);
            (!ok).then_some(EnvelopeViolation { x, g: gx, upper })
        })
        .collect();
    Ok(EnvelopeReport {
        probes: probes.len(),
        envelope_violations,
        lower_limit_ok: g(limits.x_low) < limits.rel_low * g(0.0) + limits.abs_low,
        upper_limit_ok: g(limits.x_high) > limits.high,
    })
}

/// Uniform probe grid on `[lo, hi]` with `n` points.
pub fn probe_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; strictly positive iff the condition holds.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub conditions: Vec<Condition>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn strict_less(name: &'static str, lhs: f64, rhs: f64) -> Condition {
    Condition {
        name,
        lhs,
        rhs,
        margin: rhs - lhs,
        passed: lhs < rhs,
    }
}

/// Strict conditions `β² < 2r` and `α < r` for a drift correction bounded by
/// `α` and noise bounded by `β`.
pub fn check_invariance_conditions(r: f64, alpha: f64, beta: f64) -> InvarianceReport {
    InvarianceReport {
        conditions: vec![
            strict_less("beta_sq_lt_2r", beta * beta, 2.0 * r),
            strict_less("alpha_lt_r", alpha, r),
        ],
    }
}

/// Constant-noise form: `α = ½σ²`, `β = σ`.
pub fn check_wright_invariance(params: &WrightParams) -> InvarianceReport {
    check_invariance_conditions(params.r, 0.5 * params.sigma * params.sigma, params.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seg(values: &[f64]) -> Segment<'_> {
        Segment::new(values).unwrap()
    }

    #[test]
    fn transformed_wright_plug_ins() {
        let m = transformed_wright_model(&WrightParams::new(1.5, 0.04).unwrap());
        let zero = [0.0; 5];
        assert_relative_eq!(m.drift(seg(&zero)), -0.0008, epsilon = 1e-15);
        assert_eq!(m.diffusion(seg(&zero)), 0.04);

        let m = transformed_wright_model(&WrightParams::new(2.0, 0.3).unwrap());
        let u = [std::f64::consts::LN_2, 0.1, 0.2];
        assert_relative_eq!(m.drift(seg(&u)), -2.0 - 0.045, epsilon = 1e-14);
        assert_eq!(m.diffusion_sq_bound(), Some(0.09));
        assert_eq!(m.drift_bounds(), Some((f64::NEG_INFINITY, 2.0)));
    }

    #[test]
    fn general_transformed_reductions() {
        let p = WrightParams::new(1.3, 0.2).unwrap();
        let a = transformed_wright_model(&p);
        let b = general_transformed_model(1.3, NoiseFunctional::constant(0.2)).unwrap();
        let d = general_transformed_model(1.3, NoiseFunctional::zero()).unwrap();
        for u in [[0.0, 0.0, 0.0], [0.3, -0.2, 1.0], [-2.0, 0.5, 0.1]] {
            assert_eq!(a.drift(seg(&u)), b.drift(seg(&u)));
            assert_eq!(a.diffusion(seg(&u)), b.diffusion(seg(&u)));
            assert_eq!(d.drift(seg(&u)), -1.3 * u[0].exp_m1());
            assert_eq!(d.diffusion(seg(&u)), 0.0);
        }

        let beta = 0.5;
        let noise = NoiseFunctional::delayed_state(|v| v + 0.3, beta).unwrap();
        let m = general_transformed_model(1.0, noise).unwrap();
        let zero = [0.0; 4];
        assert_relative_eq!(m.drift(seg(&zero)), -0.5 * 0.09, epsilon = 1e-15);
        // clamped to beta
        let big = [4.0, 0.0, 0.0, 0.0];
        assert_eq!(m.diffusion(seg(&big)), beta);
    }

    #[test]
    fn original_wright_plug_ins() {
        let m = original_wright_model(1.5, NoiseFunctional::constant(0.1)).unwrap();
        assert!(!m.is_barrier_safe());
        let minus_one = [-1.0; 4];
        assert_eq!(m.drift(seg(&minus_one)), 0.0);
        assert_eq!(m.diffusion(seg(&minus_one)), 0.0);
        let zero = [0.0; 4];
        assert_eq!(m.drift(seg(&zero)), 0.0);
        assert_eq!(m.diffusion(seg(&zero)), 0.1);
        let u = [1.0, 0.5, 0.0];
        assert_eq!(m.drift(seg(&u)), -1.5);
    }

    #[test]
    fn negative_feedback_form_recovers_wright() {
        let p = WrightParams::new(1.75, 0.04).unwrap();
        let w = transformed_wright_model(&p);
        let f = wright_as_negative_feedback(&p).unwrap();
        for u in [[0.0, 0.0], [0.7, -0.1], [-3.0, 2.0], [1.2, 1.2]] {
            assert_relative_eq!(w.drift(seg(&u)), f.drift(seg(&u)), epsilon = 1e-12);
            assert_eq!(w.diffusion(seg(&u)), f.diffusion(seg(&u)));
        }
        let growth = general_negative_feedback_model(|_| 0.0, 0.8, |_| 0.0, 0.0, NoiseFunctional::zero()).unwrap();
        assert_eq!(growth.drift(seg(&[5.0, -5.0])), 0.8);
    }

    #[test]
    fn envelope_checks() {
        let r = 1.5;
        let probes = probe_grid(-50.0, 50.0, 2001);
        let env = GEnvelope::new(0.0, r, 1.0).unwrap();
        let lim = LimitSurrogates::default();

        let rep = check_envelope(|x| r * x.exp(), &env, &probes, &lim).unwrap();
        assert!(rep.passed(), "{rep:?}");

        let rep = check_envelope(|x| r * (x.exp() + 1.0), &env, &probes, &lim).unwrap();
        assert!(!rep.passed());
        assert!(!rep.lower_limit_ok);

        let env1 = GEnvelope::new(0.0, 1.0, 1.0).unwrap();
        let rep = check_envelope(|x: f64| x.max(0.0), &env1, &probes, &lim).unwrap();
        assert!(rep.envelope_violations.is_empty());
        assert!(rep.lower_limit_ok);
        assert!(!rep.upper_limit_ok);
        assert!(!rep.passed());

        assert!(check_envelope(|x| x, &env, &probe_grid(-10.0, 10.0, 5), &lim).is_err());
        assert!(GEnvelope::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn invariance_conditions() {
        let rep = check_wright_invariance(&WrightParams::new(1.5, 0.04).unwrap());
        assert!(rep.passed());
        assert_relative_eq!(rep.condition("beta_sq_lt_2r").unwrap().margin, 2.9984, epsilon = 1e-12);

        let rep = check_wright_invariance(&WrightParams::new(0.5, 1.1).unwrap());
        assert!(!rep.passed());
        assert!(!rep.condition("beta_sq_lt_2r").unwrap().passed);

        let sigma = 2.0f64.sqrt();
        let rep = check_wright_invariance(&WrightParams::new(1.0, sigma).unwrap());
        let c = rep.condition("beta_sq_lt_2r").unwrap();
        assert!(!c.passed, "equality must fail: {c:?}");
        assert!(!rep.condition("alpha_lt_r").unwrap().passed);
    }

    #[test]
    fn params_validation() {
        assert!(WrightParams::new(0.0, 0.1).is_err());
        assert!(WrightParams::new(1.0, -0.1).is_err());
        assert!(NoiseFunctional::current_state(|v| v, f64::NAN).is_err());
    }
}
