//! Deterministic behaviour of the integrator and the Wright models, checked
//! against the method-of-steps reference and closed forms.

use sdde_lab::engine::{
    euler_maruyama, euler_maruyama_streaming, method_of_steps_reference, to_x, to_y, DelayModel, InitialHistory,
};
use sdde_lab::grid::TimeGrid;
use sdde_lab::models::*;
use sdde_lab::rng::RandomSource;
use sdde_lab::Error;

fn wright(r: f64, sigma: f64) -> DelayModel {
    transformed_wright_model(&WrightParams::new(r, sigma).unwrap())
}

fn final_state(model: &DelayModel, hist: f64, spd: u32, horizon: f64) -> f64 {
    let grid = TimeGrid::for_delay(spd, horizon).unwrap();
    let seg = euler_maruyama_streaming(model, &InitialHistory::Constant(hist), &grid, &RandomSource::new(0, 0), |_, _| {})
        .unwrap();
    *seg.last().unwrap()
}

#[test]
fn linear_delay_reference_and_euler() {
    let hist = InitialHistory::Constant(1.0);
    let reference = method_of_steps_reference(|d, _, _| -d, &hist, 2.0, 10_000).unwrap();
    assert!(reference.value_at(1.0).unwrap().abs() < 1e-6);
    assert!((reference.value_at(2.0).unwrap() + 0.5).abs() < 1e-6);

    let linear = DelayModel::new("linear", |u| -u.delayed(), |_| 0.0);
    let grid = TimeGrid::for_delay(1000, 2.0).unwrap();
    let em = euler_maruyama(&linear, &hist, &grid, &RandomSource::new(3, 0)).unwrap();
    assert!(em.value_at(1.0).unwrap().abs() < 5e-3);
    assert!((em.value_at(2.0).unwrap() + 0.5).abs() < 5e-3);
}

#[test]
fn deterministic_wright_settles_at_zero() {
    let m = wright(1.5, 0.0);
    let coarse = final_state(&m, 0.9, 1000, 500.0);
    let fine = final_state(&m, 0.9, 10_000, 500.0);
    assert!(coarse.abs() < 1e-2, "x(500) = {coarse}");
    assert!(fine.abs() < 1e-2, "x(500) = {fine} at dt = 1e-4");
}

#[test]
fn reference_wright_is_self_consistent() {
    let r = 1.5;
    let rhs = move |d: f64, _: f64, _: f64| -r * d.exp_m1();
    let hist = InitialHistory::Constant(0.9);
    let a = method_of_steps_reference(rhs, &hist, 500.0, 100).unwrap();
    let b = method_of_steps_reference(rhs, &hist, 500.0, 200).unwrap();
    let c = method_of_steps_reference(rhs, &hist, 20.0, 400).unwrap();
    assert!(a.last().abs() < 1e-6 && b.last().abs() < 1e-6);
    // linear interpolation of the delayed value limits the solver to second
    // order: each halving should cut the gap by about four
    for t in [1.0, 5.0, 10.0, 20.0] {
        let (x, y, z) = (a.value_at(t).unwrap(), b.value_at(t).unwrap(), c.value_at(t).unwrap());
        assert!((x - y).abs() < 1e-4, "t = {t}: {x} vs {y}");
        assert!((y - z).abs() < 0.35 * (x - y).abs().max(1e-12), "t = {t}: no refinement");
    }
}

#[test]
fn euler_tracks_reference_at_first_order() {
    let m = wright(1.5, 0.0);
    let hist = InitialHistory::Constant(0.9);
    let reference = method_of_steps_reference(|d, _, _| -1.5 * d.exp_m1(), &hist, 10.0, 3200).unwrap();
    let err = |spd: u32| {
        let grid = TimeGrid::for_delay(spd, 10.0).unwrap();
        let sol = euler_maruyama(&m, &hist, &grid, &RandomSource::new(0, 0)).unwrap();
        let stride = (3200 / spd) as usize;
        sol.values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - reference.values[k * stride]).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(100), err(200));
    let order = (e1 / e2).log2();
    assert!((0.8..=1.2).contains(&order), "order {order}");
}

#[test]
fn transformed_and_original_agree_without_noise() {
    let r = 1.5;
    let spd = 1000;
    let grid = TimeGrid::for_delay(spd, 10.0).unwrap();
    let src = RandomSource::new(11, 0);
    let y_hist = -0.1;
    let original = original_wright_model(r, NoiseFunctional::zero()).unwrap();
    let y = euler_maruyama(&original, &InitialHistory::Constant(y_hist), &grid, &src).unwrap();
    let x = euler_maruyama(&wright(r, 0.0), &InitialHistory::Constant(to_x(y_hist).unwrap()), &grid, &src).unwrap();
    let gap = x
        .values
        .iter()
        .zip(&y.values)
        .map(|(a, b)| (to_y(*a) - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 5e-3, "max gap {gap}");
}

#[test]
fn dirac_history_is_invariant_for_every_seed() {
    let m = original_wright_model(1.5, NoiseFunctional::constant(0.5)).unwrap();
    let grid = TimeGrid::for_delay(100, 50.0).unwrap();
    for seed in [0, 1, 42, u64::MAX] {
        let sol = euler_maruyama(&m, &InitialHistory::Constant(-1.0), &grid, &RandomSource::new(seed, 7)).unwrap();
        assert!(sol.values.iter().all(|&v| v == -1.0));
    }
}

#[test]
fn drift_envelope_holds_on_random_segments() {
    let (r, sigma) = (1.75, 0.3);
    let m = wright(r, sigma);
    let mut normals = RandomSource::new(5, 0).normals();
    for _ in 0..2000 {
        let seg: Vec<f64> = (0..9).map(|_| 5.0 * normals.next().unwrap()).collect();
        let seg = sdde_lab::engine::Segment::new(&seg).unwrap();
        assert!(m.drift(seg) <= r - 0.5 * sigma * sigma);
    }
}

#[test]
fn negative_feedback_form_matches_transformed_dynamics() {
    let p = WrightParams::new(1.75, 0.04).unwrap();
    let grid = TimeGrid::for_delay(100, 30.0).unwrap();
    let src = RandomSource::new(9, 3);
    let hist = InitialHistory::Constant(0.4);
    let a = euler_maruyama(&transformed_wright_model(&p), &hist, &grid, &src).unwrap();
    let b = euler_maruyama(&wright_as_negative_feedback(&p).unwrap(), &hist, &grid, &src).unwrap();
    let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-9, "gap {gap}");
}

#[test]
fn envelope_examples() {
    let probes = probe_grid(-50.0, 50.0, 2001);
    let lim = LimitSurrogates::default();
    let env = GEnvelope::new(0.0, 1.5, 1.0).unwrap();
    assert!(check_envelope(|x| 1.5 * x.exp(), &env, &probes, &lim).unwrap().passed());
    assert!(!check_envelope(|x| 1.5 * (x.exp() + 1.0), &env, &probes, &lim).unwrap().passed());
    let unit = GEnvelope::new(0.0, 1.0, 1.0).unwrap();
    let rep = check_envelope(|x: f64| x.max(0.0), &unit, &probes, &lim).unwrap();
    assert!(rep.envelope_violations.is_empty() && rep.lower_limit_ok && !rep.upper_limit_ok);
}

#[test]
fn invariance_condition_examples() {
    let fig1 = check_wright_invariance(&WrightParams::new(1.5, 0.04).unwrap());
    assert!(fig1.passed());
    let c = fig1.condition("beta_sq_lt_2r").unwrap();
    assert!((c.margin - 2.9984).abs() < 1e-12);
    assert!(!check_wright_invariance(&WrightParams::new(0.5, 1.1).unwrap()).passed());
    assert!(!check_invariance_conditions(2.0, 0.1, 2.0).passed());
}

#[test]
fn blow_up_is_reported_not_clamped() {
    let m = DelayModel::new("explosive", |u| u.current().exp(), |_| 0.0);
    let grid = TimeGrid::for_delay(10, 20.0).unwrap();
    match euler_maruyama(&m, &InitialHistory::Constant(1.0), &grid, &RandomSource::new(0, 0)) {
        Err(Error::Divergence { step, t, .. }) => {
            assert!(step > 10 && t > 0.0);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}
