use proptest::prelude::*;
use sdde_lab::bounds::{
    fixed_window_bound, reverse_sup_bound, reverse_sup_bound_nonvanishing, summed_linear_bound, summed_reverse_bound,
    wilson_interval, DriftDiffusionBand, Z_99,
};
use sdde_lab::engine::{to_x, to_y, DelayModel, InitialHistory, PathSolution, Segment};
use sdde_lab::grid::TimeGrid;
use sdde_lab::measure::{tv_distance, Histogram1D};
use sdde_lab::models::{transformed_wright_model, WrightParams};
use sdde_lab::paths::{brownian_max_tail_bound, brownian_max_tail_exact, brownian_path};
use sdde_lab::rng::RandomSource;

fn filled(edges: Vec<f64>, xs: &[f64]) -> Histogram1D {
    let mut h = Histogram1D::new(edges).unwrap();
    for &x in xs {
        h.add(x);
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn histogram_ignores_sample_order(mut xs in prop::collection::vec(-2.0f64..2.0, 1..300), seed in any::<u64>()) {
        let a = filled(sdde_lab::measure::uniform_edges(-1.5, 1.5, 16).unwrap(), &xs);
        // deterministic shuffle
        let mut s = seed | 1;
        for i in (1..xs.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            xs.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let b = filled(sdde_lab::measure::uniform_edges(-1.5, 1.5, 16).unwrap(), &xs);
        prop_assert_eq!(a.counts(), b.counts());
        prop_assert_eq!((a.underflow(), a.overflow()), (b.underflow(), b.overflow()));
        prop_assert_eq!(tv_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn coarsened_histogram_equals_direct_binning(xs in prop::collection::vec(-0.5f64..1.5, 1..300), group in prop::sample::select(vec![2usize, 4, 8])) {
        // dyadic edges are exact in binary, so both routes see the same cells
        let fine: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let coarse: Vec<f64> = fine.iter().step_by(group).copied().collect();
        let a = filled(fine, &xs).coarsen(group).unwrap();
        let b = filled(coarse, &xs);
        prop_assert_eq!(a.counts(), b.counts());
        prop_assert_eq!(a.total(), b.total());
    }

    #[test]
    fn tv_is_a_bounded_symmetric_distance(xs in prop::collection::vec(-1.0f64..1.0, 1..100), ys in prop::collection::vec(-1.0f64..1.0, 1..100)) {
        let e = sdde_lab::measure::uniform_edges(-1.0, 1.0, 10).unwrap();
        let a = filled(e.clone(), &xs);
        let b = filled(e, &ys);
        let d = tv_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert_eq!(d, tv_distance(&b, &a).unwrap());
    }

    #[test]
    fn exact_max_tail_never_exceeds_bound(c in 0.0f64..10.0, t in 0.01f64..100.0) {
        let exact = brownian_max_tail_exact(c, t).unwrap();
        let bound = brownian_max_tail_bound(c, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&exact));
        prop_assert!(exact <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn single_term_bounds_decrease_in_r(r in 0.0f64..50.0, dr in 0.01f64..5.0, alpha in 0.1f64..5.0, beta in 0.1f64..3.0) {
        // strictly decreasing until the value underflows to zero
        let pairs = [
            (reverse_sup_bound(1, r + dr, alpha, beta), reverse_sup_bound(1, r, alpha, beta)),
            (reverse_sup_bound_nonvanishing(1, r + dr, alpha, beta), reverse_sup_bound_nonvanishing(1, r, alpha, beta)),
            (fixed_window_bound(r + dr, beta, 1.0), fixed_window_bound(r, beta, 1.0)),
        ];
        for (a, b) in pairs {
            prop_assert!(a < b || (a == 0.0 && b == 0.0));
        }
    }

    #[test]
    fn summed_bounds_decrease_in_q(logq in 3.0f64..30.0, dq in 0.1f64..5.0) {
        let band = DriftDiffusionBand { alpha: 1.0, sigma: 0.1, lambda: 0.5, p: 1.0, q: logq.exp(), c: 0.5 };
        let bigger = DriftDiffusionBand { q: (logq + dq).exp(), ..band };
        prop_assert!(summed_reverse_bound(0, &bigger).unwrap() < summed_reverse_bound(0, &band).unwrap());
        let q = logq;
        let (a, b) = (summed_linear_bound(0, 1.0, q + dq, 1.0), summed_linear_bound(0, 1.0, q, 1.0));
        prop_assert!(a < b);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 100u64..100_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as u64;
        let (lo, hi) = wilson_interval(k, n, Z_99);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn brownian_coarsening_aggregates_increments(seed in any::<u64>(), stream in 0u64..1000, factor in prop::sample::select(vec![2u32, 4, 8])) {
        let fine_grid = TimeGrid::from_origin(64, 2.0).unwrap();
        let fine = brownian_path(&fine_grid, &RandomSource::new(seed, stream));
        let coarse = fine.coarsen(factor).unwrap();
        prop_assert_eq!(coarse.grid, fine_grid.coarsen(factor).unwrap());
        for (j, inc) in coarse.increments().enumerate() {
            let summed: f64 = fine.increments().skip(j * factor as usize).take(factor as usize).sum();
            prop_assert!((inc - summed).abs() <= 1e-12);
        }
        prop_assert_eq!(coarse.values[coarse.values.len() - 1], fine.values[fine.values.len() - 1]);
    }

    #[test]
    fn transforms_are_inverse(y in -0.999f64..50.0, x in -5.0f64..30.0) {
        let back = to_y(to_x(y).unwrap());
        prop_assert!((back - y).abs() <= 1e-12 * (1.0 + y.abs()));
        // x -> e^x - 1 -> x loses digits as e^x - 1 approaches -1
        let xx = to_x(to_y(x)).unwrap();
        prop_assert!((xx - x).abs() <= 1e-12 * x.abs().max(1.0) * (-x).exp().max(1.0));
    }

    #[test]
    fn wright_drift_respects_declared_bound(values in prop::collection::vec(-20.0f64..20.0, 5), r in 0.1f64..4.0, sigma in 0.0f64..1.0) {
        let model = transformed_wright_model(&WrightParams::new(r, sigma).unwrap());
        let seg = Segment::new(&values).unwrap();
        let (_, upper) = model.drift_bounds().unwrap();
        prop_assert!(model.drift(seg) <= upper);
        prop_assert!(model.diffusion(seg).powi(2) <= model.diffusion_sq_bound().unwrap() * (1.0 + 1e-15));
    }

    #[test]
    fn segment_is_the_trailing_window(spd in 1u32..16, extra in 0usize..40, k_off in 0usize..40) {
        let n_steps = spd as usize + extra;
        let grid = TimeGrid::new(-1, spd, n_steps).unwrap();
        let sol = PathSolution {
            grid,
            values: grid.times().collect(),
            model_id: "ramp".into(),
            source: None,
        };
        let k = spd as usize + k_off.min(extra);
        let seg = sol.segment_at(k).unwrap();
        prop_assert_eq!(seg.values().len(), spd as usize + 1);
        prop_assert_eq!(seg.current(), grid.time(k));
        prop_assert_eq!(seg.delayed(), grid.time(k - spd as usize));
        prop_assert!(sol.segment_at(spd as usize - 1).is_err());
        prop_assert!(sol.segment_at(n_steps + 1).is_err());
    }
}

#[test]
fn segment_examples() {
    let grid = TimeGrid::new(-1, 4, 12).unwrap();
    let sol = PathSolution {
        grid,
        values: grid.times().collect(),
        model_id: "identity".into(),
        source: None,
    };
    assert_eq!(sol.segment_at(8).unwrap().values(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    let zero = DelayModel::new("zero", |_| 0.0, |_| 0.0);
    let hist = InitialHistory::Constant(0.3);
    let s = sdde_lab::engine::euler_maruyama(&zero, &hist, &grid, &RandomSource::new(1, 0)).unwrap();
    assert!(s.values.iter().all(|&v| v == 0.3));
    assert_eq!(s.segment_at(4).unwrap().values(), &[0.3; 5]);
}
