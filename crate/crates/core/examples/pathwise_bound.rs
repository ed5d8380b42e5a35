//! Pathwise comparison bound along noisy Wright paths. The transformed
//! equation is written in negative-feedback form with G(x) = r eˣ, and the
//! noise enters through u(t) = -σ²t/2 + σW(t).
//!
//! ```text
//! cargo run --release --example pathwise_bound -- [sigma] [n_paths]
//! ```

use sdde_lab::engine::{euler_maruyama, pathwise_upper_bound_check, InitialHistory, PathwiseBound};
use sdde_lab::grid::TimeGrid;
use sdde_lab::models::{transformed_wright_model, WrightParams};
use sdde_lab::rng::RandomSource;

fn main() -> sdde_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let sigma: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.04);
    let n: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let r = 1.5;

    let alpha1 = r - 0.5 * sigma * sigma;
    let bound = PathwiseBound::new(((r + 2.0 * alpha1) / r).ln(), r, 2.0 * alpha1);
    println!("x0 = {:.4}, c = {}, delta = {:.4}", bound.x0, bound.c, bound.delta);

    let model = transformed_wright_model(&WrightParams::new(r, sigma)?);
    let grid = TimeGrid::for_delay(100, 200.0)?;
    let spd = grid.steps_per_delay() as usize;
    for i in 0..n {
        let sol = euler_maruyama(&model, &InitialHistory::Constant(0.9), &grid, &RandomSource::new(42, i))?;
        let w = sol.driving_noise().expect("simulated paths keep their source");
        let mut u = vec![0.0; sol.values.len()];
        for (j, wv) in w.values.iter().enumerate() {
            u[spd + j] = -0.5 * sigma * sigma * w.grid.time(j) + sigma * wv;
        }
        let max = sol.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rep = pathwise_upper_bound_check(&sol, &bound, &u, spd)?;
        println!(
            "path {i:>3}: max x {max:+.4}, smallest margin {:.4}, {}",
            rep.min_margin,
            if rep.holds { "holds" } else { "VIOLATED" }
        );
    }
    Ok(())
}
