//! Observed order of the Euler scheme on the noise-free Wright equation,
//! measured against the method-of-steps reference.
//!
//! ```text
//! cargo run --release --example convergence -- [r]
//! ```

use sdde_lab::engine::{euler_maruyama, method_of_steps_reference, InitialHistory};
use sdde_lab::grid::TimeGrid;
use sdde_lab::models::{transformed_wright_model, WrightParams};
use sdde_lab::rng::RandomSource;
use sdde_lab::runner::{fitted_order, max_error_against};

fn main() -> sdde_lab::Result<()> {
    let r: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.5);
    let horizon = 20.0;
    let hist = InitialHistory::Constant(0.9);
    let model = transformed_wright_model(&WrightParams::new(r, 0.0)?);
    let reference = method_of_steps_reference(move |d, _, _| -r * d.exp_m1(), &hist, horizon, 6400)?;

    let (mut dts, mut errs) = (Vec::new(), Vec::new());
    println!("{:>8} {:>12} {:>7}", "dt", "max error", "ratio");
    for spd in [25, 50, 100, 200] {
        let grid = TimeGrid::for_delay(spd, horizon)?;
        let sol = euler_maruyama(&model, &hist, &grid, &RandomSource::new(0, 0))?;
        let err = max_error_against(&sol, &reference)?;
        let ratio = errs.last().map_or(String::new(), |e: &f64| format!("{:.3}", e / err));
        println!("{:>8} {err:>12.4e} {ratio:>7}", grid.dt());
        dts.push(grid.dt());
        errs.push(err);
    }
    println!("fitted order {:.3}", fitted_order(&dts, &errs));
    Ok(())
}
