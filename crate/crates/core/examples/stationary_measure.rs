//! Simulate the two regimes and summarize their long-run measures:
//! r = 1.5 collapses onto a cloud around 0, r = 1.75 circles a loop.
//!
//! ```text
//! cargo run --release --example stationary_measure -- [n_paths]
//! ```

use sdde_lab::config::presets;
use sdde_lab::measure::{
    boundedness_in_probability, empirical_stationary_1d, phase_pushforward_2d, stationarity_distance, uniform_edges,
    Binning, MeasureWindow, PathEnsemble,
};

fn main() -> sdde_lab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let window = MeasureWindow::default();
    let phase = Binning::Edges(uniform_edges(-3.0, 3.0, 120)?);

    for (name, cfg) in [("r = 1.5", presets::converging()), ("r = 1.75", presets::oscillating(0.5))] {
        let ens = PathEnsemble::simulate(
            &cfg.build_model()?,
            &cfg.history()?,
            &cfg.grid()?,
            cfg.ensemble.master_seed,
            n,
        )?;
        let nu = empirical_stationary_1d(&ens, &window, &Binning::default())?.nu;
        let xy = phase_pushforward_2d(&ens, &window, &phase, &phase)?;
        let halves = stationarity_distance(
            &ens,
            &MeasureWindow::new(250.0, 125.0, 10),
            &MeasureWindow::new(375.0, 125.0, 10),
            &Binning::default(),
        )?;
        let bounded = boundedness_in_probability(&ens, 0.01, &window)?;
        println!("{name}: {n} paths on [250, 500]");
        println!("  nu mean {:+.4}, std {:.4}", nu.mean(), nu.std());
        println!("  phase mass in [-0.2, 0.2]^2: {:.3}", xy.mass_in_rect(-0.2, 0.2, -0.2, 0.2));
        println!("  phase mass at the origin cell: {:.4}", xy.mass_in_rect(-0.05, 0.05, -0.05, 0.05));
        println!("  TV between window halves: {halves:.4}");
        println!("  R_0.01 = {:.3}", bounded.r_eps);
    }
    Ok(())
}
