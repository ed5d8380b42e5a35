//! Brownian running maximum: Monte Carlo frequency against the exact law
//! and the Gaussian tail bound, plus one sample path written as CSV.
//!
//! ```text
//! cargo run --release --example brownian -- [n_paths]
//! ```

use rayon::prelude::*;
use sdde_lab::bounds::{wilson_interval, Z_99};
use sdde_lab::grid::TimeGrid;
use sdde_lab::paths::{brownian_max_tail_bound, brownian_max_tail_exact, brownian_path, running_max};
use sdde_lab::rng::RandomSource;

fn main() -> sdde_lab::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let grid = TimeGrid::from_origin(1000, 1.0)?;
    let maxima: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| *running_max(&brownian_path(&grid, &RandomSource::new(1, i)).values).last().unwrap())
        .collect();

    println!("{n} paths, dt = {}", grid.dt());
    println!("{:>5} {:>9} {:>21} {:>9} {:>9}", "c", "mc", "99% interval", "exact", "bound");
    for c in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
        let hits = maxima.iter().filter(|&&m| m >= c).count() as u64;
        let (lo, hi) = wilson_interval(hits, n, Z_99);
        println!(
            "{c:>5} {:>9.5} [{lo:>8.5}, {hi:>8.5}] {:>9.5} {:>9.5}",
            hits as f64 / n as f64,
            brownian_max_tail_exact(c, 1.0)?,
            brownian_max_tail_bound(c, 1.0)?
        );
    }

    brownian_path(&grid, &RandomSource::new(1, 0)).write_csv("out/brownian_path.csv")?;
    println!("wrote out/brownian_path.csv");
    Ok(())
}
