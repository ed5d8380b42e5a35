//! Structural checks on the model family: the invariance conditions for a
//! few parameter pairs, the growth envelope of G, and agreement of the
//! transformed and original coordinates without noise.
//!
//! ```text
//! cargo run --release --example models
//! ```

use sdde_lab::engine::{euler_maruyama, to_x, to_y, InitialHistory};
use sdde_lab::grid::TimeGrid;
use sdde_lab::models::*;
use sdde_lab::rng::RandomSource;

fn main() -> sdde_lab::Result<()> {
    println!("invariance conditions (beta^2 < 2r, alpha < r):");
    for (r, sigma) in [(1.5, 0.04), (1.75, 0.04), (0.5, 1.1), (1.0, 2f64.sqrt())] {
        let rep = check_wright_invariance(&WrightParams::new(r, sigma)?);
        let margins: Vec<String> = rep.conditions.iter().map(|c| format!("{} {:+.4}", c.name, c.margin)).collect();
        println!("  r = {r}, sigma = {sigma:.4}: {} ({})", if rep.passed() { "pass" } else { "fail" }, margins.join(", "));
    }

    println!("envelope 0 <= G(x) <= gamma0 + gamma e^(lambda x):");
    let probes = probe_grid(-50.0, 50.0, 1001);
    let limits = LimitSurrogates::default();
    let env = GEnvelope::new(0.0, 1.5, 1.0)?;
    let shifted = |x: f64| 1.5 * (x.exp() + 1.0);
    for (name, rep) in [
        ("1.5 e^x", check_envelope(|x| 1.5 * x.exp(), &env, &probes, &limits)?),
        ("1.5 (e^x + 1)", check_envelope(shifted, &env, &probes, &limits)?),
    ] {
        println!(
            "  G = {name}: {} ({} envelope violations, G(-inf) -> 0 {}, G(+inf) -> inf {})",
            if rep.passed() { "pass" } else { "fail" },
            rep.envelope_violations.len(),
            rep.lower_limit_ok,
            rep.upper_limit_ok
        );
    }

    let (r, y0) = (1.5, -0.1);
    let grid = TimeGrid::for_delay(1000, 10.0)?;
    let src = RandomSource::new(0, 0);
    let y = euler_maruyama(&original_wright_model(r, NoiseFunctional::zero())?, &InitialHistory::Constant(y0), &grid, &src)?;
    let x = euler_maruyama(
        &transformed_wright_model(&WrightParams::new(r, 0.0)?),
        &InitialHistory::Constant(to_x(y0)?),
        &grid,
        &src,
    )?;
    let gap = x.values.iter().zip(&y.values).map(|(a, b)| (to_y(*a) - b).abs()).fold(0.0, f64::max);
    println!("coordinates: max |e^x - 1 - y| on [0, 10] at dt = 1e-3: {gap:.2e}");
    Ok(())
}
