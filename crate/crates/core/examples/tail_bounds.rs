//! Run a dominance suite and print one row per case.
//!
//! ```text
//! cargo run --release --example tail_bounds -- [smoke|full|cases.toml] [out.csv]
//! ```

use std::time::Instant;

use sdde_lab::bounds::{run_cases, write_bounds_csv, Suite};

fn main() -> sdde_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let suite = Suite::from_selector(&args.next().unwrap_or_else(|| "smoke".into()))?;
    let out = args.next().unwrap_or_else(|| "out/bounds.csv".into());

    let start = Instant::now();
    let reports = run_cases(&suite.cases(), 2024)?;
    println!("{:<26} {:>10} {:>10} {:>10} {:>4}  params", "family", "bound", "mc", "ci_hi", "ok");
    for r in &reports {
        println!(
            "{:<26} {:>10.3e} {:>10.3e} {:>10.3e} {:>4}  {}",
            r.family, r.analytic, r.mc_estimate, r.ci.1, if r.dominated { "yes" } else { "NO" }, r.params
        );
    }
    let failed = reports.iter().filter(|r| !r.dominated).count();
    println!("{} cases, {failed} not dominated, {:.1?}", reports.len(), start.elapsed());
    write_bounds_csv(&reports, &out)?;
    println!("wrote {out}");
    Ok(())
}
