use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdde_lab::config::RunConfig;
use sdde_lab::runner::{cmd_bounds, cmd_convergence, cmd_measure, cmd_simulate, error_line, exit_code, EXIT_CHECK_FAILED};
use sdde_lab::{verify, Error, Result};

#[derive(Parser)]
#[command(name = "sdde-lab", version, about = "Simulate and check stochastic Wright-type delay equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and write path CSVs
    Simulate(Common),
    /// Estimate the stationary measure and related diagnostics
    Measure(Common),
    /// Check the tail bounds against Monte Carlo frequencies
    Bounds {
        #[command(flatten)]
        common: Common,
        /// `smoke`, `full`, or a TOML file of cases
        #[arg(long, default_value = "smoke")]
        suite: String,
    },
    /// Observed order of the integrator on a noise-free configuration
    Convergence(Common),
    /// Run the acceptance criteria
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run only these criteria (repeatable)
        #[arg(long = "only")]
        only: Vec<u8>,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.ensemble.master_seed = seed;
    }
    Ok(cfg)
}

fn setup_threads(common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(c) => {
            setup_threads(&c)?;
            let s = cmd_simulate(&load(&c)?)?;
            println!("wrote {} file(s) to {}", s.files.len(), s.out_dir.display());
        }
        Command::Measure(c) => {
            setup_threads(&c)?;
            let s = cmd_measure(&load(&c)?)?;
            println!(
                "nu mean {:.5}, std {:.5}, window-split TV {:.5}, R_eps {}; files in {}",
                s.nu_mean,
                s.nu_std,
                s.window_split_tv,
                s.r_eps.map_or("unbounded".into(), |r| format!("{r:.4}")),
                s.out_dir.display()
            );
        }
        Command::Bounds { common, suite } => {
            setup_threads(&common)?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let s = cmd_bounds(&suite, common.seed.unwrap_or(2024), &out)?;
            for r in s.reports.iter().filter(|r| !r.dominated) {
                println!("not dominated: {} {} (ci_hi {} > bound {})", r.family, r.params, r.ci.1, r.analytic);
            }
            println!("{} case(s), csv at {}", s.reports.len(), s.csv.display());
            if !s.all_dominated() {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::Convergence(c) => {
            setup_threads(&c)?;
            let t = cmd_convergence(&load(&c)?)?;
            println!("dt,max_error,ratio");
            for r in &t.rows {
                println!("{},{:.3e},{}", r.dt, r.max_error, r.ratio.map_or(String::new(), |x| format!("{x:.3}")));
            }
            println!("fitted order {:.3}", t.fitted_order);
        }
        Command::Verify { common, only } => {
            setup_threads(&common)?;
            let ids: Vec<u8> = if only.is_empty() {
                verify::CRITERIA.iter().map(|c| c.0).collect()
            } else {
                only
            };
            let mut failed = 0;
            for id in ids {
                let o = verify::run(id);
                println!("{o}");
                failed += !o.passed() as usize;
            }
            if failed > 0 {
                println!("{failed} criterion/criteria failed");
                return Ok(EXIT_CHECK_FAILED);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
