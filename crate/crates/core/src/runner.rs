//! Experiment orchestration: each `cmd_*` function reads a [`RunConfig`],
//! runs the experiment and writes its files under the configured output
//! directory. All outputs are functions of the config and master seed only.
//!
//! Every command writes `manifest.json` next to its outputs:
//!
//! ```json
//! {
//!   "command": "measure",
//!   "version": "0.1.0",
//!   "config": { ... the full RunConfig ... },
//!   "grid": { "t_start": -1, "steps_per_delay": 100, "n_steps": 50100, "dt": 0.01 },
//!   "seeds": { "master_seed": 42, "streams": [0, 99] },
//!   "files": ["nu_hist.csv", ...],
//!   "summary": { ... command specific ... }
//! }
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::bounds::{run_cases, write_bounds_csv, BoundReport, Suite};
use crate::config::{ModelKind, RunConfig};
use crate::engine::{euler_maruyama, method_of_steps_reference, to_y, PathSolution, Segment};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io::{create_csv, write_row};
use crate::measure::{
    boundedness_in_probability, empirical_stationary_1d, phase_pushforward_2d, pushforward_to_y,
    stationarity_distance, MeasureWindow, PathEnsemble,
};
use crate::rng::RandomSource;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => 3,
        Error::UnboundedInSample(_) => 2,
        _ => 1,
    }
}

/// Exit status for a run that completed but failed a check.
pub const EXIT_CHECK_FAILED: i32 = 2;

/// The error as one line of JSON, e.g.
/// `{"error":"invalid_input","message":"..."}`.
pub fn error_line(err: &Error) -> String {
    let kind = match err {
        Error::InvalidInput(_) => "invalid_input",
        Error::Divergence { .. } => "divergence",
        Error::NotApplicable(_) => "not_applicable",
        Error::UnboundedInSample(_) => "unbounded_in_sample",
        Error::Io { .. } => "io",
        Error::Config(_) => "config",
    };
    json!({ "error": kind, "message": err.to_string().replace('\n', " ") }).to_string()
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, grid: Option<&TimeGrid>, files: &[String], summary: serde_json::Value) -> Result<()> {
    let grid = grid.map(|g| {
        json!({
            "t_start": g.t_start(),
            "steps_per_delay": g.steps_per_delay(),
            "n_steps": g.n_steps(),
            "dt": g.dt(),
        })
    });
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "grid": grid,
        "seeds": {
            "master_seed": cfg.ensemble.master_seed,
            "streams": [0, cfg.ensemble.n_paths.saturating_sub(1)],
        },
        "files": files,
        "summary": summary,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn simulate_ensemble(cfg: &RunConfig) -> Result<PathEnsemble> {
    let model = cfg.build_model()?;
    PathEnsemble::simulate(
        &model,
        &cfg.history()?,
        &cfg.grid()?,
        cfg.ensemble.master_seed,
        cfg.ensemble.n_paths,
    )
}

/// `path_index,t,x[,y]` rows for the given paths up to `until`.
fn write_long_csv(path: &Path, paths: &[PathSolution], until: f64, with_y: bool) -> Result<()> {
    let mut w = create_csv(path)?;
    let header = if with_y { "path_index,t,x,y" } else { "path_index,t,x" };
    write_row(&mut w, path, format_args!("{header}"))?;
    for (i, s) in paths.iter().enumerate() {
        let idx = s.source.map_or(i as u64, |src| src.stream_index);
        for (t, x) in s.times().zip(&s.values).take_while(|(t, _)| *t <= until + 1e-9) {
            if with_y {
                write_row(&mut w, path, format_args!("{idx},{t},{x},{}", to_y(*x)))?;
            } else {
                write_row(&mut w, path, format_args!("{idx},{t},{x}"))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub n_paths: usize,
    pub final_values: Vec<f64>,
}

/// Simulate the ensemble and write `path_<i>.csv` files (or one
/// `paths_long.csv`) plus the manifest. Paths of the original model are
/// already in `y` coordinates and never get a `y` column.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateSummary> {
    let ens = simulate_ensemble(cfg)?;
    let dir = &cfg.output.dir;
    let with_y = cfg.output.with_y && cfg.model.model != ModelKind::OriginalWright;
    let mut files = Vec::new();
    if cfg.long_format() {
        let name = "paths_long.csv".to_string();
        write_long_csv(&dir.join(&name), ens.solutions(), f64::INFINITY, with_y)?;
        files.push(name);
    } else {
        for (i, s) in ens.solutions().iter().enumerate() {
            let name = format!("path_{i}.csv");
            s.write_csv(dir.join(&name), with_y)?;
            files.push(name);
        }
    }
    let final_values: Vec<f64> = ens.solutions().iter().map(|s| s.last()).collect();
    write_manifest(
        dir,
        "simulate",
        cfg,
        Some(ens.grid()),
        &files,
        json!({ "final_values": final_values }),
    )?;
    Ok(SimulateSummary {
        out_dir: dir.clone(),
        files,
        n_paths: ens.len(),
        final_values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub nu_mean: f64,
    pub nu_std: f64,
    pub window_split_tv: f64,
    pub r_eps: Option<f64>,
    pub q_lo_variation: Option<f64>,
}

/// Run the ensemble and write `nu_hist.csv`, `nu_y_hist.csv`,
/// `phase_2d.csv`, `boundedness.csv`, `stationarity.txt`, optionally
/// `deterministic.csv` and `paths_preview.csv`, and the manifest.
///
/// An ensemble that is unbounded in sample skips `boundedness.csv` and
/// records the reason instead of failing the whole run.
pub fn cmd_measure(cfg: &RunConfig) -> Result<MeasureSummary> {
    let ens = simulate_ensemble(cfg)?;
    let dir = &cfg.output.dir;
    let window = cfg.window();
    let binning = cfg.binning();
    let meta = measure_metadata(cfg, &window);
    let mut files = Vec::new();

    let pair = empirical_stationary_1d(&ens, &window, &binning)?;
    pair.nu.write_csv(dir.join("nu_hist.csv"), &meta)?;
    files.push("nu_hist.csv".to_string());
    let nu_y = if cfg.model.model == ModelKind::OriginalWright {
        pair.nu.clone()
    } else {
        pushforward_to_y(&pair.nu)
    };
    nu_y.write_csv(dir.join("nu_y_hist.csv"), &meta)?;
    files.push("nu_y_hist.csv".to_string());

    let phase = phase_pushforward_2d(&ens, &window, &binning, &binning)?;
    phase.write_csv(dir.join("phase_2d.csv"), &meta)?;
    files.push("phase_2d.csv".to_string());

    let (r_eps, q_lo_variation, bounded_note) = match boundedness_in_probability(&ens, cfg.measure.epsilon, &window) {
        Ok(rep) => {
            rep.write_csv(dir.join("boundedness.csv"))?;
            files.push("boundedness.csv".to_string());
            let end = window.t0 + window.len;
            (Some(rep.r_eps), Some(rep.q_lo_variation(window.t0, end)), None)
        }
        Err(e @ Error::UnboundedInSample(_)) => (None, None, Some(e.to_string())),
        Err(e) => return Err(e),
    };

    let half = 0.5 * window.len;
    let wa = MeasureWindow::new(window.t0, half, window.stride);
    let wb = MeasureWindow::new(window.t0 + half, half, window.stride);
    let tv = stationarity_distance(&ens, &wa, &wb, &binning)?;
    let st_path = dir.join("stationarity.txt");
    std::fs::write(
        &st_path,
        format!(
            "# total variation distance between the window halves [{}, {}] and [{}, {}]\n{tv}\n",
            wa.t0,
            wa.t0 + wa.len,
            wb.t0,
            wb.t0 + wb.len
        ),
    )
    .map_err(|e| Error::io(&st_path, e))?;
    files.push("stationarity.txt".to_string());

    if cfg.measure.deterministic_overlay && cfg.model.sigma != 0.0 {
        let det_cfg = cfg.noise_free();
        let det = euler_maruyama(
            &det_cfg.build_model()?,
            &det_cfg.history()?,
            &det_cfg.grid()?,
            &RandomSource::new(cfg.ensemble.master_seed, 0),
        )?;
        det.write_csv(dir.join("deterministic.csv"), false)?;
        files.push("deterministic.csv".to_string());
    }
    if cfg.measure.preview_paths > 0 {
        let n = cfg.measure.preview_paths.min(ens.len());
        write_long_csv(
            &dir.join("paths_preview.csv"),
            &ens.solutions()[..n],
            cfg.measure.preview_until,
            false,
        )?;
        files.push("paths_preview.csv".to_string());
    }

    let summary = MeasureSummary {
        out_dir: dir.clone(),
        files: files.clone(),
        nu_mean: pair.nu.mean(),
        nu_std: pair.nu.std(),
        window_split_tv: tv,
        r_eps,
        q_lo_variation,
    };
    let mut summary_json = serde_json::to_value(&summary).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(note) = bounded_note {
        summary_json["boundedness"] = json!(note);
    }
    write_manifest(dir, "measure", cfg, Some(ens.grid()), &files, summary_json)?;
    Ok(summary)
}

fn measure_metadata(cfg: &RunConfig, window: &MeasureWindow) -> Vec<(String, String)> {
    vec![
        ("model".into(), format!("{:?}", cfg.model.model)),
        ("r".into(), cfg.model.r.to_string()),
        ("sigma".into(), cfg.model.sigma.to_string()),
        ("window".into(), format!("[{}, {}]", window.t0, window.t0 + window.len)),
        ("stride".into(), window.stride.to_string()),
        ("n_paths".into(), cfg.ensemble.n_paths.to_string()),
        ("master_seed".into(), cfg.ensemble.master_seed.to_string()),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSummary {
    pub csv: PathBuf,
    pub reports: Vec<BoundReport>,
}

impl BoundsSummary {
    pub fn all_dominated(&self) -> bool {
        self.reports.iter().all(|r| r.dominated)
    }
}

/// Run the named suite (`smoke`, `full`, or a case file) and write
/// `bounds.csv` into `out_dir`.
pub fn cmd_bounds(selector: &str, master_seed: u64, out_dir: &Path) -> Result<BoundsSummary> {
    let suite = Suite::from_selector(selector)?;
    let reports = run_cases(&suite.cases(), master_seed)?;
    let csv = out_dir.join("bounds.csv");
    write_bounds_csv(&reports, &csv)?;
    Ok(BoundsSummary { csv, reports })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub steps_per_delay: u32,
    pub max_error: f64,
    /// Error at the previous (coarser) step divided by this one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub fitted_order: f64,
}

/// Least-squares slope of `log error` against `log dt`.
pub fn fitted_order(dts: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Max error of `path` against `reference` over grid times in `[0, T]`.
/// The reference grid must refine the path grid.
pub fn max_error_against(path: &PathSolution, reference: &PathSolution) -> Result<f64> {
    let (n, m) = (path.grid.steps_per_delay(), reference.grid.steps_per_delay());
    if m % n != 0 {
        return Err(Error::invalid(format!("reference resolution {m} is not a multiple of {n}")));
    }
    let f = (m / n) as usize;
    let start = n as usize;
    Ok(path.values[start..]
        .iter()
        .enumerate()
        .map(|(j, v)| (v - reference.values[(start + j) * f]).abs())
        .fold(0.0, f64::max))
}

/// Compare the Euler scheme at `dt`, `dt/2`, `dt/4` against the method of
/// steps reference on `[0, horizon]`, write `convergence.csv` and the
/// manifest. Only noise-free configurations are accepted.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceTable> {
    if cfg.model.sigma != 0.0 {
        return Err(Error::invalid(format!(
            "convergence study needs sigma = 0, got {}",
            cfg.model.sigma
        )));
    }
    let model = cfg.build_model()?;
    let base = cfg.steps_per_delay()?;
    let history = cfg.history()?;
    if !matches!(history, crate::engine::InitialHistory::Constant(_)) {
        return Err(Error::invalid("convergence study needs a constant history"));
    }
    let horizon = cfg.grid.horizon;
    let spds = [base, base * 2, base * 4];
    let fine = base * 4 * 8;
    let reference = method_of_steps_reference(
        |d, c, _| model.drift(Segment::new(&[d, c]).expect("finite state")),
        &history,
        horizon,
        fine,
    )?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for spd in spds {
        let grid = TimeGrid::for_delay(spd, horizon)?;
        let path = euler_maruyama(&model, &history, &grid, &RandomSource::new(cfg.ensemble.master_seed, 0))?;
        let err = max_error_against(&path, &reference)?;
        let ratio = rows.last().map(|r| r.max_error / err);
        rows.push(ConvergenceRow {
            dt: grid.dt(),
            steps_per_delay: spd,
            max_error: err,
            ratio,
        });
    }
    let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.max_error).collect();
    let table = ConvergenceTable {
        fitted_order: fitted_order(&dts, &errs),
        rows,
    };

    let dir = &cfg.output.dir;
    let path = dir.join("convergence.csv");
    let mut w = create_csv(&path)?;
    write_row(&mut w, &path, format_args!("# fitted_order = {}", table.fitted_order))?;
    write_row(&mut w, &path, format_args!("dt,steps_per_delay,max_error,ratio"))?;
    for r in &table.rows {
        let ratio = r.ratio.map_or(String::new(), |x| x.to_string());
        write_row(&mut w, &path, format_args!("{},{},{},{ratio}", r.dt, r.steps_per_delay, r.max_error))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let summary = serde_json::to_value(&table).map_err(|e| Error::Config(e.to_string()))?;
    write_manifest(dir, "convergence", cfg, None, &["convergence.csv".to_string()], summary)?;
    Ok(table)
}
