//! Run configuration: one TOML file with a section per concern.
//!
//! ```toml
//! [model]
//! model = "transformed_wright"   # or "original_wright", "general_feedback"
//! r = 1.5
//! sigma = 0.04
//! noise = "constant"             # or "delayed_tanh", "current_tanh"
//!
//! [grid]
//! dt = 0.01                      # must be 1/n; alternatively steps_per_delay
//! horizon = 500.0
//!
//! [history]
//! constant = 0.9
//!
//! [ensemble]
//! n_paths = 100
//! master_seed = 42
//!
//! [measure]
//! t0 = 250.0
//! len = 250.0
//! stride = 10
//! bins = 100
//! epsilon = 0.01
//!
//! [output]
//! dir = "out/converging"
//! format = "auto"                # "per_path", "long" or "auto" (long above 20 paths)
//! ```
//!
//! Every section except `[model]` has defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{DelayModel, InitialHistory};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measure::{Binning, MeasureWindow};
use crate::models::{
    general_negative_feedback_model, general_transformed_model, original_wright_model, transformed_wright_model,
    NoiseFunctional, WrightParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TransformedWright,
    OriginalWright,
    GeneralFeedback,
}

/// Shape of the noise coefficient; `sigma` sets its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    #[default]
    Constant,
    /// `σ tanh(u(-1))`
    DelayedTanh,
    /// `σ tanh(u(0))`
    CurrentTanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub model: ModelKind,
    pub r: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub noise: NoiseShape,
    /// Constant `a` of the general feedback form; defaults to `σ²/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_delay: Option<u32>,
    pub horizon: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dt: Some(0.01),
            steps_per_delay: None,
            horizon: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Values on `[-1, 0]`, one per grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled: Option<Vec<f64>>,
    /// Interpret the history in `y = eˣ - 1` coordinates and map it to `x`.
    #[serde(default)]
    pub in_y: bool,
}

impl Default for HistorySection {
    fn default() -> Self {
        Self {
            constant: Some(0.0),
            sampled: None,
            in_y: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_paths: usize,
    pub master_seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_paths: 1,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    pub t0: f64,
    pub len: f64,
    pub stride: usize,
    pub bins: usize,
    pub epsilon: f64,
    /// Also integrate the noise-free model and write `deterministic.csv`.
    pub deterministic_overlay: bool,
    /// Number of paths written to `paths_preview.csv` on `[-1, preview_until]`.
    pub preview_paths: usize,
    pub preview_until: f64,
}

impl Default for MeasureSection {
    fn default() -> Self {
        let w = MeasureWindow::default();
        Self {
            t0: w.t0,
            len: w.len,
            stride: w.stride,
            bins: 100,
            epsilon: 0.01,
            deterministic_overlay: true,
            preview_paths: 100,
            preview_until: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Auto,
    PerPath,
    Long,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// Add the `y = eˣ - 1` column to path CSVs.
    #[serde(default)]
    pub with_y: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Auto,
            with_y: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub history: HistorySection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Build every derived object once so that errors surface before any
    /// simulation starts.
    pub fn validate(&self) -> Result<()> {
        self.build_model()?;
        let grid = self.grid()?;
        self.history()?.materialize(grid.steps_per_delay())?;
        if self.ensemble.n_paths == 0 {
            return Err(Error::Config("ensemble.n_paths must be positive".into()));
        }
        let m = &self.measure;
        if m.stride == 0 || m.bins == 0 || !(m.epsilon > 0.0 && m.epsilon < 1.0) {
            return Err(Error::Config("measure needs stride > 0, bins > 0 and 0 < epsilon < 1".into()));
        }
        Ok(())
    }

    pub fn steps_per_delay(&self) -> Result<u32> {
        match (self.grid.dt, self.grid.steps_per_delay) {
            (Some(dt), None) => TimeGrid::steps_per_delay_for_dt(dt),
            (None, Some(n)) if n > 0 => Ok(n),
            (Some(dt), Some(n)) => {
                let from_dt = TimeGrid::steps_per_delay_for_dt(dt)?;
                if from_dt != n {
                    return Err(Error::Config(format!("grid.dt = {dt} disagrees with steps_per_delay = {n}")));
                }
                Ok(n)
            }
            _ => Err(Error::Config("grid needs dt or a positive steps_per_delay".into())),
        }
    }

    /// Delay-aligned grid from `-1` to the horizon.
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::for_delay(self.steps_per_delay()?, self.grid.horizon)
    }

    pub fn wright_params(&self) -> Result<WrightParams> {
        WrightParams::new(self.model.r, self.model.sigma)
    }

    fn noise(&self) -> Result<NoiseFunctional> {
        let s = self.model.sigma;
        match self.model.noise {
            NoiseShape::Constant => Ok(NoiseFunctional::constant(s)),
            NoiseShape::DelayedTanh => NoiseFunctional::delayed_state(move |x| s * x.tanh(), s.abs()),
            NoiseShape::CurrentTanh => NoiseFunctional::current_state(move |x| s * x.tanh(), s.abs()),
        }
    }

    pub fn build_model(&self) -> Result<DelayModel> {
        let params = self.wright_params()?;
        match self.model.model {
            ModelKind::TransformedWright => match self.model.noise {
                NoiseShape::Constant => Ok(transformed_wright_model(&params)),
                _ => general_transformed_model(params.r, self.noise()?),
            },
            ModelKind::OriginalWright => original_wright_model(params.r, self.noise()?),
            ModelKind::GeneralFeedback => {
                let a = self.model.a.unwrap_or(0.5 * params.sigma * params.sigma);
                if !(a >= 0.0) {
                    return Err(Error::Config(format!("model.a = {a} must be >= 0")));
                }
                let r = params.r;
                general_negative_feedback_model(move |x| r * x.exp(), r, move |_| a, a, self.noise()?)
            }
        }
    }

    /// The same configuration with the noise switched off.
    pub fn noise_free(&self) -> RunConfig {
        let mut c = self.clone();
        c.model.sigma = 0.0;
        c
    }

    pub fn history(&self) -> Result<InitialHistory> {
        let h = &self.history;
        let map = |v: f64| -> Result<f64> {
            if h.in_y {
                crate::engine::to_x(v)
            } else {
                Ok(v)
            }
        };
        match (h.constant, &h.sampled) {
            (Some(c), None) => Ok(InitialHistory::Constant(map(c)?)),
            (None, Some(v)) => Ok(InitialHistory::Sampled(v.iter().map(|&x| map(x)).collect::<Result<_>>()?)),
            _ => Err(Error::Config("history needs exactly one of constant or sampled".into())),
        }
    }

    pub fn window(&self) -> MeasureWindow {
        MeasureWindow::new(self.measure.t0, self.measure.len, self.measure.stride)
    }

    pub fn binning(&self) -> Binning {
        Binning::Auto { bins: self.measure.bins }
    }

    pub fn long_format(&self) -> bool {
        match self.output.format {
            OutputFormat::Auto => self.ensemble.n_paths > 20,
            OutputFormat::PerPath => false,
            OutputFormat::Long => true,
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Stock configurations for the converging and oscillating regimes and the Dirac case.
pub mod presets {
    use super::*;

    fn wright(r: f64, sigma: f64, history: f64, dir: &str) -> RunConfig {
        RunConfig {
            model: ModelSection {
                model: ModelKind::TransformedWright,
                r,
                sigma,
                noise: NoiseShape::Constant,
                a: None,
            },
            grid: GridSection::default(),
            history: HistorySection {
                constant: Some(history),
                sampled: None,
                in_y: false,
            },
            ensemble: EnsembleSection {
                n_paths: 100,
                master_seed: 42,
            },
            measure: MeasureSection::default(),
            output: OutputSection {
                dir: dir.into(),
                ..OutputSection::default()
            },
        }
    }

    /// Converging regime: `r = 1.5`, `σ = 0.04`, history `0.9`.
    pub fn converging() -> RunConfig {
        wright(1.5, 0.04, 0.9, "out/converging")
    }

    /// Oscillating regime: `r = 1.75`, `σ = 0.04`, history `phi`.
    pub fn oscillating(phi: f64) -> RunConfig {
        wright(1.75, 0.04, phi, "out/oscillating")
    }

    /// Original coordinates started on the barrier `y ≡ -1`.
    pub fn dirac() -> RunConfig {
        let mut c = wright(1.5, 0.04, -1.0, "out/dirac");
        c.model.model = ModelKind::OriginalWright;
        c.grid.horizon = 300.0;
        c.measure.len = 50.0;
        c.ensemble.n_paths = 4;
        c.measure.deterministic_overlay = false;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_toml_str("[model]\nmodel = \"transformed_wright\"\nr = 1.5\n").unwrap();
        assert_eq!(c.grid().unwrap().steps_per_delay(), 100);
        assert_eq!(c.ensemble.n_paths, 1);
        assert!(!c.long_format());
    }

    #[test]
    fn rejects_bad_input() {
        let base = "[model]\nmodel = \"transformed_wright\"\nr = 1.5\n";
        assert!(RunConfig::from_toml_str("[model]\nmodel = \"mackey_glass\"\nr = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[model]\nmodel = \"transformed_wright\"\nr = -1\n").is_err());
        assert!(RunConfig::from_toml_str(&format!("{base}[grid]\ndt = 0.3\nhorizon = 5\n")).is_err());
        assert!(RunConfig::from_toml_str(&format!("{base}[grid]\ndt = 0.1\nsteps_per_delay = 20\nhorizon = 5\n")).is_err());
        assert!(RunConfig::from_toml_str(&format!("{base}[grid]\nhorizon = 5\ncolour = 1\n")).is_err());
        assert!(RunConfig::from_toml_str(&format!("{base}[history]\nconstant = -1\nin_y = true\n")).is_err());
        assert!(RunConfig::from_toml_str(&format!("{base}[ensemble]\nn_paths = 0\nmaster_seed = 1\n")).is_err());
    }

    #[test]
    fn presets_roundtrip() {
        for c in [presets::converging(), presets::oscillating(0.5), presets::dirac()] {
            c.validate().unwrap();
            let back = RunConfig::from_toml_str(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
        }
        assert!(presets::converging().long_format());
    }

    #[test]
    fn model_kinds_build() {
        let mut c = presets::converging();
        for (kind, noise) in [
            (ModelKind::GeneralFeedback, NoiseShape::Constant),
            (ModelKind::TransformedWright, NoiseShape::DelayedTanh),
            (ModelKind::OriginalWright, NoiseShape::CurrentTanh),
        ] {
            c.model.model = kind;
            c.model.noise = noise;
            assert!(c.build_model().is_ok());
        }
    }
}
