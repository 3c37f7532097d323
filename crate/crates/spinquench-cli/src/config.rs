//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinquench::lindblad::{DissipatorFields, DissipatorParams};
use spinquench::{BlochVector, ChainParams, QuenchSpec};

use crate::error::CliError;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 50.0;
pub const DEFAULT_PHASE: f64 = 0.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Ed,
    #[value(alias = "ff")]
    FreeFermion,
    Lindblad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Post-quench couplings; unset entries keep their pre-quench value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchBlock {
    pub h: f64,
    pub gamma_x: Option<f64>,
    pub gamma_y: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladBlock {
    /// Initial Bloch vector.
    pub initial: [f64; 3],
    #[serde(default)]
    pub generator: DissipatorFields,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub t_max: f64,
    pub dt: f64,
    /// Stop at the time boundary effects can reach the measured site.
    pub boundary_free: bool,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { t_max: DEFAULT_T_MAX, dt: DEFAULT_DT, boundary_free: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    H,
    GammaX,
    GammaY,
    Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub backend: Backend,
    pub site: Option<usize>,
    #[serde(default)]
    pub superposition_phase: f64,
    pub chain: Option<ChainParams>,
    pub quench: Option<QuenchBlock>,
    pub lindblad: Option<LindbladBlock>,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub output: OutputBlock,
    pub sweep: Option<SweepBlock>,
}

/// A validated run: what to evolve and on which grid.
#[derive(Clone, Debug)]
pub enum Experiment {
    Chain { backend: Backend, quench: QuenchSpec, site: usize },
    Lindblad { params: DissipatorParams, initial: BlochVector },
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fill in the measured site so the sidecar records every value used.
    pub fn resolved(mut self) -> Result<Self, CliError> {
        if let (None, Some(c)) = (self.site, &self.chain) {
            self.site = Some(c.mid_site());
        }
        self.experiment()?;
        Ok(self)
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        let g = &self.grid;
        if !(g.dt > 0.0 && g.t_max > g.dt) {
            return Err(CliError::Config(format!("grid needs dt > 0 and t_max > dt (dt = {}, t_max = {})", g.dt, g.t_max)));
        }
        match self.backend {
            Backend::Lindblad => {
                let l = self
                    .lindblad
                    .ok_or_else(|| CliError::Config("lindblad backend needs a [lindblad] block".into()))?;
                if self.chain.is_some() || self.quench.is_some() {
                    return Err(CliError::Config("lindblad backend takes no [chain] or [quench] block".into()));
                }
                let params = DissipatorParams::new(l.generator).map_err(|e| CliError::Config(e.to_string()))?;
                let [x, y, z] = l.initial;
                let initial = BlochVector::new(x, y, z);
                if !initial.is_physical() {
                    return Err(CliError::Config(format!("initial Bloch radius {} exceeds 1", initial.radius())));
                }
                Ok(Experiment::Lindblad { params, initial })
            }
            backend => {
                if self.lindblad.is_some() {
                    return Err(CliError::Config("chain backends take no [lindblad] block".into()));
                }
                let pre = self.chain.ok_or_else(|| CliError::Config("missing [chain] block".into()))?;
                let q = self.quench.ok_or_else(|| CliError::Config("missing [quench] block".into()))?;
                let post = ChainParams {
                    h: q.h,
                    gamma_x: q.gamma_x.unwrap_or(pre.gamma_x),
                    gamma_y: q.gamma_y.unwrap_or(pre.gamma_y),
                    delta: q.delta.unwrap_or(pre.delta),
                    ..pre
                };
                let quench = QuenchSpec::new(pre, post, self.superposition_phase)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let site = self.site.unwrap_or(pre.mid_site());
                if site >= pre.n {
                    return Err(CliError::Config(format!("site {site} outside a chain of {} sites", pre.n)));
                }
                Ok(Experiment::Chain { backend, quench, site })
            }
        }
    }

    /// Copy with one post-quench coupling replaced.
    pub fn with_post(&self, axis: SweepAxis, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        let q = c.quench.as_mut().ok_or_else(|| CliError::Config("sweeps need a [quench] block".into()))?;
        match axis {
            SweepAxis::H => q.h = value,
            SweepAxis::GammaX => q.gamma_x = Some(value),
            SweepAxis::GammaY => q.gamma_y = Some(value),
            SweepAxis::Delta => q.delta = Some(value),
        }
        Ok(c)
    }
}
