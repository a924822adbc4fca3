//! Run configuration: scene, solver, dataset, and per-model hyperparameters,
//! with `desk` and `paper` scale presets and TOML overrides.
//!
//! Resolution order: pick a preset, deep-merge the optional TOML file over
//! it, then let CLI flags override individual fields. The effective
//! configuration is echoed into dataset manifests and run reports.

use serde::{Deserialize, Serialize};

use crate::aae::AaeConfig;
use crate::dataset::SplitScheme;
use crate::error::{Error, Result};
use crate::fnn::FnnConfig;
use crate::forward::SolverOptions;
use crate::inn::InnConfig;
use crate::scene::{SceneConfig, ShapeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::Config(format!("unknown scale '{other}' (desk|paper)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub split: SplitScheme,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub scale: Scale,
    pub scene: SceneConfig,
    pub shape: ShapeConfig,
    pub solver: SolverOptions,
    pub dataset: DatasetConfig,
    pub aae: AaeConfig,
    pub fnn: FnnConfig,
    pub inn: InnConfig,
}

impl RunConfig {
    /// Desk scale: 32x32 scene at 60/100 MHz, 2,400 samples, CPU-sized nets.
    pub fn desk() -> Self {
        let scene = SceneConfig {
            grid_n: 32,
            frequencies_hz: vec![60e6, 100e6],
            ..Default::default()
        };
        let input = scene.grid_n * scene.grid_n;
        RunConfig {
            scale: Scale::Desk,
            shape: ShapeConfig::default(),
            solver: SolverOptions::default(),
            dataset: DatasetConfig {
                n_samples: 2_400,
                seed: 7,
                snr_db: None,
                split: SplitScheme::Desk,
            },
            aae: AaeConfig::desk(input),
            fnn: FnnConfig::desk(),
            inn: InnConfig::desk(),
            scene,
        }
    }

    /// Paper scale: 64x64 scene at 60/80/100/120 MHz, 30,000 samples.
    pub fn paper() -> Self {
        let scene = SceneConfig::default();
        let input = scene.grid_n * scene.grid_n;
        RunConfig {
            scale: Scale::Paper,
            shape: ShapeConfig::default(),
            solver: SolverOptions::default(),
            dataset: DatasetConfig {
                n_samples: 30_000,
                seed: 7,
                snr_db: None,
                split: SplitScheme::AaePaper,
            },
            aae: AaeConfig::paper(input),
            fnn: FnnConfig::paper(),
            inn: InnConfig::paper(),
            scene,
        }
    }

    pub fn preset(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self::paper(),
        }
    }

    /// Deep-merge a TOML override file onto this configuration; any subset of
    /// keys may appear in the file.
    pub fn with_overrides(self, toml_text: &str) -> Result<Self> {
        let base = toml::Value::try_from(&self)
            .map_err(|e| Error::Config(format!("config serialization: {e}")))?;
        let patch: toml::Table = toml_text
            .parse()
            .map_err(|e| Error::Config(format!("config file: {e}")))?;
        let merged = merge(base, toml::Value::Table(patch));
        merged
            .try_into()
            .map_err(|e| Error::Config(format!("config file: {e}")))
    }

    /// Cross-field consistency on top of per-module validation.
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.solver.validate()?;
        self.fnn.validate()?;
        if self.fnn.grid_n != self.scene.grid_n {
            return Err(Error::Config(format!(
                "fnn.grid_n {} != scene.grid_n {}",
                self.fnn.grid_n, self.scene.grid_n
            )));
        }
        if self.fnn.field_len != self.scene.field_len() {
            return Err(Error::Config(format!(
                "fnn.field_len {} != scene response length {}",
                self.fnn.field_len,
                self.scene.field_len()
            )));
        }
        if self.inn.field_len != self.scene.field_len() {
            return Err(Error::Config(format!(
                "inn.field_len {} != scene response length {}",
                self.inn.field_len,
                self.scene.field_len()
            )));
        }
        if self.aae.input != self.scene.n_cells() {
            return Err(Error::Config(format!(
                "aae.input {} != scene cell count {}",
                self.aae.input,
                self.scene.n_cells()
            )));
        }
        if self.aae.latent != self.inn.latent {
            return Err(Error::Config(format!(
                "aae.latent {} != inn.latent {}",
                self.aae.latent, self.inn.latent
            )));
        }
        if self.dataset.n_samples == 0 {
            return Err(Error::Config("dataset.n_samples must be >= 1".into()));
        }
        Ok(())
    }
}

fn merge(base: toml::Value, patch: toml::Value) -> toml::Value {
    match (base, patch) {
        (toml::Value::Table(mut b), toml::Value::Table(p)) => {
            for (k, pv) in p {
                let merged = match b.remove(&k) {
                    Some(bv) => merge(bv, pv),
                    None => pv,
                };
                b.insert(k, merged);
            }
            toml::Value::Table(b)
        }
        (_, patch) => patch,
    }
}
