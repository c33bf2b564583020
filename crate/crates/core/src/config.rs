//! Run configuration schema and its content hash.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::boundary::AdfSpec;
use crate::ffnet::{Activation, Architecture, FrequencyMode, FrequencyUnits};
use crate::residual::{BcMode, CollocationSet, ResidualProblem};
use crate::surface::{
    synthesize_gaussian, DimensionalContext, Roughness, SurfaceError, SurfaceModel,
};
use crate::trainer::TrainConfig;

pub const SEED_ENV: &str = "LUBSIM_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{SEED_ENV}={0:?} is not an unsigned integer")]
    BadSeedEnv(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub wedge_k: f64,
    #[serde(rename = "aspect_L_over_B")]
    pub aspect: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            wedge_k: 1.0,
            aspect: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    #[default]
    Smooth,
    Sinusoid {
        amplitude: f64,
        x_waves: f64,
        y_waves: f64,
    },
    Texture {
        amplitude: f64,
        lambda_x: f64,
        lambda_y: f64,
    },
    Gaussian {
        rms: f64,
        modes: usize,
        seed: u64,
    },
}

impl SurfaceSpec {
    pub fn build(&self, wedge_k: f64) -> Result<SurfaceModel, SurfaceError> {
        match *self {
            SurfaceSpec::Smooth => SurfaceModel::smooth(wedge_k),
            SurfaceSpec::Sinusoid {
                amplitude,
                x_waves,
                y_waves,
            } => SurfaceModel::new(
                wedge_k,
                Roughness::Sinusoid {
                    amplitude,
                    x_waves,
                    y_waves,
                },
            ),
            SurfaceSpec::Texture {
                amplitude,
                lambda_x,
                lambda_y,
            } => SurfaceModel::new(
                wedge_k,
                Roughness::Texture {
                    amplitude,
                    lambda_x,
                    lambda_y,
                },
            ),
            SurfaceSpec::Gaussian { rms, modes, seed } => synthesize_gaussian(wedge_k, rms, modes, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub sigmas: Vec<f64>,
    pub freqs_per_sigma: usize,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    /// `cycles` embeds `sin(2 pi f X)`, `radians` embeds `sin(f X)`.
    pub frequency_units: FrequencyUnits,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let a = Architecture::default();
        Self {
            sigmas: a.sigmas,
            freqs_per_sigma: a.freqs_per_group,
            hidden_layers: a.hidden_layers,
            neurons: a.neurons,
            activation: a.activation,
            frequency_units: a.units,
        }
    }
}

impl NetworkSection {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            sigmas: self.sigmas.clone(),
            freqs_per_group: self.freqs_per_sigma,
            hidden_layers: self.hidden_layers,
            neurons: self.neurons,
            activation: self.activation,
            units: self.frequency_units,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub mode: FrequencyMode,
    pub full_coverage: bool,
    pub collocation_jitter: bool,
    pub checkpoint_every: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr0: t.lr0,
            decay: t.decay,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            seed: t.seed,
            mode: t.mode,
            full_coverage: t.full_coverage,
            collocation_jitter: t.collocation_jitter,
            checkpoint_every: t.checkpoint_every,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub collocation_nx: usize,
    pub collocation_ny: usize,
    pub eval_nx: usize,
    pub eval_ny: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            collocation_nx: 60,
            collocation_ny: 60,
            eval_nx: 60,
            eval_ny: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub mode: BcMode,
    pub adf_m: u32,
    /// Boundary samples per edge for the soft-constraint loss.
    pub soft_points_per_edge: usize,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self {
            mode: BcMode::Hard,
            adf_m: AdfSpec::default().order(),
            soft_points_per_edge: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub surface: SurfaceSpec,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub grids: Grids,
    pub boundary: BoundarySection,
    /// Differentiate through the film-thickness input of the network.
    pub chain_through_h: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimensional: Option<DimensionalContext>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            surface: SurfaceSpec::default(),
            network: NetworkSection::default(),
            training: TrainingSection::default(),
            grids: Grids::default(),
            boundary: BoundarySection::default(),
            chain_through_h: true,
            dimensional: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Schema-level checks. Surface feasibility is checked separately by
    /// [`RunConfig::surface_model`] so that it maps to its own exit code.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let g = &self.geometry;
        if !g.wedge_k.is_finite() || !g.aspect.is_finite() || g.aspect < 0.0 {
            return bad(format!(
                "geometry needs finite wedge_k and aspect_L_over_B >= 0, got {} and {}",
                g.wedge_k, g.aspect
            ));
        }
        let gr = &self.grids;
        if gr.collocation_nx == 0 || gr.collocation_ny == 0 {
            return bad("collocation grid must be non-empty".into());
        }
        if gr.eval_nx < 3 || gr.eval_ny < 3 {
            return bad("evaluation grid needs at least 3x3 nodes".into());
        }
        if AdfSpec::new(self.boundary.adf_m).is_none() {
            return bad(format!("adf_m must be >= 1, got {}", self.boundary.adf_m));
        }
        if self.boundary.mode == BcMode::Soft && self.boundary.soft_points_per_edge == 0 {
            return bad("soft_points_per_edge must be >= 1 in soft mode".into());
        }
        self.network
            .architecture()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train_config()
            .validate(gr.collocation_nx * gr.collocation_ny)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(d) = &self.dimensional {
            d.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn surface_model(&self) -> Result<SurfaceModel, SurfaceError> {
        self.surface.build(self.geometry.wedge_k)
    }

    pub fn problem(&self, surface: SurfaceModel) -> ResidualProblem {
        let mut p = ResidualProblem::new(surface, self.geometry.aspect);
        p.adf = AdfSpec::new(self.boundary.adf_m).unwrap_or_default();
        p.bc_mode = self.boundary.mode;
        p.chain_through_h = self.chain_through_h;
        p
    }

    pub fn collocation(&self) -> CollocationSet {
        CollocationSet::cell_centered(self.grids.collocation_nx, self.grids.collocation_ny)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr0: t.lr0,
            decay: t.decay,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            seed: t.seed,
            mode: t.mode,
            bc_mode: self.boundary.mode,
            full_coverage: t.full_coverage,
            collocation_jitter: t.collocation_jitter,
            checkpoint_every: t.checkpoint_every,
        }
    }

    /// Applies the seed precedence `--seed` > `LUBSIM_SEED` > config.
    pub fn resolve_seed(&mut self, cli: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
        let seed = match (cli, env) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|_| ConfigError::BadSeedEnv(v.to_string()))?,
            (None, None) => self.training.seed,
        };
        self.training.seed = seed;
        Ok(seed)
    }

    /// Canonical JSON: every field present (defaults filled), object keys
    /// sorted, shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        // serde_json's default map is a BTreeMap, so keys come out sorted.
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Hex SHA-256 of [`RunConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
