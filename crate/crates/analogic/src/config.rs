//! Config resolution: flags override file values, file values override
//! built-in defaults. One JSON file drives the whole pipeline — each
//! subcommand reads its own section — and every subcommand echoes the
//! fully resolved config into its output directory as
//! `config.resolved.json`. All schemas fill absent fields from their
//! defaults and reject unknown keys, so a partial file is fine and a typo
//! is a hard error.

use std::path::Path;

use analogic_core::gist::DOMAINNESS_PRESETS;
use analogic_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetConfig;
use crate::error::{AppError, Result};

/// Domainness settings shared by `translate` and `interpolate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpolationConfig {
    /// Recorded operating points; `translate` defaults to the stronger
    /// one.
    pub presets: [f64; 2],
    /// Evenly spaced sweep points for `interpolate`, endpoints included.
    pub z_steps: usize,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        Self {
            presets: DOMAINNESS_PRESETS,
            z_steps: 11,
        }
    }
}

impl InterpolationConfig {
    pub fn validate(&self) -> Result<()> {
        for z in self.presets {
            if !(0.0..=1.0).contains(&z) {
                return Err(AppError::Config(format!("preset {z} outside [0, 1]")));
            }
        }
        if self.z_steps < 2 {
            return Err(AppError::Config(
                "z_steps must be at least 2 to include both endpoints".into(),
            ));
        }
        Ok(())
    }
}

/// The pipeline-wide config file: one document, one section per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub interpolation: InterpolationConfig,
}

impl CliConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        self.interpolation.validate()
    }
}

/// Loads the pipeline config file, treating parse problems (including
/// unknown keys at any level) as configuration errors.
pub fn load_config_file(path: &Path) -> Result<CliConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

/// Writes the effective config into an output directory.
pub fn write_resolved(out_dir: &Path, cfg: &CliConfig) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let path = out_dir.join("config.resolved.json");
    let text = serde_json::to_string_pretty(cfg)
        .map_err(|e| AppError::Mismatch(format!("config serialization: {e}")))?;
    std::fs::write(&path, text).map_err(|e| AppError::io(&path, e))
}

/// Parses a `WxH` geometry such as `64x32`.
pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let parse = |part: &str| {
        part.parse::<usize>()
            .map_err(|_| AppError::Config(format!("bad size {s:?}; expected WxH like 64x32")))
    };
    match s.split_once('x') {
        Some((w, h)) => Ok((parse(w)?, parse(h)?)),
        None => Err(AppError::Config(format!(
            "bad size {s:?}; expected WxH like 64x32"
        ))),
    }
}

/// Flag-level overrides for a training run; `None` keeps whatever the
/// config file (or default) said.
#[derive(Debug, Default)]
pub struct TrainOverrides {
    pub steps: Option<u64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub checkpoint_interval: Option<u64>,
    pub width: Option<usize>,
    pub disc_width: Option<usize>,
    pub res_blocks: Option<usize>,
    pub downsamples: Option<usize>,
    /// `(width, height)`.
    pub size: Option<(usize, usize)>,
    pub least_squares: bool,
    /// Loss terms to switch off, by name.
    pub ablate: Vec<String>,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) -> Result<()> {
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.checkpoint_interval {
            cfg.checkpoint_interval = v;
        }
        if let Some(v) = self.width {
            cfg.arch.width = v;
        }
        if let Some(v) = self.disc_width {
            cfg.arch.disc_width = v;
        }
        if let Some(v) = self.res_blocks {
            cfg.arch.res_blocks = v;
        }
        if let Some(v) = self.downsamples {
            cfg.arch.downsamples = v;
        }
        if let Some((w, h)) = self.size {
            cfg.arch.image_w = w;
            cfg.arch.image_h = h;
        }
        if self.least_squares {
            cfg.gan_form = analogic_core::objectives::GanForm::LeastSquares;
        }
        for term in &self.ablate {
            match term.as_str() {
                "gist_adv" => cfg.use_gist_adv = false,
                "cyc" => cfg.use_cyc = false,
                "percep" => cfg.use_percep = false,
                "dep" => cfg.use_dep = false,
                "sup" => cfg.use_sup = false,
                other => {
                    return Err(AppError::Config(format!(
                        "unknown ablation {other:?}; expected gist_adv, cyc, percep, dep, or sup"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Flag-level overrides for dataset generation.
#[derive(Debug, Default)]
pub struct DatasetOverrides {
    pub source_pairs: Option<usize>,
    pub target_train: Option<usize>,
    pub heldout: Option<usize>,
    pub seed: Option<u64>,
    /// `(width, height)`.
    pub size: Option<(usize, usize)>,
    pub far_plane: Option<f64>,
    pub target_depth_noise: Option<f64>,
}

impl DatasetOverrides {
    pub fn apply(&self, cfg: &mut DatasetConfig) {
        if let Some(v) = self.source_pairs {
            cfg.source_pairs = v;
        }
        if let Some(v) = self.target_train {
            cfg.target_train = v;
        }
        if let Some(v) = self.heldout {
            cfg.heldout = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some((w, h)) = self.size {
            cfg.image_w = w;
            cfg.image_h = h;
        }
        if let Some(v) = self.far_plane {
            cfg.far_plane = v;
        }
        if let Some(v) = self.target_depth_noise {
            cfg.target_depth_noise = v;
        }
    }
}

/// Resolves the pipeline config from an optional file plus any
/// subcommand's overrides, then validates the whole document.
pub fn resolve(
    file: Option<&Path>,
    train_ov: Option<&TrainOverrides>,
    dataset_ov: Option<&DatasetOverrides>,
) -> Result<CliConfig> {
    let mut cfg = match file {
        Some(p) => load_config_file(p)?,
        None => CliConfig::default(),
    };
    if let Some(ov) = dataset_ov {
        ov.apply(&mut cfg.dataset);
    }
    if let Some(ov) = train_ov {
        ov.apply(&mut cfg.train)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
