//! The dataset manifest: a JSON index of every generated sample, its split,
//! its files (paths relative to the manifest), and the fog scenario that
//! produced it. Schema is versioned; loading validates structure, split
//! counts, id uniqueness, and that every referenced file exists.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use analogic_core::fog::FogParams;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::pngio::DepthRange;

pub const SCHEMA: &str = "analogic-manifest/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Paired clear/foggy samples of the supervised domain.
    Source,
    /// Clear-only samples of the unsupervised domain.
    TargetTrain,
    /// Evaluation-only samples carrying the ground-truth foggy render the
    /// trainer must never read.
    HeldoutOracle,
}

/// Fog scenario of one entry, serializable form of [`FogParams`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogSpec {
    pub beta: f64,
    pub airlight: [f64; 3],
}

impl FogSpec {
    pub fn params(&self) -> Result<FogParams> {
        Ok(FogParams::new(self.beta, self.airlight)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub id: String,
    pub split: Split,
    pub clear_path: String,
    pub depth_path: String,
    /// Present on source entries (the paired translated image) and on
    /// held-out oracle entries (the ground truth); absent on target-train.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub foggy_path: Option<String>,
    pub fog: FogSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthQuantization {
    /// Meter value of code 0.
    pub min_depth: f64,
    /// Meter value of the maximum code; equals the scene far plane.
    pub max_depth: f64,
    pub bits: u8,
}

impl DepthQuantization {
    pub fn range(&self) -> Result<DepthRange> {
        if self.bits != 16 {
            return Err(AppError::Mismatch(format!(
                "only 16-bit depth maps are supported, manifest says {}",
                self.bits
            )));
        }
        DepthRange::new(self.min_depth, self.max_depth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub image_h: usize,
    pub image_w: usize,
    /// Scene far plane in meters; depth-loss targets are depth divided by
    /// this value.
    pub far_plane: f64,
    pub depth_quantization: DepthQuantization,
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Structural validation, independent of the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(AppError::Mismatch(format!(
                "manifest schema {:?} is not {SCHEMA:?}",
                self.schema
            )));
        }
        if self.image_h == 0 || self.image_w == 0 {
            return Err(AppError::Mismatch("manifest image size is zero".into()));
        }
        self.depth_quantization.range()?;
        if (self.depth_quantization.max_depth - self.far_plane).abs() > 1e-9 {
            return Err(AppError::Mismatch(format!(
                "depth quantization max {} disagrees with far plane {}",
                self.depth_quantization.max_depth, self.far_plane
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(AppError::Mismatch(format!("duplicate entry id {:?}", e.id)));
            }
            e.fog.params()?;
            match e.split {
                Split::Source | Split::HeldoutOracle if e.foggy_path.is_none() => {
                    return Err(AppError::Mismatch(format!(
                        "entry {:?} in {:?} lacks its foggy render",
                        e.id, e.split
                    )));
                }
                Split::TargetTrain if e.foggy_path.is_some() => {
                    return Err(AppError::Mismatch(format!(
                        "target-train entry {:?} must not carry a foggy render",
                        e.id
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A manifest bound to its directory, so relative paths resolve.
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub dir: PathBuf,
}

impl LoadedManifest {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    manifest.validate()?;
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| AppError::Mismatch(format!("manifest serialization: {e}")))?;
    fs::write(path, json).map_err(|e| AppError::io(path, e))
}

/// Loads, validates, and checks that every referenced file exists.
pub fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| AppError::Mismatch(format!("{}: {e}", path.display())))?;
    manifest.validate()?;
    let dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    for e in &manifest.entries {
        for rel in [
            Some(&e.clear_path),
            Some(&e.depth_path),
            e.foggy_path.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            let p = dir.join(rel);
            if !p.is_file() {
                return Err(AppError::Mismatch(format!(
                    "manifest entry {:?} references missing file {}",
                    e.id,
                    p.display()
                )));
            }
        }
    }
    Ok(LoadedManifest { manifest, dir })
}
