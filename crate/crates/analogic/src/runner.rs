//! The file-backed training loop: loads a manifest into memory, drives the
//! core minimax step, appends newline-JSON metrics (with the batch-id trace
//! the split-hygiene audit reads), writes periodic checkpoints, and resumes
//! from one bitwise.
//!
//! Zero-shot discipline is structural here: only the source and
//! target-train splits are ever loaded. Held-out foggy renders stay on disk
//! untouched until evaluation.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use analogic_core::gist::{apply_gist, interpolate_domain, Domainness};
use analogic_core::net::{build_model, forward_gist, GenSide, ModelState};
use analogic_core::objectives::{Batch, LossBreakdown};
use analogic_core::train::{batch_for_step, make_optimizers, train_step};
use analogic_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{write_resolved, CliConfig};
use crate::error::{AppError, Result};
use crate::manifest::{LoadedManifest, Split};
use crate::pngio::{load_depth16, load_rgb};

/// One split held in memory: images and far-normalized depths, with the
/// manifest ids kept alongside for the metrics trace.
pub struct LoadedSplit {
    pub ids: Vec<String>,
    pub clear: Vec<Tensor<f32>>,
    /// Paired translated images; empty for the target split.
    pub foggy: Vec<Tensor<f32>>,
    pub depth_norm: Vec<Tensor<f32>>,
}

pub struct TrainingData {
    pub source: LoadedSplit,
    pub target: LoadedSplit,
}

fn load_split(lm: &LoadedManifest, split: Split, want_foggy: bool) -> Result<LoadedSplit> {
    let range = lm.manifest.depth_quantization.range()?;
    let far = lm.manifest.far_plane;
    let mut out = LoadedSplit {
        ids: Vec::new(),
        clear: Vec::new(),
        foggy: Vec::new(),
        depth_norm: Vec::new(),
    };
    for e in lm.manifest.split(split) {
        out.ids.push(e.id.clone());
        out.clear.push(load_rgb(&lm.resolve(&e.clear_path))?);
        let d = load_depth16(&lm.resolve(&e.depth_path), range)?;
        out.depth_norm.push(d.map(|v| v / far).cast());
        if want_foggy {
            let rel = e.foggy_path.as_ref().ok_or_else(|| {
                AppError::Mismatch(format!("entry {:?} lacks its foggy render", e.id))
            })?;
            out.foggy.push(load_rgb(&lm.resolve(rel))?);
        }
    }
    Ok(out)
}

/// Loads the two training splits. The held-out oracle split is deliberately
/// not loadable through this path.
pub fn load_training_data(lm: &LoadedManifest) -> Result<TrainingData> {
    Ok(TrainingData {
        source: load_split(lm, Split::Source, true)?,
        target: load_split(lm, Split::TargetTrain, false)?,
    })
}

/// Stacks single-sample `[1,c,h,w]` tensors into one `[k,c,h,w]` batch.
pub fn stack(parts: &[&Tensor<f32>]) -> Tensor<f32> {
    let [_, c, h, w] = parts[0].shape();
    let mut out = Tensor::zeros([parts.len(), c, h, w]);
    let plane = c * h * w;
    for (i, p) in parts.iter().enumerate() {
        debug_assert_eq!(p.shape(), [1, c, h, w]);
        out.data_mut()[i * plane..(i + 1) * plane].copy_from_slice(p.data());
    }
    out
}

fn make_batch(data: &TrainingData, pairs: &[(usize, usize)]) -> Batch<f32> {
    fn pick<'a>(
        xs: &'a [Tensor<f32>],
        pairs: &[(usize, usize)],
        src_side: bool,
    ) -> Vec<&'a Tensor<f32>> {
        pairs
            .iter()
            .map(|&(s, t)| &xs[if src_side { s } else { t }])
            .collect()
    }
    Batch {
        x_a: stack(&pick(&data.source.clear, pairs, true)),
        x_a_prime: stack(&pick(&data.source.foggy, pairs, true)),
        x_b: stack(&pick(&data.target.clear, pairs, false)),
        d_s: stack(&pick(&data.source.depth_norm, pairs, true)),
        d_t: stack(&pick(&data.target.depth_norm, pairs, false)),
    }
}

/// One metrics-log line. `wall_ms` is informational; determinism and
/// resume-equivalence are defined over the numeric fields.
#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsLine {
    pub step: u64,
    pub wall_ms: f64,
    pub losses: LossBreakdown,
    pub grad_norm_gen: f64,
    pub grad_norm_disc: f64,
    pub source_ids: Vec<String>,
    pub target_ids: Vec<String>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub metrics_path: PathBuf,
    pub final_step: u64,
}

/// Keeps only metrics lines strictly below `resume_step`, so a resumed run
/// preserves the log's monotone-step invariant even when the interrupted
/// process had advanced past its last checkpoint.
fn truncate_metrics(path: &Path, resume_step: u64) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut kept = String::new();
    for line in text.lines() {
        let parsed: MetricsLine = serde_json::from_str(line)
            .map_err(|e| AppError::Mismatch(format!("{}: {e}", path.display())))?;
        if parsed.step < resume_step {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(|e| AppError::io(path, e))
}

/// Runs (or resumes) training against a loaded manifest, writing artifacts
/// under `out_dir`.
pub fn train(
    lm: &LoadedManifest,
    cli_cfg: &CliConfig,
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome> {
    let requested = &cli_cfg.train;
    requested.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;

    let (mut model, mut opt_gen, mut opt_disc, start_step, cfg) = match resume {
        None => {
            let model = build_model::<f32>(&requested.arch, requested.seed)?;
            let (og, od) = make_optimizers(&model, requested)?;
            (model, og, od, 0, requested.clone())
        }
        Some(ckpt) => {
            let loaded = load_checkpoint(ckpt)?;
            if loaded.step >= requested.steps {
                return Err(AppError::Config(format!(
                    "checkpoint is already at step {} of the requested {}",
                    loaded.step, requested.steps
                )));
            }
            // The recipe travels with the checkpoint; only the step target
            // comes from the caller.
            let mut c = loaded.train.clone();
            c.steps = requested.steps;
            (
                loaded.model,
                loaded.opt_gen,
                loaded.opt_disc,
                loaded.step,
                c,
            )
        }
    };
    let cfg = &cfg;
    if lm.manifest.image_h != cfg.arch.image_h || lm.manifest.image_w != cfg.arch.image_w {
        return Err(AppError::Config(format!(
            "training config expects {}x{} images but the manifest holds {}x{}",
            cfg.arch.image_w, cfg.arch.image_h, lm.manifest.image_w, lm.manifest.image_h
        )));
    }

    let data = load_training_data(lm)?;
    let (n_src, n_tgt) = (data.source.ids.len(), data.target.ids.len());

    let mut echo = cli_cfg.clone();
    echo.train = cfg.clone();
    write_resolved(out_dir, &echo)?;

    let metrics_path = out_dir.join("metrics.ndjson");
    truncate_metrics(&metrics_path, start_step)?;
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&metrics_path)
        .map_err(|e| AppError::io(&metrics_path, e))?;
    let mut log = BufWriter::new(file);

    let phi = cfg.phi::<f32>();
    let mut final_checkpoint = PathBuf::new();
    for step in start_step..cfg.steps {
        let pairs = batch_for_step(cfg.seed, step, n_src, n_tgt, cfg.batch_size)?;
        let batch = make_batch(&data, &pairs);
        let t0 = Instant::now();
        let metrics = train_step(&mut model, &batch, cfg, &phi, &mut opt_gen, &mut opt_disc)
            .map_err(|e| match e {
                analogic_core::CoreError::NonFinite(m) => {
                    AppError::NonFinite(format!("step {step}: {m}"))
                }
                other => other.into(),
            })?;

        let line = MetricsLine {
            step,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            losses: metrics.losses,
            grad_norm_gen: metrics.grad_norm_gen,
            grad_norm_disc: metrics.grad_norm_disc,
            source_ids: pairs
                .iter()
                .map(|&(s, _)| data.source.ids[s].clone())
                .collect(),
            target_ids: pairs
                .iter()
                .map(|&(_, t)| data.target.ids[t].clone())
                .collect(),
        };
        serde_json::to_writer(&mut log, &line)
            .map_err(|e| AppError::Mismatch(format!("metrics serialization: {e}")))?;
        log.write_all(b"\n")
            .map_err(|e| AppError::io(&metrics_path, e))?;

        let done = step + 1;
        if done % cfg.checkpoint_interval == 0 || done == cfg.steps {
            log.flush().map_err(|e| AppError::io(&metrics_path, e))?;
            let path = out_dir.join(format!("ckpt_{done}.analogic"));
            save_checkpoint(&path, &model, &opt_gen, &opt_disc, done, cfg)?;
            final_checkpoint = path;
        }
    }
    log.flush().map_err(|e| AppError::io(&metrics_path, e))?;

    Ok(TrainOutcome {
        final_checkpoint,
        metrics_path,
        final_step: cfg.steps,
    })
}

/// Translates one image at the given domainness, clamped to [0, 1] for
/// export. `z = 0` returns the input bit-for-bit.
pub fn translate_one(
    model: &ModelState<f32>,
    x: &Tensor<f32>,
    z: Domainness,
) -> Result<Tensor<f32>> {
    let gist = forward_gist(model, GenSide::Forward, x)?;
    let out = interpolate_domain(x, &gist, z)?;
    Ok(out.map(|v| v.clamp(0.0, 1.0)))
}

/// Mean absolute fog effect `mean |translate(x, z) − x|` — the quantity
/// interpolation sweeps report.
pub fn fog_effect(model: &ModelState<f32>, x: &Tensor<f32>, z: Domainness) -> Result<f64> {
    let out = translate_one(model, x, z)?;
    Ok(out.mean_abs_diff(x) as f64)
}

/// Applies the full translation (`z = 1`) without export clamping; the
/// evaluation metrics use this raw form.
pub fn translate_raw(model: &ModelState<f32>, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let gist = forward_gist(model, GenSide::Forward, x)?;
    Ok(apply_gist(x, &gist)?)
}
