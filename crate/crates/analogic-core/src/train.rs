//! Minimax training: one discriminator update then one generator update
//! per step, plus the deterministic batch schedule both the training loop
//! and checkpoint resume rely on.
//!
//! The two updates are built as two separate graphs. The discriminator
//! graph detaches every generator-derived input, so its backward pass
//! touches discriminator parameters only; the generator graph is built
//! afterwards against the just-updated discriminators and is fully
//! attached. The two optimizer groups are disjoint by construction, so a
//! step never fuses the adversaries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::graph::{Grads, Graph, ParamId};
use crate::net::{ArchConfig, ModelState};
use crate::objectives::{
    build_objective, Batch, FeatureExtractor, GanForm, LossBreakdown, LossWeights, Phase,
};
use crate::optim::{Adam, AdamConfig};
use crate::scalar::Scalar;

/// Full training recipe. Serializes as the canonical config-file schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub weights: LossWeights,
    pub seed: u64,
    /// Ablation switches. Each maps one-to-one onto zeroing the matching
    /// weight(s); `use_cyc` covers both the reconstruction and the
    /// translated-domain adversarial weight.
    pub use_gist_adv: bool,
    pub use_cyc: bool,
    pub use_percep: bool,
    pub use_dep: bool,
    pub use_sup: bool,
    pub checkpoint_interval: u64,
    pub gan_form: GanForm,
    /// Seed of the frozen random perceptual feature stack.
    pub phi_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: ArchConfig::default(),
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 4,
            steps: 4000,
            weights: LossWeights::default(),
            seed: 7,
            use_gist_adv: true,
            use_cyc: true,
            use_percep: true,
            use_dep: true,
            use_sup: true,
            checkpoint_interval: 1000,
            gan_form: GanForm::Log,
            phi_seed: 901,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        self.arch.validate()?;
        self.weights.validate()?;
        self.adam_config().validate()?;
        if self.steps == 0 {
            return Err(CoreError::InvalidConfig("steps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: 1e-8,
        }
    }

    /// The configured weights with every disabled term zeroed out.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.weights;
        if !self.use_gist_adv {
            w.gist_adv = 0.0;
        }
        if !self.use_cyc {
            w.cyc_adv = 0.0;
            w.rec = 0.0;
        }
        if !self.use_percep {
            w.percep = 0.0;
        }
        if !self.use_dep {
            w.dep = 0.0;
        }
        if !self.use_sup {
            w.sup = 0.0;
        }
        w
    }

    /// The frozen perceptual extractor this recipe trains against.
    pub fn phi<F: Scalar>(&self) -> FeatureExtractor<F> {
        FeatureExtractor::random_conv(self.phi_seed)
    }
}

/// Everything a metrics log wants from one step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepMetrics {
    pub losses: LossBreakdown,
    pub grad_norm_gen: f64,
    pub grad_norm_disc: f64,
}

fn check_finite<F: Scalar>(
    g: &Graph<F>,
    terms: &[(&str, Option<crate::graph::NodeId>)],
) -> Result<(), CoreError> {
    for &(name, node) in terms {
        let Some(node) = node else { continue };
        let v = g.value(node).item().as_f64();
        if !v.is_finite() {
            return Err(CoreError::NonFinite(format!("loss term {name} = {v}")));
        }
    }
    Ok(())
}

fn group_grad_norm<F: Scalar>(g: &Graph<F>, grads: &Grads<F>, ids: &[ParamId]) -> f64 {
    let mut sq = 0.0f64;
    for &id in ids {
        let Some(t) = g.node_of_param(id).and_then(|n| grads.get(n)) else {
            continue;
        };
        for &x in t.data() {
            let x = x.as_f64();
            sq += x * x;
        }
    }
    sq.sqrt()
}

/// One minimax step: discriminator update on detached generator outputs,
/// then generator update against the refreshed discriminators.
///
/// Any non-finite term aborts before either parameter group is touched by
/// the offending phase, naming the term.
pub fn train_step<F: Scalar>(
    model: &mut ModelState<F>,
    batch: &Batch<F>,
    cfg: &TrainConfig,
    phi: &FeatureExtractor<F>,
    opt_gen: &mut Adam<F>,
    opt_disc: &mut Adam<F>,
) -> Result<StepMetrics, CoreError> {
    let weights = cfg.effective_weights();
    let mut losses = LossBreakdown::default();
    let mut grad_norm_disc = 0.0;
    let mut grad_norm_gen = 0.0;

    let mut g = Graph::new();
    let nodes = build_objective(&mut g, model, batch, &weights, cfg.gan_form, phi, Phase::Disc)?;
    if let Some(total) = nodes.disc_total {
        check_finite(
            &g,
            &[
                ("gist_adv_disc", nodes.gist_adv_disc),
                ("cyc_adv_disc", nodes.cyc_adv_disc),
            ],
        )?;
        let grads = g.backward(total);
        grad_norm_disc = group_grad_norm(&g, &grads, opt_disc.ids());
        let bd = nodes.breakdown(&g);
        losses.gist_adv_disc = bd.gist_adv_disc;
        losses.cyc_adv_disc = bd.cyc_adv_disc;
        losses.disc_total = bd.disc_total;
        opt_disc.step(&mut model.params, &g, &grads);
    }

    let mut g = Graph::new();
    let nodes = build_objective(&mut g, model, batch, &weights, cfg.gan_form, phi, Phase::Gen)?;
    if let Some(total) = nodes.gen_total {
        check_finite(
            &g,
            &[
                ("sup", nodes.sup),
                ("gist_adv_gen", nodes.gist_adv_gen),
                ("rec", nodes.rec),
                ("cyc_adv_gen", nodes.cyc_adv_gen),
                ("dep", nodes.dep),
                ("percep", nodes.percep),
            ],
        )?;
        let grads = g.backward(total);
        grad_norm_gen = group_grad_norm(&g, &grads, opt_gen.ids());
        let bd = nodes.breakdown(&g);
        losses.sup = bd.sup;
        losses.gist_adv_gen = bd.gist_adv_gen;
        losses.rec = bd.rec;
        losses.cyc_adv_gen = bd.cyc_adv_gen;
        losses.dep = bd.dep;
        losses.percep = bd.percep;
        losses.gen_total = bd.gen_total;
        opt_gen.step(&mut model.params, &g, &grads);
    }

    Ok(StepMetrics {
        losses,
        grad_norm_gen,
        grad_norm_disc,
    })
}

/// Builds both optimizer groups for a model under one recipe.
pub fn make_optimizers<F: Scalar>(
    model: &ModelState<F>,
    cfg: &TrainConfig,
) -> Result<(Adam<F>, Adam<F>), CoreError> {
    let gen = Adam::new(cfg.adam_config(), model.generator_param_ids(), &model.params)?;
    let disc = Adam::new(cfg.adam_config(), model.discriminator_param_ids(), &model.params)?;
    Ok((gen, disc))
}

/// The shuffled pairing of one epoch: position i holds (source index,
/// target index). A pure function of its arguments — the trainer, tests,
/// and checkpoint resume all recompute it instead of carrying RNG state.
pub fn epoch_pairing(seed: u64, epoch: u64, n_source: usize, n_target: usize) -> Vec<(usize, usize)> {
    let mix = epoch
        .wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ mix);
    let mut src: Vec<usize> = (0..n_source).collect();
    let mut tgt: Vec<usize> = (0..n_target).collect();
    src.shuffle(&mut rng);
    tgt.shuffle(&mut rng);
    src.into_iter().zip(tgt).collect()
}

/// The sample pairs of one training step. An epoch is `min(splits) /
/// batch_size` full batches; leftovers roll into the next epoch's
/// reshuffle.
pub fn batch_for_step(
    seed: u64,
    step: u64,
    n_source: usize,
    n_target: usize,
    batch_size: usize,
) -> Result<Vec<(usize, usize)>, CoreError> {
    let per_epoch = n_source.min(n_target) / batch_size;
    if per_epoch == 0 {
        return Err(CoreError::InvalidConfig(format!(
            "splits of {n_source} source / {n_target} target samples cannot fill a batch of {batch_size}"
        )));
    }
    let epoch = step / per_epoch as u64;
    let pos = (step % per_epoch as u64) as usize;
    let pairs = epoch_pairing(seed, epoch, n_source, n_target);
    Ok(pairs[pos * batch_size..(pos + 1) * batch_size].to_vec())
}

/// Snapshot of everything that evolves during training, for bitwise resume.
pub struct TrainSnapshot<F> {
    pub step: u64,
    pub param_names: Vec<String>,
    pub params: Vec<crate::tensor::Tensor<F>>,
    pub gen_m: Vec<crate::tensor::Tensor<F>>,
    pub gen_v: Vec<crate::tensor::Tensor<F>>,
    pub gen_t: u64,
    pub disc_m: Vec<crate::tensor::Tensor<F>>,
    pub disc_v: Vec<crate::tensor::Tensor<F>>,
    pub disc_t: u64,
}

/// Captures model parameters and optimizer moments at a step boundary.
pub fn snapshot<F: Scalar>(
    step: u64,
    model: &ModelState<F>,
    opt_gen: &Adam<F>,
    opt_disc: &Adam<F>,
) -> TrainSnapshot<F> {
    let (gm, gv, gt) = opt_gen.state();
    let (dm, dv, dt) = opt_disc.state();
    TrainSnapshot {
        step,
        param_names: model.params.iter().map(|(_, n, _)| n.into()).collect(),
        params: model.params.iter().map(|(_, _, t)| t.clone()).collect(),
        gen_m: gm.to_vec(),
        gen_v: gv.to_vec(),
        gen_t: gt,
        disc_m: dm.to_vec(),
        disc_v: dv.to_vec(),
        disc_t: dt,
    }
}

/// Restores a snapshot into a freshly built model and optimizers. Names
/// must line up exactly — a snapshot from a different architecture or
/// parameter layout is rejected.
pub fn restore<F: Scalar>(
    snap: &TrainSnapshot<F>,
    model: &mut ModelState<F>,
    opt_gen: &mut Adam<F>,
    opt_disc: &mut Adam<F>,
) -> Result<(), CoreError> {
    if snap.param_names.len() != model.params.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "snapshot has {} parameters, model has {}",
            snap.param_names.len(),
            model.params.len()
        )));
    }
    for (i, name) in snap.param_names.iter().enumerate() {
        let id = ParamId(i);
        if model.params.name(id) != name {
            return Err(CoreError::ShapeMismatch(format!(
                "snapshot parameter {i} is {name}, model has {}",
                model.params.name(id)
            )));
        }
        if model.params.get(id).shape() != snap.params[i].shape() {
            return Err(CoreError::ShapeMismatch(format!(
                "snapshot parameter {name} has shape {}",
                snap.params[i].shape_str()
            )));
        }
        *model.params.get_mut(id) = snap.params[i].clone();
    }
    opt_gen.restore(snap.gen_m.clone(), snap.gen_v.clone(), snap.gen_t)?;
    opt_disc.restore(snap.disc_m.clone(), snap.disc_v.clone(), snap.disc_t)?;
    Ok(())
}
