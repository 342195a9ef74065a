//! Loss terms and their weighted assembly.
//!
//! Every term is built as nodes inside a caller-supplied [`Graph`], so the
//! trainer can run backward over exactly the terms it wants and tests can
//! splice oracle tensors in place of network outputs. The same builder
//! serves three purposes, selected by [`Phase`]:
//!
//! - [`Phase::Disc`] constructs only the adversarial terms and detaches
//!   every generator-derived discriminator input, so a backward pass
//!   touches discriminator parameters alone (and skips the generator
//!   backward work entirely).
//! - [`Phase::Gen`] constructs the generator objective with fully attached
//!   paths; discriminator scores stay differentiable but the trainer only
//!   steps generator parameters.
//! - [`Phase::Full`] builds everything attached — for logging, value-level
//!   loss functions, and gradient checking (where a detached input would
//!   make analytic and numeric gradients disagree by construction).
//!
//! Zero-weight terms are not built at all. That makes the ablation
//! contract exact: the gradient of the remaining sum is bitwise the
//! gradient of the full objective with that weight at zero, because the
//! two graphs are identical.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::graph::{Graph, NodeId};
use crate::kernels::ConvGeom;
use crate::net::{DiscKind, GenSide, ModelState};
use crate::scalar::{sample_normal, Scalar};
use crate::tensor::Tensor;

/// Weights of the assembled objective. `gist_adv` and `cyc_adv` weigh the
/// two adversarial games (in both the generator and discriminator totals);
/// the rest weigh generator-only terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gist_adv: f64,
    pub cyc_adv: f64,
    pub sup: f64,
    pub rec: f64,
    pub dep: f64,
    pub percep: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            gist_adv: 3.0,
            cyc_adv: 1.0,
            sup: 10.0,
            rec: 10.0,
            dep: 10.0,
            percep: 10.0,
        }
    }
}

impl LossWeights {
    /// All-zero weights: both totals vanish and no graph nodes are built.
    pub fn zero() -> Self {
        Self {
            gist_adv: 0.0,
            cyc_adv: 0.0,
            sup: 0.0,
            rec: 0.0,
            dep: 0.0,
            percep: 0.0,
        }
    }

    /// Starts from zero and sets one field — handy for isolating a term.
    pub fn only(term: &str, w: f64) -> Self {
        let mut z = Self::zero();
        match term {
            "gist_adv" => z.gist_adv = w,
            "cyc_adv" => z.cyc_adv = w,
            "sup" => z.sup = w,
            "rec" => z.rec = w,
            "dep" => z.dep = w,
            "percep" => z.percep = w,
            other => panic!("unknown loss term {other}"),
        }
        z
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        for (name, w) in [
            ("gist_adv", self.gist_adv),
            ("cyc_adv", self.cyc_adv),
            ("sup", self.sup),
            ("rec", self.rec),
            ("dep", self.dep),
            ("percep", self.percep),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(CoreError::InvalidConfig(format!(
                    "loss weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Adversarial formulation. `Log` is the classic saturating-discriminator
/// game written with softplus identities (−log σ(s) = softplus(−s)), which
/// is finite for every score; the generator side uses the non-saturating
/// form. `LeastSquares` regresses raw scores to 1 (real) and 0 (fake).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanForm {
    Log,
    LeastSquares,
}

/// One training sample group: a pixel-aligned clear/translated source pair,
/// an unpaired clear target image, and depth maps for both scenes.
///
/// There is deliberately no field for a translated target image — the
/// zero-shot contract is enforced by this type, not by convention.
#[derive(Clone, Debug)]
pub struct Batch<F> {
    pub x_a: Tensor<F>,
    pub x_a_prime: Tensor<F>,
    pub x_b: Tensor<F>,
    /// Far-plane-normalized depth of the source scene, `[n, 1, h, w]`.
    pub d_s: Tensor<F>,
    /// Far-plane-normalized depth of the target scene, `[n, 1, h, w]`.
    pub d_t: Tensor<F>,
}

impl<F: Scalar> Batch<F> {
    pub fn validate(&self) -> Result<(), CoreError> {
        let [n, c, h, w] = self.x_a.shape();
        if c != 3 {
            return Err(CoreError::ShapeMismatch(format!(
                "images must have 3 channels, got {}",
                self.x_a.shape_str()
            )));
        }
        for (name, t, cc) in [
            ("x_a_prime", &self.x_a_prime, 3),
            ("x_b", &self.x_b, 3),
            ("d_s", &self.d_s, 1),
            ("d_t", &self.d_t, 1),
        ] {
            if t.shape() != [n, cc, h, w] {
                return Err(CoreError::ShapeMismatch(format!(
                    "{name} is {} but x_a is {}",
                    t.shape_str(),
                    self.x_a.shape_str()
                )));
            }
        }
        for (name, t) in [
            ("x_a", &self.x_a),
            ("x_a_prime", &self.x_a_prime),
            ("x_b", &self.x_b),
            ("d_s", &self.d_s),
            ("d_t", &self.d_t),
        ] {
            if !t.is_finite() {
                return Err(CoreError::NonFinite(format!("batch field {name}")));
            }
        }
        Ok(())
    }
}

/// A fixed (never trained) feature map Φ for the perceptual term.
#[derive(Clone, Debug)]
pub enum FeatureExtractor<F> {
    /// Φ(x) = x: pixel space. Used by worked-example tests.
    Identity,
    /// A frozen stack of randomly initialized convolutions with tanh
    /// nonlinearities. Random frozen features keep the perceptual term's
    /// structure and gradient path without any pretrained weights.
    RandomConv(Vec<PhiLayer<F>>),
}

#[derive(Clone, Debug)]
pub struct PhiLayer<F> {
    weight: Tensor<F>,
    stride: usize,
}

impl<F: Scalar> FeatureExtractor<F> {
    /// Builds the default 4-layer frozen extractor, deterministic in `seed`.
    pub fn random_conv(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = [(3usize, 8usize, 1usize), (8, 8, 2), (8, 8, 1), (8, 8, 2)];
        let layers = plan
            .iter()
            .map(|&(ic, oc, stride)| {
                // Unit-variance preactivations under tanh: N(0, 1/fan_in).
                let scale = F::from_f64(1.0 / ((ic * 9) as f64).sqrt());
                let weight =
                    Tensor::from_fn([oc, ic, 3, 3], |_| sample_normal::<F, _>(&mut rng) * scale);
                PhiLayer { weight, stride }
            })
            .collect();
        FeatureExtractor::RandomConv(layers)
    }

    /// Appends Φ(x) to the graph. Weights enter as untracked leaves, so no
    /// gradient flows *to* them, but gradients flow *through* the stack
    /// into `x` as usual.
    pub fn apply(&self, g: &mut Graph<F>, x: NodeId) -> NodeId {
        match self {
            FeatureExtractor::Identity => x,
            FeatureExtractor::RandomConv(layers) => {
                let mut h = x;
                for layer in layers {
                    let w = g.input(layer.weight.clone());
                    let b = g.input(Tensor::zeros([1, layer.weight.n(), 1, 1]));
                    let geom = ConvGeom {
                        kernel: 3,
                        stride: layer.stride,
                        pad: 1,
                    };
                    h = g.conv2d(h, w, b, geom);
                    h = g.tanh(h);
                }
                h
            }
        }
    }
}

/// Which side of the minimax game the graph is being built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Adversarial terms only, generator-derived inputs detached.
    Disc,
    /// Generator terms only, everything attached.
    Gen,
    /// Both totals, everything attached (logging and gradient checks).
    Full,
}

/// Node handles of every constructed term. A `None` means the term was not
/// built — its weight was zero or the phase excluded it.
#[derive(Clone, Copy, Debug, Default)]
pub struct ObjectiveNodes {
    pub sup: Option<NodeId>,
    pub gist_adv_disc: Option<NodeId>,
    pub gist_adv_gen: Option<NodeId>,
    pub rec: Option<NodeId>,
    pub cyc_adv_disc: Option<NodeId>,
    pub cyc_adv_gen: Option<NodeId>,
    pub dep: Option<NodeId>,
    pub percep: Option<NodeId>,
    /// Weighted generator total (None when no generator term was built).
    pub gen_total: Option<NodeId>,
    /// Weighted discriminator total (None when no adversarial term was built).
    pub disc_total: Option<NodeId>,
    /// The generated translated-target image x̂ᵇ′, when the graph needed it.
    pub x_b_translated: Option<NodeId>,
}

/// Flat per-term values for logging. Missing terms report as zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub sup: f64,
    pub gist_adv_disc: f64,
    pub gist_adv_gen: f64,
    pub rec: f64,
    pub cyc_adv_disc: f64,
    pub cyc_adv_gen: f64,
    pub dep: f64,
    pub percep: f64,
    pub gen_total: f64,
    pub disc_total: f64,
}

impl ObjectiveNodes {
    pub fn breakdown<F: Scalar>(&self, g: &Graph<F>) -> LossBreakdown {
        let v = |n: Option<NodeId>| n.map_or(0.0, |id| g.value(id).item().as_f64());
        LossBreakdown {
            sup: v(self.sup),
            gist_adv_disc: v(self.gist_adv_disc),
            gist_adv_gen: v(self.gist_adv_gen),
            rec: v(self.rec),
            cyc_adv_disc: v(self.cyc_adv_disc),
            cyc_adv_gen: v(self.cyc_adv_gen),
            dep: v(self.dep),
            percep: v(self.percep),
            gen_total: v(self.gen_total),
            disc_total: v(self.disc_total),
        }
    }
}

// -- node-level helpers ------------------------------------------------------

/// `x ⊙ m + n`: the translation a gist encodes, as graph nodes.
pub fn translate_node<F: Scalar>(g: &mut Graph<F>, x: NodeId, m: NodeId, n: NodeId) -> NodeId {
    let xm = g.mul(x, m);
    g.add(xm, n)
}

/// Mean absolute difference over all elements.
pub fn l1_mean<F: Scalar>(g: &mut Graph<F>, a: NodeId, b: NodeId) -> NodeId {
    let d = g.sub(a, b);
    let d = g.abs(d);
    g.mean_all(d)
}

/// Discriminator-side adversarial loss from raw patch score maps.
///
/// Log form: mean softplus(−s_real) + mean softplus(s_fake), the minimized
/// rewrite of −E[log D(real)] − E[log(1 − D(fake))]. A discriminator that
/// outputs probability ½ everywhere (score 0) scores −2·log ½ ≈ 1.3863.
pub fn adv_disc_node<F: Scalar>(
    g: &mut Graph<F>,
    s_real: NodeId,
    s_fake: NodeId,
    form: GanForm,
) -> NodeId {
    match form {
        GanForm::Log => {
            let nr = g.neg(s_real);
            let lr = g.softplus(nr);
            let lr = g.mean_all(lr);
            let lf = g.softplus(s_fake);
            let lf = g.mean_all(lf);
            g.add(lr, lf)
        }
        GanForm::LeastSquares => {
            let r1 = g.affine(s_real, F::one(), -F::one());
            let lr = g.mul(r1, r1);
            let lr = g.mean_all(lr);
            let lf = g.mul(s_fake, s_fake);
            let lf = g.mean_all(lf);
            g.add(lr, lf)
        }
    }
}

/// Generator-side adversarial loss: drive fake scores toward "real".
/// Log form is non-saturating (mean softplus(−s_fake)).
pub fn adv_gen_node<F: Scalar>(g: &mut Graph<F>, s_fake: NodeId, form: GanForm) -> NodeId {
    match form {
        GanForm::Log => {
            let nf = g.neg(s_fake);
            let l = g.softplus(nf);
            g.mean_all(l)
        }
        GanForm::LeastSquares => {
            let f1 = g.affine(s_fake, F::one(), -F::one());
            let l = g.mul(f1, f1);
            g.mean_all(l)
        }
    }
}

// -- assembly ----------------------------------------------------------------

/// One generator pass over one image: trunk features plus whichever heads
/// a loss term asked for, each computed at most once.
struct Pass {
    trunk: Option<NodeId>,
    gist: Option<(NodeId, NodeId)>,
    depth: Option<NodeId>,
}

impl Pass {
    fn new() -> Self {
        Self {
            trunk: None,
            gist: None,
            depth: None,
        }
    }

    fn trunk<F: Scalar>(&mut self, g: &mut Graph<F>, model: &ModelState<F>, side: GenSide, x: NodeId) -> NodeId {
        *self.trunk.get_or_insert_with(|| {
            model.generator(side).trunk_node(g, &model.params, x)
        })
    }

    fn gist<F: Scalar>(
        &mut self,
        g: &mut Graph<F>,
        model: &ModelState<F>,
        side: GenSide,
        x: NodeId,
    ) -> (NodeId, NodeId) {
        if self.gist.is_none() {
            let t = self.trunk(g, model, side, x);
            self.gist = Some(model.generator(side).gist_from_trunk(g, &model.params, t));
        }
        self.gist.unwrap()
    }

    fn depth<F: Scalar>(
        &mut self,
        g: &mut Graph<F>,
        model: &ModelState<F>,
        side: GenSide,
        x: NodeId,
    ) -> NodeId {
        if self.depth.is_none() {
            let t = self.trunk(g, model, side, x);
            self.depth = Some(model.generator(side).depth_from_trunk(g, &model.params, t));
        }
        self.depth.unwrap()
    }
}

/// Builds the requested side of the objective into `g`.
///
/// Each of the four generator passes (forward on x_a, backward on x_a′,
/// forward on x_b, backward on the generated x̂ᵇ′) runs at most once and is
/// shared by every term that needs it.
pub fn build_objective<F: Scalar>(
    g: &mut Graph<F>,
    model: &ModelState<F>,
    batch: &Batch<F>,
    weights: &LossWeights,
    gan_form: GanForm,
    phi: &FeatureExtractor<F>,
    phase: Phase,
) -> Result<ObjectiveNodes, CoreError> {
    weights.validate()?;
    batch.validate()?;
    let [_, _, h, w] = batch.x_a.shape();
    if h != model.arch.image_h || w != model.arch.image_w {
        return Err(CoreError::ShapeMismatch(format!(
            "batch images are {w}x{h} but the model expects {}x{}",
            model.arch.image_w, model.arch.image_h
        )));
    }

    let gen_side = phase != Phase::Disc;
    let disc_side = phase != Phase::Gen;
    let detach = phase == Phase::Disc;

    let want_sup = gen_side && weights.sup > 0.0;
    let want_rec = gen_side && weights.rec > 0.0;
    let want_dep = gen_side && weights.dep > 0.0;
    let want_percep = gen_side && weights.percep > 0.0;
    let gist_adv_d = disc_side && weights.gist_adv > 0.0;
    let gist_adv_g = gen_side && weights.gist_adv > 0.0;
    let cyc_adv_d = disc_side && weights.cyc_adv > 0.0;
    let cyc_adv_g = gen_side && weights.cyc_adv > 0.0;

    let x_a = g.input(batch.x_a.clone());
    let x_ap = g.input(batch.x_a_prime.clone());
    let x_b = g.input(batch.x_b.clone());

    let mut fwd_a = Pass::new();
    let mut bwd_ap = Pass::new();
    let mut fwd_b = Pass::new();
    let mut bwd_hat = Pass::new();
    let mut nodes = ObjectiveNodes::default();

    // The generated translated-target image x̂ᵇ′ feeds the cycle, the
    // reverse adversarial direction, the perceptual term, and the fourth
    // depth term.
    let need_x_hat =
        want_rec || want_percep || want_dep || gist_adv_d || gist_adv_g || cyc_adv_d || cyc_adv_g;
    let x_hat = if need_x_hat {
        let (m, n) = fwd_b.gist(g, model, GenSide::Forward, x_b);
        Some(translate_node(g, x_b, m, n))
    } else {
        None
    };
    nodes.x_b_translated = x_hat;

    // The reconstructed target x̂ᵇ = backward translation of x̂ᵇ′.
    let x_cycled = if want_rec || cyc_adv_d || cyc_adv_g {
        let xh = x_hat.unwrap();
        let (m, n) = bwd_hat.gist(g, model, GenSide::Backward, xh);
        Some(translate_node(g, xh, m, n))
    } else {
        None
    };

    if want_sup {
        let (m_f, n_f) = fwd_a.gist(g, model, GenSide::Forward, x_a);
        let to_prime = translate_node(g, x_a, m_f, n_f);
        let fwd_term = l1_mean(g, to_prime, x_ap);
        let (m_b, n_b) = bwd_ap.gist(g, model, GenSide::Backward, x_ap);
        let to_clear = translate_node(g, x_ap, m_b, n_b);
        let bwd_term = l1_mean(g, to_clear, x_a);
        nodes.sup = Some(g.add(fwd_term, bwd_term));
    }

    if gist_adv_d || gist_adv_g {
        // Forward direction: score gists of the forward generator; source
        // gists are "real", target gists are "fake".
        let (m, n) = fwd_b.gist(g, model, GenSide::Forward, x_b);
        let fake_f = g.concat_c(m, n);
        // Reverse direction: score gists of the backward generator on the
        // genuinely translated x_a′ ("real") vs the generated x̂ᵇ′ ("fake").
        let (m, n) = bwd_hat.gist(g, model, GenSide::Backward, x_hat.unwrap());
        let fake_b = g.concat_c(m, n);

        let d_fwd = model.discriminator(DiscKind::GistForward);
        let d_bwd = model.discriminator(DiscKind::GistBackward);
        if gist_adv_d {
            let (m, n) = fwd_a.gist(g, model, GenSide::Forward, x_a);
            let real_f = g.concat_c(m, n);
            let (m, n) = bwd_ap.gist(g, model, GenSide::Backward, x_ap);
            let real_b = g.concat_c(m, n);
            let (real_f, fake_f, real_b, fake_b) = if detach {
                (
                    g.detach(real_f),
                    g.detach(fake_f),
                    g.detach(real_b),
                    g.detach(fake_b),
                )
            } else {
                (real_f, fake_f, real_b, fake_b)
            };
            let sr = d_fwd.score_node(g, &model.params, real_f);
            let sf = d_fwd.score_node(g, &model.params, fake_f);
            let loss_f = adv_disc_node(g, sr, sf, gan_form);
            let sr = d_bwd.score_node(g, &model.params, real_b);
            let sf = d_bwd.score_node(g, &model.params, fake_b);
            let loss_b = adv_disc_node(g, sr, sf, gan_form);
            nodes.gist_adv_disc = Some(g.add(loss_f, loss_b));
        }
        if gist_adv_g {
            let sf = d_fwd.score_node(g, &model.params, fake_f);
            let loss_f = adv_gen_node(g, sf, gan_form);
            let sf = d_bwd.score_node(g, &model.params, fake_b);
            let loss_b = adv_gen_node(g, sf, gan_form);
            nodes.gist_adv_gen = Some(g.add(loss_f, loss_b));
        }
    }

    if want_rec {
        nodes.rec = Some(l1_mean(g, x_cycled.unwrap(), x_b));
    }

    if cyc_adv_d || cyc_adv_g {
        let d_t = model.discriminator(DiscKind::Target);
        let fake = x_cycled.unwrap();
        if cyc_adv_d {
            let fake = if detach { g.detach(fake) } else { fake };
            let sr = d_t.score_node(g, &model.params, x_b);
            let sf = d_t.score_node(g, &model.params, fake);
            nodes.cyc_adv_disc = Some(adv_disc_node(g, sr, sf, gan_form));
        }
        if cyc_adv_g {
            let sf = d_t.score_node(g, &model.params, fake);
            nodes.cyc_adv_gen = Some(adv_gen_node(g, sf, gan_form));
        }
    }

    if want_dep {
        let d_s = g.input(batch.d_s.clone());
        let d_t = g.input(batch.d_t.clone());
        let p1 = fwd_a.depth(g, model, GenSide::Forward, x_a);
        let p2 = bwd_ap.depth(g, model, GenSide::Backward, x_ap);
        let p3 = fwd_b.depth(g, model, GenSide::Forward, x_b);
        let p4 = bwd_hat.depth(g, model, GenSide::Backward, x_hat.unwrap());
        let t1 = l1_mean(g, p1, d_s);
        let t2 = l1_mean(g, p2, d_s);
        let t3 = l1_mean(g, p3, d_t);
        let t4 = l1_mean(g, p4, d_t);
        let s = g.add(t1, t2);
        let s = g.add(s, t3);
        nodes.dep = Some(g.add(s, t4));
    }

    if want_percep {
        let f_a = phi.apply(g, x_a);
        let f_ap = phi.apply(g, x_ap);
        let f_b = phi.apply(g, x_b);
        let f_hat = phi.apply(g, x_hat.unwrap());
        let delta_src = g.sub(f_ap, f_a);
        let delta_tgt = g.sub(f_hat, f_b);
        let d = g.sub(delta_src, delta_tgt);
        let d = g.abs(d);
        nodes.percep = Some(g.mean_all(d));
    }

    let weighted_sum = |g: &mut Graph<F>, terms: &[(Option<NodeId>, f64)]| -> Option<NodeId> {
        let mut acc: Option<NodeId> = None;
        for &(node, w) in terms {
            let Some(node) = node else { continue };
            let scaled = g.affine(node, F::from_f64(w), F::zero());
            acc = Some(match acc {
                Some(a) => g.add(a, scaled),
                None => scaled,
            });
        }
        acc
    };

    if gen_side {
        nodes.gen_total = weighted_sum(
            g,
            &[
                (nodes.gist_adv_gen, weights.gist_adv),
                (nodes.sup, weights.sup),
                (nodes.rec, weights.rec),
                (nodes.cyc_adv_gen, weights.cyc_adv),
                (nodes.dep, weights.dep),
                (nodes.percep, weights.percep),
            ],
        );
    }
    if disc_side {
        nodes.disc_total = weighted_sum(
            g,
            &[
                (nodes.gist_adv_disc, weights.gist_adv),
                (nodes.cyc_adv_disc, weights.cyc_adv),
            ],
        );
    }
    Ok(nodes)
}

// -- value-level losses ------------------------------------------------------

fn term_value<F: Scalar>(
    model: &ModelState<F>,
    batch: &Batch<F>,
    weights: &LossWeights,
    gan_form: GanForm,
    phi: &FeatureExtractor<F>,
) -> Result<(Graph<F>, ObjectiveNodes), CoreError> {
    let mut g = Graph::new();
    let nodes = build_objective(&mut g, model, batch, weights, gan_form, phi, Phase::Full)?;
    Ok((g, nodes))
}

/// Paired supervision: mean |x_a⊙m + n − x_a′|₁ in the forward direction
/// plus the mirrored backward direction.
pub fn supervised_loss<F: Scalar>(model: &ModelState<F>, batch: &Batch<F>) -> Result<f64, CoreError> {
    let (g, nodes) = term_value(
        model,
        batch,
        &LossWeights::only("sup", 1.0),
        GanForm::Log,
        &FeatureExtractor::Identity,
    )?;
    Ok(g.value(nodes.sup.unwrap()).item().as_f64())
}

/// Both directions of the gist adversarial game → (disc_loss, gen_loss).
pub fn gist_adversarial_loss<F: Scalar>(
    model: &ModelState<F>,
    batch: &Batch<F>,
    gan_form: GanForm,
) -> Result<(f64, f64), CoreError> {
    let (g, nodes) = term_value(
        model,
        batch,
        &LossWeights::only("gist_adv", 1.0),
        gan_form,
        &FeatureExtractor::Identity,
    )?;
    Ok((
        g.value(nodes.gist_adv_disc.unwrap()).item().as_f64(),
        g.value(nodes.gist_adv_gen.unwrap()).item().as_f64(),
    ))
}

/// Cycle consistency through the generated x̂ᵇ′ → (rec, disc, gen).
pub fn cycle_loss<F: Scalar>(
    model: &ModelState<F>,
    batch: &Batch<F>,
    gan_form: GanForm,
) -> Result<(f64, f64, f64), CoreError> {
    let mut weights = LossWeights::only("rec", 1.0);
    weights.cyc_adv = 1.0;
    let (g, nodes) = term_value(model, batch, &weights, gan_form, &FeatureExtractor::Identity)?;
    Ok((
        g.value(nodes.rec.unwrap()).item().as_f64(),
        g.value(nodes.cyc_adv_disc.unwrap()).item().as_f64(),
        g.value(nodes.cyc_adv_gen.unwrap()).item().as_f64(),
    ))
}

/// Analogical perceptual distance: mean |(Φ(x_a′)−Φ(x_a)) − (Φ(x̂ᵇ′)−Φ(x_b))|₁.
pub fn perceptual_loss<F: Scalar>(
    model: &ModelState<F>,
    batch: &Batch<F>,
    phi: &FeatureExtractor<F>,
) -> Result<f64, CoreError> {
    let (g, nodes) = term_value(model, batch, &LossWeights::only("percep", 1.0), GanForm::Log, phi)?;
    Ok(g.value(nodes.percep.unwrap()).item().as_f64())
}

/// Four-way depth supervision across both trunks and both domains.
pub fn depth_loss<F: Scalar>(model: &ModelState<F>, batch: &Batch<F>) -> Result<f64, CoreError> {
    let (g, nodes) = term_value(
        model,
        batch,
        &LossWeights::only("dep", 1.0),
        GanForm::Log,
        &FeatureExtractor::Identity,
    )?;
    Ok(g.value(nodes.dep.unwrap()).item().as_f64())
}

/// Every term plus both weighted totals, as values.
pub fn full_objective<F: Scalar>(
    model: &ModelState<F>,
    batch: &Batch<F>,
    weights: &LossWeights,
    gan_form: GanForm,
    phi: &FeatureExtractor<F>,
) -> Result<LossBreakdown, CoreError> {
    let (g, nodes) = term_value(model, batch, weights, gan_form, phi)?;
    Ok(nodes.breakdown(&g))
}
