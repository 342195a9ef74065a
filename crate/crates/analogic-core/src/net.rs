//! Network construction: translation generators with tied parameters,
//! depth heads sharing the generator trunks, and patch discriminators.
//!
//! The parameter topology is the load-bearing part of this module. There are
//! exactly two generator parameter sets — `gen_forward` drives *both* the
//! source fogging path and the target fogging path, and `gen_backward`
//! drives both defogging paths. That aliasing (not copying) is what lets
//! supervision on the source domain constrain the unsupervised target
//! domain. Within a generator, the gist heads and the depth head are three
//! separate final convolutions on one shared trunk, so depth supervision
//! shapes the same features the translation uses.
//!
//! Head mappings pin the untrained network near the identity translation:
//! the alignment map is `softplus(pre + ln(e−1))`, which is 1 at zero
//! pre-activation and strictly positive everywhere; the residual map is
//! `tanh(pre)`, zero at zero. The depth head is linear and predicts
//! far-plane-normalized depth.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::gist::Gist;
use crate::graph::{Graph, NodeId, ParamId};
use crate::kernels::ConvGeom;
use crate::scalar::{sample_normal, Scalar};
use crate::tensor::Tensor;

/// `ln(e − 1)`: the alignment-head shift that maps zero pre-activation to
/// an alignment value of exactly 1.
const ALIGN_HEAD_SHIFT: f64 = 0.541_324_854_612_918_1;

/// Negative-side slope of discriminator activations.
const LEAKY_SLOPE: f64 = 0.2;

/// Architecture of the whole model family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    /// Channel width of the generator at full resolution.
    pub width: usize,
    /// Residual blocks at the bottleneck.
    pub res_blocks: usize,
    /// Stride-2 stages in the generator encoder (mirrored by the decoder).
    pub downsamples: usize,
    /// Expected input image height and width.
    pub image_h: usize,
    pub image_w: usize,
    /// Kernel of the stride-1 stem convolution (7 for real runs; 3 keeps the
    /// gradient-check model tiny).
    pub enc_kernel: usize,
    /// Channel width of the first discriminator layer.
    pub disc_width: usize,
    /// Stride-2 layers per discriminator.
    pub disc_layers: usize,
    /// Discriminator kernel size (4 for real runs, 3 for the tiny model).
    pub disc_kernel: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            width: 16,
            res_blocks: 2,
            downsamples: 2,
            image_h: 32,
            image_w: 64,
            enc_kernel: 7,
            disc_width: 16,
            disc_layers: 3,
            disc_kernel: 4,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        let f = 1usize << self.downsamples;
        if self.image_h == 0 || self.image_w == 0 {
            return Err(CoreError::InvalidConfig("image size must be positive".into()));
        }
        if self.image_h % f != 0 || self.image_w % f != 0 {
            return Err(CoreError::InvalidConfig(format!(
                "image {}x{} not divisible by the total downsampling factor {f}",
                self.image_w, self.image_h
            )));
        }
        if self.width == 0 || self.disc_width == 0 {
            return Err(CoreError::InvalidConfig("channel widths must be positive".into()));
        }
        if self.enc_kernel % 2 == 0 {
            return Err(CoreError::InvalidConfig("stem kernel must be odd".into()));
        }
        if !(self.disc_kernel == 3 || self.disc_kernel == 4) {
            return Err(CoreError::InvalidConfig("discriminator kernel must be 3 or 4".into()));
        }
        if self.image_h >> self.disc_layers == 0 || self.image_w >> self.disc_layers == 0 {
            return Err(CoreError::InvalidConfig(format!(
                "{} discriminator layers collapse a {}x{} image",
                self.disc_layers, self.image_w, self.image_h
            )));
        }
        Ok(())
    }
}

/// Registry of all parameter tensors, keyed by dense [`ParamId`]s and
/// stable hierarchical names (the checkpoint key space).
pub struct Params<F> {
    tensors: Vec<Tensor<F>>,
    names: Vec<String>,
}

impl<F: Scalar> Params<F> {
    fn new() -> Self {
        Self {
            tensors: Vec::new(),
            names: Vec::new(),
        }
    }

    fn register(&mut self, name: String, t: Tensor<F>) -> ParamId {
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.tensors.push(t);
        self.names.push(name);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    /// Looks a parameter up by its hierarchical name.
    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<F>)> {
        self.names
            .iter()
            .zip(self.tensors.iter())
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total scalar elements across parameters whose name starts with
    /// `prefix` (empty prefix counts everything).
    pub fn element_count(&self, prefix: &str) -> usize {
        self.iter()
            .filter(|(_, n, _)| n.starts_with(prefix))
            .map(|(_, _, t)| t.numel())
            .sum()
    }
}

/// One step of a sequential stack.
enum Layer {
    Conv {
        w: ParamId,
        /// None when an instance norm follows: its mean subtraction would
        /// annihilate a per-channel constant, so the bias would be a dead
        /// parameter with an exactly-zero gradient.
        b: Option<ParamId>,
        geom: ConvGeom,
    },
    ConvT {
        w: ParamId,
        b: Option<ParamId>,
        geom: ConvGeom,
        out_pad: usize,
    },
    Norm {
        gamma: ParamId,
        beta: ParamId,
    },
    Relu,
    LeakyRelu,
    /// Residual wrapper: output = input + inner(input).
    Res(Vec<Layer>),
}

/// A translation generator: shared trunk plus three final convolutions.
pub struct Generator {
    trunk: Vec<Layer>,
    align_head: (ParamId, ParamId),
    residual_head: (ParamId, ParamId),
    depth_head: (ParamId, ParamId),
}

/// A patch discriminator: conv ladder to a one-channel score map.
pub struct Discriminator {
    layers: Vec<Layer>,
    in_channels: usize,
}

impl Discriminator {
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }
}

/// Which tied generator parameter set to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenSide {
    /// Source→translated and target→translated (fogging) — one parameter set.
    Forward,
    /// Both reverse (defogging) paths — the other parameter set.
    Backward,
}

/// Which discriminator to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscKind {
    /// Scores gists of the forward translation (6 input channels).
    GistForward,
    /// Scores gists of the reverse translation (6 input channels).
    GistBackward,
    /// Scores images in the translated-target domain (3 input channels).
    Target,
}

/// All parameters and module wiring of the translation model.
pub struct ModelState<F> {
    pub params: Params<F>,
    pub arch: ArchConfig,
    gen_forward: Generator,
    gen_backward: Generator,
    disc_gist_fwd: Discriminator,
    disc_gist_bwd: Discriminator,
    disc_target: Discriminator,
}

impl<F: Scalar> ModelState<F> {
    pub fn generator(&self, side: GenSide) -> &Generator {
        match side {
            GenSide::Forward => &self.gen_forward,
            GenSide::Backward => &self.gen_backward,
        }
    }

    pub fn discriminator(&self, kind: DiscKind) -> &Discriminator {
        match kind {
            DiscKind::GistForward => &self.disc_gist_fwd,
            DiscKind::GistBackward => &self.disc_gist_bwd,
            DiscKind::Target => &self.disc_target,
        }
    }

    /// Parameter ids belonging to both generators (the "generator group"
    /// for optimization), in registration order.
    pub fn generator_param_ids(&self) -> Vec<ParamId> {
        self.params
            .iter()
            .filter(|(_, n, _)| n.starts_with("gen_"))
            .map(|(i, _, _)| i)
            .collect()
    }

    /// Parameter ids of all three discriminators.
    pub fn discriminator_param_ids(&self) -> Vec<ParamId> {
        self.params
            .iter()
            .filter(|(_, n, _)| n.starts_with("disc_"))
            .map(|(i, _, _)| i)
            .collect()
    }

    fn check_image(&self, x: &Tensor<F>) -> Result<(), CoreError> {
        let [_, c, h, w] = x.shape();
        if c != 3 || h != self.arch.image_h || w != self.arch.image_w {
            return Err(CoreError::ShapeMismatch(format!(
                "expected [n, 3, {}, {}] image, got {}",
                self.arch.image_h,
                self.arch.image_w,
                x.shape_str()
            )));
        }
        Ok(())
    }
}

struct Builder<'r, F: Scalar> {
    params: Params<F>,
    rng: &'r mut ChaCha8Rng,
}

impl<F: Scalar> Builder<'_, F> {
    fn tensor(&mut self, name: String, shape: [usize; 4], random: bool) -> ParamId {
        let t = if random {
            // CycleGAN-style init: N(0, 0.02) for conv kernels.
            Tensor::from_fn(shape, |_| {
                sample_normal::<F, _>(self.rng) * F::from_f64(0.02)
            })
        } else {
            Tensor::zeros(shape)
        };
        self.params.register(name, t)
    }

    fn conv(&mut self, name: &str, ic: usize, oc: usize, k: usize, stride: usize, bias: bool) -> Layer {
        let w = self.tensor(format!("{name}.w"), [oc, ic, k, k], true);
        let b = bias.then(|| self.tensor(format!("{name}.b"), [1, oc, 1, 1], false));
        Layer::Conv {
            w,
            b,
            geom: ConvGeom {
                kernel: k,
                stride,
                pad: k / 2,
            },
        }
    }

    fn conv_t(&mut self, name: &str, ic: usize, oc: usize) -> Layer {
        let w = self.tensor(format!("{name}.w"), [ic, oc, 3, 3], true);
        Layer::ConvT {
            w,
            b: None,
            geom: ConvGeom {
                kernel: 3,
                stride: 2,
                pad: 1,
            },
            out_pad: 1,
        }
    }

    fn norm(&mut self, name: &str, c: usize) -> Layer {
        let gamma = self
            .params
            .register(format!("{name}.gamma"), Tensor::full([1, c, 1, 1], F::one()));
        let beta = self.tensor(format!("{name}.beta"), [1, c, 1, 1], false);
        Layer::Norm { gamma, beta }
    }

    fn head(&mut self, name: &str, ic: usize, oc: usize) -> (ParamId, ParamId) {
        let w = self.tensor(format!("{name}.w"), [oc, ic, 3, 3], true);
        let b = self.tensor(format!("{name}.b"), [1, oc, 1, 1], false);
        (w, b)
    }

    fn generator(&mut self, prefix: &str, a: &ArchConfig) -> Generator {
        let mut trunk = Vec::new();
        trunk.push(self.conv(&format!("{prefix}.stem"), 3, a.width, a.enc_kernel, 1, false));
        trunk.push(self.norm(&format!("{prefix}.stem.norm"), a.width));
        trunk.push(Layer::Relu);
        let mut c = a.width;
        for i in 0..a.downsamples {
            let name = format!("{prefix}.down{i}");
            trunk.push(self.conv(&name, c, c * 2, 3, 2, false));
            trunk.push(self.norm(&format!("{name}.norm"), c * 2));
            trunk.push(Layer::Relu);
            c *= 2;
        }
        for i in 0..a.res_blocks {
            let name = format!("{prefix}.res{i}");
            let inner = alloc::vec![
                self.conv(&format!("{name}.conv1"), c, c, 3, 1, false),
                self.norm(&format!("{name}.norm1"), c),
                Layer::Relu,
                self.conv(&format!("{name}.conv2"), c, c, 3, 1, false),
                self.norm(&format!("{name}.norm2"), c),
            ];
            trunk.push(Layer::Res(inner));
        }
        for i in 0..a.downsamples {
            let name = format!("{prefix}.up{i}");
            trunk.push(self.conv_t(&name, c, c / 2));
            trunk.push(self.norm(&format!("{name}.norm"), c / 2));
            trunk.push(Layer::Relu);
            c /= 2;
        }
        debug_assert_eq!(c, a.width);
        Generator {
            trunk,
            align_head: self.head(&format!("{prefix}.head_align"), c, 3),
            residual_head: self.head(&format!("{prefix}.head_residual"), c, 3),
            depth_head: self.head(&format!("{prefix}.head_depth"), c, 1),
        }
    }

    fn discriminator(&mut self, prefix: &str, a: &ArchConfig, in_channels: usize) -> Discriminator {
        let mut layers = Vec::new();
        let k = a.disc_kernel;
        let mut c = in_channels;
        for i in 0..a.disc_layers {
            let oc = a.disc_width << i;
            let name = format!("{prefix}.l{i}");
            // First layer runs un-normalized, per the patch-GAN lineage.
            layers.push(self.conv(&name, c, oc, k, 2, i == 0));
            if i > 0 {
                layers.push(self.norm(&format!("{name}.norm"), oc));
            }
            layers.push(Layer::LeakyRelu);
            c = oc;
        }
        layers.push(self.conv(&format!("{prefix}.score"), c, 1, 3, 1, true));
        Discriminator {
            layers,
            in_channels,
        }
    }
}

/// Builds and initializes the full model. Identical `(arch, seed)` yield
/// bitwise-identical parameters.
pub fn build_model<F: Scalar>(arch: &ArchConfig, seed: u64) -> Result<ModelState<F>, CoreError> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        params: Params::new(),
        rng: &mut rng,
    };
    let gen_forward = b.generator("gen_fwd", arch);
    let gen_backward = b.generator("gen_bwd", arch);
    let disc_gist_fwd = b.discriminator("disc_gist_fwd", arch, 6);
    let disc_gist_bwd = b.discriminator("disc_gist_bwd", arch, 6);
    let disc_target = b.discriminator("disc_target", arch, 3);
    Ok(ModelState {
        params: b.params,
        arch: arch.clone(),
        gen_forward,
        gen_backward,
        disc_gist_fwd,
        disc_gist_bwd,
        disc_target,
    })
}

fn bias_node<F: Scalar>(
    g: &mut Graph<F>,
    params: &Params<F>,
    b: Option<ParamId>,
    oc: usize,
) -> NodeId {
    match b {
        Some(id) => g.param(id, params.get(id)),
        None => g.input(Tensor::zeros([1, oc, 1, 1])),
    }
}

fn run_layers<F: Scalar>(
    g: &mut Graph<F>,
    params: &Params<F>,
    layers: &[Layer],
    mut h: NodeId,
) -> NodeId {
    for layer in layers {
        h = match layer {
            Layer::Conv { w, b, geom } => {
                let wn = g.param(*w, params.get(*w));
                let oc = params.get(*w).shape()[0];
                let bn = bias_node(g, params, *b, oc);
                g.conv2d(h, wn, bn, *geom)
            }
            Layer::ConvT {
                w,
                b,
                geom,
                out_pad,
            } => {
                let wn = g.param(*w, params.get(*w));
                let oc = params.get(*w).shape()[1];
                let bn = bias_node(g, params, *b, oc);
                g.conv_t2d(h, wn, bn, *geom, *out_pad)
            }
            Layer::Norm { gamma, beta } => {
                let gn = g.param(*gamma, params.get(*gamma));
                let bn = g.param(*beta, params.get(*beta));
                g.instance_norm(h, gn, bn)
            }
            Layer::Relu => g.relu(h),
            Layer::LeakyRelu => g.leaky_relu(h, F::from_f64(LEAKY_SLOPE)),
            Layer::Res(inner) => {
                let y = run_layers(g, params, inner, h);
                g.add(h, y)
            }
        };
    }
    h
}

const HEAD_GEOM: ConvGeom = ConvGeom {
    kernel: 3,
    stride: 1,
    pad: 1,
};

impl Generator {
    /// Runs the shared trunk inside a graph.
    pub fn trunk_node<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        params: &Params<F>,
        x: NodeId,
    ) -> NodeId {
        run_layers(g, params, &self.trunk, x)
    }

    /// Alignment and residual maps from trunk features.
    pub fn gist_from_trunk<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        params: &Params<F>,
        trunk: NodeId,
    ) -> (NodeId, NodeId) {
        let (mw, mb) = self.align_head;
        let wn = g.param(mw, params.get(mw));
        let bn = g.param(mb, params.get(mb));
        let pre = g.conv2d(trunk, wn, bn, HEAD_GEOM);
        let shifted = g.affine(pre, F::one(), F::from_f64(ALIGN_HEAD_SHIFT));
        let m = g.softplus(shifted);

        let (nw, nb) = self.residual_head;
        let wn = g.param(nw, params.get(nw));
        let bn = g.param(nb, params.get(nb));
        let pre = g.conv2d(trunk, wn, bn, HEAD_GEOM);
        let n = g.tanh(pre);
        (m, n)
    }

    /// Depth prediction (far-plane-normalized) from trunk features.
    pub fn depth_from_trunk<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        params: &Params<F>,
        trunk: NodeId,
    ) -> NodeId {
        let (dw, db) = self.depth_head;
        let wn = g.param(dw, params.get(dw));
        let bn = g.param(db, params.get(db));
        g.conv2d(trunk, wn, bn, HEAD_GEOM)
    }

    /// Convenience: trunk + gist heads in one call.
    pub fn gist_nodes<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        params: &Params<F>,
        x: NodeId,
    ) -> (NodeId, NodeId) {
        let t = self.trunk_node(g, params, x);
        self.gist_from_trunk(g, params, t)
    }
}

impl Discriminator {
    /// Runs the discriminator inside a graph, yielding the score map.
    pub fn score_node<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        params: &Params<F>,
        x: NodeId,
    ) -> NodeId {
        assert_eq!(
            g.value(x).c(),
            self.in_channels,
            "discriminator expects {} channels, got {}",
            self.in_channels,
            g.value(x).c()
        );
        run_layers(g, params, &self.layers, x)
    }
}

/// Runs a generator on an image tensor and returns its gist.
///
/// The alignment map is strictly positive and the residual map lies in
/// (−1, 1) by construction of the head mappings.
pub fn forward_gist<F: Scalar>(
    model: &ModelState<F>,
    side: GenSide,
    x: &Tensor<F>,
) -> Result<Gist<F>, CoreError> {
    model.check_image(x)?;
    let mut g = Graph::new();
    let xin = g.input(x.clone());
    let (m, n) = model.generator(side).gist_nodes(&mut g, &model.params, xin);
    Gist::new(g.value(m).clone(), g.value(n).clone())
}

/// Runs a generator's depth path on an image tensor.
pub fn forward_depth<F: Scalar>(
    model: &ModelState<F>,
    side: GenSide,
    x: &Tensor<F>,
) -> Result<Tensor<F>, CoreError> {
    model.check_image(x)?;
    let mut g = Graph::new();
    let xin = g.input(x.clone());
    let gen = model.generator(side);
    let t = gen.trunk_node(&mut g, &model.params, xin);
    let d = gen.depth_from_trunk(&mut g, &model.params, t);
    Ok(g.value(d).clone())
}

/// Runs a discriminator on a raw input tensor and returns its score map.
pub fn forward_disc<F: Scalar>(
    model: &ModelState<F>,
    kind: DiscKind,
    input: &Tensor<F>,
) -> Result<Tensor<F>, CoreError> {
    let disc = model.discriminator(kind);
    if input.c() != disc.in_channels {
        return Err(CoreError::ShapeMismatch(format!(
            "discriminator expects {} channels, got {}",
            disc.in_channels,
            input.shape_str()
        )));
    }
    let mut g = Graph::new();
    let xin = g.input(input.clone());
    let s = disc.score_node(&mut g, &model.params, xin);
    Ok(g.value(s).clone())
}
