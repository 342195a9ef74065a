//! Define-by-run reverse-mode autodiff over NCHW tensors.
//!
//! A [`Graph`] is an append-only arena of nodes; building an op computes its
//! value immediately, so append order is already a topological order and the
//! backward pass is a single reverse sweep with gradient accumulation at
//! fan-out points. Parameter leaves are memoized per [`ParamId`]: a parameter
//! used by several subgraphs (the translation trunk feeding multiple heads,
//! or one generator applied to both domains) appears as a single node, and
//! its gradient accumulates across all uses — which is exactly the tied-
//! parameter semantics the translation model relies on.
//!
//! Shape errors here are panics: graphs are built by model code whose shapes
//! are validated at the public API boundary, so a mismatch inside a graph is
//! a bug, not an input error.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::{self, ConvGeom};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Index of a node within its graph.
pub type NodeId = usize;

/// Stable identity of a parameter tensor across graphs.
///
/// The parameter store hands these out densely from zero; the graph memoizes
/// leaves by id so re-binding the same parameter yields the same node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryKind {
    Relu,
    /// Leaky ReLU; the payload is the negative-side slope.
    LeakyRelu,
    Tanh,
    /// `ln(1 + e^x)`, evaluated in the overflow-safe form.
    Softplus,
    Abs,
    Neg,
}

enum Op<F: Scalar> {
    /// Constant leaf. Whether gradients flow into it is carried by the
    /// node's `needs_grad` flag (tracked inputs are a test convenience).
    Leaf,
    Param(ParamId),
    Conv {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        geom: ConvGeom,
    },
    ConvT {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        geom: ConvGeom,
    },
    InstanceNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        /// Saved `(mean, 1/std)` per (batch, channel), flattened pairs.
        stats: Vec<F>,
    },
    Unary {
        x: NodeId,
        kind: UnaryKind,
        slope: F,
    },
    /// `mul * x + add`, elementwise with scalar coefficients. Only `mul`
    /// is stored; the additive part vanishes from the gradient.
    Affine { x: NodeId, mul: F },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    /// Channel-axis concatenation of two tensors with equal N, H, W.
    ConcatC { a: NodeId, b: NodeId },
    /// Mean over every element, yielding a `[1,1,1,1]` scalar.
    MeanAll { x: NodeId },
}

struct Node<F: Scalar> {
    op: Op<F>,
    value: Tensor<F>,
    needs_grad: bool,
}

/// Reverse-mode computation graph.
pub struct Graph<F: Scalar> {
    nodes: Vec<Node<F>>,
    param_nodes: BTreeMap<usize, NodeId>,
}

/// Per-node gradients produced by [`Graph::backward`].
pub struct Grads<F: Scalar> {
    by_node: Vec<Option<Tensor<F>>>,
}

impl<F: Scalar> Grads<F> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<F>> {
        self.by_node.get(id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor<F>> {
        self.by_node.get_mut(id).and_then(|g| g.take())
    }
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            param_nodes: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a node (forward results are computed eagerly).
    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op<F>, value: Tensor<F>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    /// Constant leaf; no gradient flows into it.
    pub fn input(&mut self, value: Tensor<F>) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    /// Constant leaf that still collects a gradient. Tests use this to
    /// compare analytic input gradients against finite differences.
    pub fn input_tracked(&mut self, value: Tensor<F>) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// Parameter leaf, memoized by id: binding the same parameter twice
    /// returns the same node, so gradients from every use accumulate.
    pub fn param(&mut self, id: ParamId, value: &Tensor<F>) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id.0) {
            return n;
        }
        let n = self.push(Op::Param(id), value.clone(), true);
        self.param_nodes.insert(id.0, n);
        n
    }

    /// Cuts the gradient flow: returns a fresh untracked leaf holding a copy
    /// of `x`'s current value.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.clone();
        self.input(v)
    }

    /// Iterates over `(ParamId, NodeId)` pairs bound in this graph.
    pub fn bound_params(&self) -> impl Iterator<Item = (ParamId, NodeId)> + '_ {
        self.param_nodes.iter().map(|(&p, &n)| (ParamId(p), n))
    }

    /// The parameter id a node binds, if it is a parameter leaf.
    pub fn param_of(&self, id: NodeId) -> Option<ParamId> {
        match self.nodes[id].op {
            Op::Param(p) => Some(p),
            _ => None,
        }
    }

    /// The node a parameter is bound to in this graph, if any.
    pub fn node_of_param(&self, id: ParamId) -> Option<NodeId> {
        self.param_nodes.get(&id.0).copied()
    }

    // -- ops ----------------------------------------------------------------

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, geom: ConvGeom) -> NodeId {
        let y = kernels::conv2d_fwd(&self.nodes[x].value, &self.nodes[w].value, &self.nodes[b].value, geom);
        let ng = self.any_grad(&[x, w, b]);
        self.push(Op::Conv { x, w, b, geom }, y, ng)
    }

    pub fn conv_t2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        geom: ConvGeom,
        out_pad: usize,
    ) -> NodeId {
        let y = kernels::convt2d_fwd(
            &self.nodes[x].value,
            &self.nodes[w].value,
            &self.nodes[b].value,
            geom,
            out_pad,
        );
        let ng = self.any_grad(&[x, w, b]);
        self.push(Op::ConvT { x, w, b, geom }, y, ng)
    }

    /// Instance normalization over the spatial axes per (batch, channel),
    /// with affine parameters `gamma`, `beta` of shape `[1, c, 1, 1]`.
    pub fn instance_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let eps = F::from_f64(1e-5);
        let xv = &self.nodes[x].value;
        let [n, c, h, w] = xv.shape();
        assert_eq!(self.nodes[gamma].value.shape(), [1, c, 1, 1]);
        assert_eq!(self.nodes[beta].value.shape(), [1, c, 1, 1]);
        let m = h * w;
        assert!(m > 0);
        let mf = F::from_f64(m as f64);
        let mut out = Tensor::zeros([n, c, h, w]);
        let mut stats = vec![F::zero(); 2 * n * c];
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * m;
                let plane = &xv.data()[base..base + m];
                let mut mean = F::zero();
                for &v in plane {
                    mean += v;
                }
                mean /= mf;
                let mut var = F::zero();
                for &v in plane {
                    let d = v - mean;
                    var += d * d;
                }
                var /= mf;
                let istd = (var + eps).sqrt().recip();
                stats[2 * (b * c + ch)] = mean;
                stats[2 * (b * c + ch) + 1] = istd;
                let ga = self.nodes[gamma].value.data()[ch];
                let be = self.nodes[beta].value.data()[ch];
                let dst = &mut out.data_mut()[base..base + m];
                for (o, &v) in dst.iter_mut().zip(plane.iter()) {
                    *o = ga * (v - mean) * istd + be;
                }
            }
        }
        let ng = self.any_grad(&[x, gamma, beta]);
        self.push(
            Op::InstanceNorm {
                x,
                gamma,
                beta,
                stats,
            },
            out,
            ng,
        )
    }

    fn unary(&mut self, x: NodeId, kind: UnaryKind, slope: F) -> NodeId {
        let xv = &self.nodes[x].value;
        let out = match kind {
            UnaryKind::Relu => xv.map(|v| if v > F::zero() { v } else { F::zero() }),
            UnaryKind::LeakyRelu => xv.map(|v| if v > F::zero() { v } else { slope * v }),
            UnaryKind::Tanh => xv.map(|v| v.tanh()),
            UnaryKind::Softplus => xv.map(softplus),
            UnaryKind::Abs => xv.map(|v| v.abs()),
            UnaryKind::Neg => xv.map(|v| -v),
        };
        let ng = self.nodes[x].needs_grad;
        self.push(Op::Unary { x, kind, slope }, out, ng)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Relu, F::zero())
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: F) -> NodeId {
        self.unary(x, UnaryKind::LeakyRelu, slope)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Tanh, F::zero())
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Softplus, F::zero())
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Abs, F::zero())
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.unary(x, UnaryKind::Neg, F::zero())
    }

    /// `mul * x + add` with scalar coefficients.
    pub fn affine(&mut self, x: NodeId, mul: F, add: F) -> NodeId {
        let out = self.nodes[x].value.map(|v| mul * v + add);
        let ng = self.nodes[x].needs_grad;
        self.push(Op::Affine { x, mul }, out, ng)
    }

    fn binary_shape(&self, a: NodeId, b: NodeId, what: &str) {
        assert_eq!(
            self.nodes[a].value.shape(),
            self.nodes[b].value.shape(),
            "{what} between shapes {:?} and {:?}",
            self.nodes[a].value.shape(),
            self.nodes[b].value.shape()
        );
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_shape(a, b, "add");
        let out = Tensor::new(
            self.nodes[a].value.shape(),
            self.nodes[a]
                .value
                .data()
                .iter()
                .zip(self.nodes[b].value.data())
                .map(|(&x, &y)| x + y)
                .collect(),
        );
        let ng = self.any_grad(&[a, b]);
        self.push(Op::Add { a, b }, out, ng)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_shape(a, b, "sub");
        let out = Tensor::new(
            self.nodes[a].value.shape(),
            self.nodes[a]
                .value
                .data()
                .iter()
                .zip(self.nodes[b].value.data())
                .map(|(&x, &y)| x - y)
                .collect(),
        );
        let ng = self.any_grad(&[a, b]);
        self.push(Op::Sub { a, b }, out, ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_shape(a, b, "mul");
        let out = Tensor::new(
            self.nodes[a].value.shape(),
            self.nodes[a]
                .value
                .data()
                .iter()
                .zip(self.nodes[b].value.data())
                .map(|(&x, &y)| x * y)
                .collect(),
        );
        let ng = self.any_grad(&[a, b]);
        self.push(Op::Mul { a, b }, out, ng)
    }

    pub fn concat_c(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let [na, ca, ha, wa] = self.nodes[a].value.shape();
        let [nb, cb, hb, wb] = self.nodes[b].value.shape();
        assert_eq!(
            (na, ha, wa),
            (nb, hb, wb),
            "concat_c between shapes {:?} and {:?}",
            self.nodes[a].value.shape(),
            self.nodes[b].value.shape()
        );
        let mut out = Tensor::zeros([na, ca + cb, ha, wa]);
        let hw = ha * wa;
        for bi in 0..na {
            let dst = &mut out.data_mut()[bi * (ca + cb) * hw..(bi + 1) * (ca + cb) * hw];
            dst[..ca * hw]
                .copy_from_slice(&self.nodes[a].value.data()[bi * ca * hw..(bi + 1) * ca * hw]);
            dst[ca * hw..]
                .copy_from_slice(&self.nodes[b].value.data()[bi * cb * hw..(bi + 1) * cb * hw]);
        }
        let ng = self.any_grad(&[a, b]);
        self.push(Op::ConcatC { a, b }, out, ng)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let mut s = F::zero();
        for &v in xv.data() {
            s += v;
        }
        let out = Tensor::scalar(s / F::from_f64(xv.numel() as f64));
        let ng = self.nodes[x].needs_grad;
        self.push(Op::MeanAll { x }, out, ng)
    }

    fn any_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    // -- backward -----------------------------------------------------------

    /// Reverse sweep from a scalar root. Gradients land only on nodes with
    /// `needs_grad` (parameters, tracked inputs, and everything between them
    /// and the root); ops whose operands need no gradient are skipped, which
    /// in particular avoids the input-gradient GEMM of first-layer convs.
    pub fn backward(&self, root: NodeId) -> Grads<F> {
        assert_eq!(
            self.nodes[root].value.numel(),
            1,
            "backward root must be scalar, got shape {:?}",
            self.nodes[root].value.shape()
        );
        let mut g: Vec<Option<Tensor<F>>> = vec![None; self.nodes.len()];
        g[root] = Some(Tensor::scalar(F::one()));

        for i in (0..=root).rev() {
            if !self.nodes[i].needs_grad {
                g[i] = None;
                continue;
            }
            let Some(gy) = g[i].take() else { continue };
            self.backprop_node(i, &gy, &mut g);
            g[i] = Some(gy);
        }
        Grads { by_node: g }
    }

    fn acc(&self, g: &mut [Option<Tensor<F>>], id: NodeId, delta: Tensor<F>) {
        if !self.nodes[id].needs_grad {
            return;
        }
        match &mut g[id] {
            Some(t) => {
                debug_assert_eq!(t.shape(), delta.shape());
                for (a, &b) in t.data_mut().iter_mut().zip(delta.data()) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, i: NodeId, gy: &Tensor<F>, g: &mut [Option<Tensor<F>>]) {
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::Conv { x, w, b, geom } => {
                let need_x = self.nodes[*x].needs_grad;
                let need_wb = self.nodes[*w].needs_grad || self.nodes[*b].needs_grad;
                let (gx, gw, gb) = kernels::conv2d_bwd_masked(
                    &self.nodes[*x].value,
                    &self.nodes[*w].value,
                    gy,
                    *geom,
                    need_x,
                    need_wb,
                );
                if let Some(gx) = gx {
                    self.acc(g, *x, gx);
                }
                if let Some(gw) = gw {
                    self.acc(g, *w, gw);
                }
                if let Some(gb) = gb {
                    self.acc(g, *b, gb);
                }
            }
            Op::ConvT { x, w, b, geom } => {
                let need_x = self.nodes[*x].needs_grad;
                let need_wb = self.nodes[*w].needs_grad || self.nodes[*b].needs_grad;
                let (gx, gw, gb) = kernels::convt2d_bwd_masked(
                    &self.nodes[*x].value,
                    &self.nodes[*w].value,
                    gy,
                    *geom,
                    need_x,
                    need_wb,
                );
                if let Some(gx) = gx {
                    self.acc(g, *x, gx);
                }
                if let Some(gw) = gw {
                    self.acc(g, *w, gw);
                }
                if let Some(gb) = gb {
                    self.acc(g, *b, gb);
                }
            }
            Op::InstanceNorm {
                x,
                gamma,
                beta,
                stats,
            } => {
                let xv = &self.nodes[*x].value;
                let [n, c, h, w] = xv.shape();
                let m = h * w;
                let mf = F::from_f64(m as f64);
                let gav = &self.nodes[*gamma].value;
                let mut gx = Tensor::zeros(xv.shape());
                let mut gga = Tensor::zeros([1, c, 1, 1]);
                let mut gbe = Tensor::zeros([1, c, 1, 1]);
                for b in 0..n {
                    for ch in 0..c {
                        let base = (b * c + ch) * m;
                        let mean = stats[2 * (b * c + ch)];
                        let istd = stats[2 * (b * c + ch) + 1];
                        let ga = gav.data()[ch];
                        let xp = &xv.data()[base..base + m];
                        let gyp = &gy.data()[base..base + m];
                        let mut sum_dy = F::zero();
                        let mut sum_dy_xhat = F::zero();
                        for (&dy, &xval) in gyp.iter().zip(xp.iter()) {
                            let xhat = (xval - mean) * istd;
                            sum_dy += dy;
                            sum_dy_xhat += dy * xhat;
                        }
                        gga.data_mut()[ch] += sum_dy_xhat;
                        gbe.data_mut()[ch] += sum_dy;
                        let k1 = sum_dy / mf;
                        let k2 = sum_dy_xhat / mf;
                        let gxp = &mut gx.data_mut()[base..base + m];
                        for ((gxv, &dy), &xval) in gxp.iter_mut().zip(gyp.iter()).zip(xp.iter()) {
                            let xhat = (xval - mean) * istd;
                            *gxv = ga * istd * (dy - k1 - xhat * k2);
                        }
                    }
                }
                self.acc(g, *x, gx);
                self.acc(g, *gamma, gga);
                self.acc(g, *beta, gbe);
            }
            Op::Unary { x, kind, slope } => {
                let xv = &self.nodes[*x].value;
                let yv = &self.nodes[i].value;
                let gx = match kind {
                    UnaryKind::Relu => Tensor::from_fn(xv.shape(), |j| {
                        if xv.data()[j] > F::zero() {
                            gy.data()[j]
                        } else {
                            F::zero()
                        }
                    }),
                    UnaryKind::LeakyRelu => Tensor::from_fn(xv.shape(), |j| {
                        if xv.data()[j] > F::zero() {
                            gy.data()[j]
                        } else {
                            *slope * gy.data()[j]
                        }
                    }),
                    UnaryKind::Tanh => Tensor::from_fn(xv.shape(), |j| {
                        let y = yv.data()[j];
                        (F::one() - y * y) * gy.data()[j]
                    }),
                    UnaryKind::Softplus => Tensor::from_fn(xv.shape(), |j| {
                        sigmoid(xv.data()[j]) * gy.data()[j]
                    }),
                    UnaryKind::Abs => Tensor::from_fn(xv.shape(), |j| {
                        let v = xv.data()[j];
                        if v > F::zero() {
                            gy.data()[j]
                        } else if v < F::zero() {
                            -gy.data()[j]
                        } else {
                            F::zero()
                        }
                    }),
                    UnaryKind::Neg => gy.map(|v| -v),
                };
                self.acc(g, *x, gx);
            }
            Op::Affine { x, mul } => {
                let m = *mul;
                self.acc(g, *x, gy.map(|v| m * v));
            }
            Op::Add { a, b } => {
                self.acc(g, *a, gy.clone());
                self.acc(g, *b, gy.clone());
            }
            Op::Sub { a, b } => {
                self.acc(g, *a, gy.clone());
                self.acc(g, *b, gy.map(|v| -v));
            }
            Op::Mul { a, b } => {
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                let ga = Tensor::from_fn(av.shape(), |j| gy.data()[j] * bv.data()[j]);
                let gb = Tensor::from_fn(av.shape(), |j| gy.data()[j] * av.data()[j]);
                self.acc(g, *a, ga);
                self.acc(g, *b, gb);
            }
            Op::ConcatC { a, b } => {
                let [n, ca, h, w] = self.nodes[*a].value.shape();
                let cb = self.nodes[*b].value.c();
                let hw = h * w;
                let mut ga = Tensor::zeros([n, ca, h, w]);
                let mut gb = Tensor::zeros([n, cb, h, w]);
                for bi in 0..n {
                    let src = &gy.data()[bi * (ca + cb) * hw..(bi + 1) * (ca + cb) * hw];
                    ga.data_mut()[bi * ca * hw..(bi + 1) * ca * hw]
                        .copy_from_slice(&src[..ca * hw]);
                    gb.data_mut()[bi * cb * hw..(bi + 1) * cb * hw]
                        .copy_from_slice(&src[ca * hw..]);
                }
                self.acc(g, *a, ga);
                self.acc(g, *b, gb);
            }
            Op::MeanAll { x } => {
                let xv = &self.nodes[*x].value;
                let scale = gy.item() / F::from_f64(xv.numel() as f64);
                self.acc(g, *x, Tensor::full(xv.shape(), scale));
            }
        }
    }
}

/// Overflow-safe softplus: `max(x, 0) + ln(1 + e^{-|x|})`.
pub fn softplus<F: Scalar>(x: F) -> F {
    let zero = F::zero();
    let m = if x > zero { x } else { zero };
    m + ((-x.abs()).exp() + F::one()).ln()
}

/// Numerically stable logistic function (softplus' derivative).
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        ((-x).exp() + F::one()).recip()
    } else {
        let e = x.exp();
        e / (e + F::one())
    }
}
