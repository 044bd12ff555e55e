//! One-layer message-passing classifiers with a hand-written backward pass.
//!
//! A model aggregates the central node's neighbourhood into a vector `a`
//! (GCN, GIN or SAGE-mean), maps it through `h = elu(W_upᵀ·a + b_up)` and
//! classifies with a linear head `W_headᵀ·h + b_head` under softmax
//! cross-entropy. All parameters live in one flat vector:
//!
//! ```text
//! [ W_up (d_in × d_hid, row-major) | b_up | W_head (d_hid × C) | b_head | λ (GIN only) ]
//! ```
//!
//! In a sub-graph, `NB(u)` is the set of in-neighbours of the central node.
//! Nulled peripherals carry no information: they send no message and are
//! left out of degree counts and mean denominators.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::rng::{self, Stream};
use crate::sampler::SubGraph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Gin,
    Sage,
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "gin" => Ok(Arch::Gin),
            "sage" | "graphsage" => Ok(Arch::Sage),
            other => Err(Error::InvalidParameter(format!("unknown architecture {other:?}"))),
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Gcn => "gcn",
            Arch::Gin => "gin",
            Arch::Sage => "sage",
        })
    }
}

/// Shape of a model; also the JSON checkpoint header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub arch: Arch,
    pub d_in: usize,
    pub d_hid: usize,
    pub classes: usize,
    /// Whether GIN's λ receives gradient.
    pub train_lambda: bool,
}

impl ModelShape {
    pub fn new(arch: Arch, d_in: usize, d_hid: usize, classes: usize) -> Self {
        Self { arch, d_in, d_hid, classes, train_lambda: true }
    }

    fn w_up(&self) -> usize {
        0
    }
    fn b_up(&self) -> usize {
        self.d_in * self.d_hid
    }
    fn w_head(&self) -> usize {
        self.b_up() + self.d_hid
    }
    fn b_head(&self) -> usize {
        self.w_head() + self.d_hid * self.classes
    }
    fn lambda(&self) -> usize {
        self.b_head() + self.classes
    }

    pub fn param_count(&self) -> usize {
        self.lambda() + usize::from(self.arch == Arch::Gin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.d_hid == 0 || self.classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "model needs d_in, d_hid >= 1 and at least 2 classes, got ({}, {}, {})",
                self.d_in, self.d_hid, self.classes
            )));
        }
        Ok(())
    }
}

/// Flat gradient (or any vector in parameter space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub flat: Vec<f64>,
}

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Self { flat: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.flat)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Clipping threshold applied to every per-sub-graph gradient.
pub const CLIP_NORM: f64 = 0.5;

/// `ĝ = g·min{1, 1/(2‖g‖)}`: rescales to norm 0.5 when longer, otherwise
/// returns `g` untouched.
pub fn clip_gradient(mut grad: Gradient) -> Gradient {
    let norm = grad.norm();
    if norm > CLIP_NORM {
        let scale = CLIP_NORM / norm;
        grad.flat.iter_mut().for_each(|x| *x *= scale);
    }
    grad
}

/// Sum equal-length vectors in a fixed pairwise tree order, so the result
/// does not depend on how the inputs were produced.
pub fn tree_sum(mut parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; len];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().expect("non-empty")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub shape: ModelShape,
    pub flat: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// Aggregated input `a`.
    pub aggregated: Vec<f64>,
    /// Pre-activation `z`.
    pub pre: Vec<f64>,
    /// Embedding `h = elu(z)`.
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

/// A node's neighbourhood as seen by one aggregation step.
struct Neighbourhood<'a> {
    own: &'a [f64],
    own_degree: usize,
    /// Neighbour rows with their in-degree (without the self term).
    neighbours: Vec<(&'a [f64], usize)>,
}

impl<'a> Neighbourhood<'a> {
    fn of_subgraph(sub: &'a SubGraph) -> Self {
        let n = sub.len();
        let mut in_deg = vec![0usize; n];
        for &(s, d) in &sub.local_edges {
            if !sub.nulled[s] && !sub.nulled[d] {
                in_deg[d] += 1;
            }
        }
        let neighbours = sub
            .local_edges
            .iter()
            .filter(|&&(s, d)| d == 0 && s != 0 && !sub.nulled[s])
            .map(|&(s, _)| (sub.row(s), in_deg[s]))
            .collect();
        Self { own: sub.row(0), own_degree: in_deg[0], neighbours }
    }

    fn of_graph_node(g: &'a Graph, u: usize) -> Self {
        Self {
            own: g.features(u),
            own_degree: g.in_degree(u),
            neighbours: g.in_edges(u).iter().map(|&j| (g.features(j), g.in_degree(j))).collect(),
        }
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, λ = 0.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = rng::stream(seed, Stream::Init);
        let mut flat = vec![0.0; shape.param_count()];
        let glorot = |rng: &mut rng::StreamRng, out: &mut [f64], fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            out.iter_mut().for_each(|w| *w = rng.random_range(-bound..=bound));
        };
        glorot(&mut rng, &mut flat[shape.w_up()..shape.b_up()], shape.d_in, shape.d_hid);
        glorot(&mut rng, &mut flat[shape.w_head()..shape.b_head()], shape.d_hid, shape.classes);
        Ok(Self { shape, flat })
    }

    pub fn from_flat(shape: ModelShape, flat: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if flat.len() != shape.param_count() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, shape needs {}",
                flat.len(),
                shape.param_count()
            )));
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("parameter vector has non-finite entries".into()));
        }
        Ok(Self { shape, flat })
    }

    pub fn param_count(&self) -> usize {
        self.flat.len()
    }

    pub fn gin_lambda(&self) -> f64 {
        match self.shape.arch {
            Arch::Gin => self.flat[self.shape.lambda()],
            _ => 0.0,
        }
    }

    /// `w ← w − η·g`.
    pub fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        debug_assert_eq!(grad.len(), self.flat.len());
        self.flat.iter_mut().zip(grad).for_each(|(w, g)| *w -= lr * g);
        if !self.shape.train_lambda && self.shape.arch == Arch::Gin {
            // A frozen λ keeps its value even under noisy updates.
            let i = self.shape.lambda();
            self.flat[i] += lr * grad[i];
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.shape.d_in {
            return Err(Error::Dimension(format!("features have dimension {dim}, model expects {}", self.shape.d_in)));
        }
        Ok(())
    }

    fn aggregate(&self, nb: &Neighbourhood<'_>) -> Vec<f64> {
        let d = self.shape.d_in;
        let mut a = vec![0.0; d];
        let axpy = |a: &mut [f64], c: f64, x: &[f64]| a.iter_mut().zip(x).for_each(|(ai, xi)| *ai += c * xi);
        match self.shape.arch {
            Arch::Gcn => {
                let du = (nb.own_degree + 1) as f64;
                axpy(&mut a, 1.0 / du, nb.own);
                for &(x, dj) in &nb.neighbours {
                    axpy(&mut a, 1.0 / (du * (dj + 1) as f64).sqrt(), x);
                }
            }
            Arch::Gin => {
                axpy(&mut a, 1.0 + self.gin_lambda(), nb.own);
                for &(x, _) in &nb.neighbours {
                    axpy(&mut a, 1.0, x);
                }
            }
            Arch::Sage => {
                let c = 1.0 / (nb.neighbours.len() + 1) as f64;
                axpy(&mut a, c, nb.own);
                for &(x, _) in &nb.neighbours {
                    axpy(&mut a, c, x);
                }
            }
        }
        a
    }

    fn forward_from(&self, aggregated: Vec<f64>) -> Activations {
        let s = &self.shape;
        let w_up = &self.flat[s.w_up()..s.b_up()];
        let mut pre = self.flat[s.b_up()..s.w_head()].to_vec();
        for (i, &ai) in aggregated.iter().enumerate() {
            if ai != 0.0 {
                let row = &w_up[i * s.d_hid..(i + 1) * s.d_hid];
                pre.iter_mut().zip(row).for_each(|(z, w)| *z += ai * w);
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| elu(z)).collect();
        let w_head = &self.flat[s.w_head()..s.b_head()];
        let mut logits = self.flat[s.b_head()..s.lambda()].to_vec();
        for (h, &hv) in hidden.iter().enumerate() {
            let row = &w_head[h * s.classes..(h + 1) * s.classes];
            logits.iter_mut().zip(row).for_each(|(l, w)| *l += hv * w);
        }
        Activations { aggregated, pre, hidden, logits }
    }

    fn backward(&self, act: &Activations, own: &[f64], label: usize) -> (f64, Gradient) {
        let s = &self.shape;
        let log_p = log_softmax(&act.logits);
        let loss = -log_p[label];
        let mut grad = Gradient::zeros(self.flat.len());
        let g = &mut grad.flat;
        let dlogits: Vec<f64> =
            log_p.iter().enumerate().map(|(c, lp)| lp.exp() - if c == label { 1.0 } else { 0.0 }).collect();
        let w_head = &self.flat[s.w_head()..s.b_head()];
        let mut dz = vec![0.0; s.d_hid];
        for h in 0..s.d_hid {
            let row = &w_head[h * s.classes..(h + 1) * s.classes];
            let gw = &mut g[s.w_head() + h * s.classes..s.w_head() + (h + 1) * s.classes];
            let mut dh = 0.0;
            for c in 0..s.classes {
                gw[c] = act.hidden[h] * dlogits[c];
                dh += row[c] * dlogits[c];
            }
            dz[h] = dh * elu_grad(act.pre[h]);
        }
        g[s.b_head()..s.lambda()].copy_from_slice(&dlogits);
        g[s.b_up()..s.w_head()].copy_from_slice(&dz);
        for (i, &ai) in act.aggregated.iter().enumerate() {
            let gw = &mut g[i * s.d_hid..(i + 1) * s.d_hid];
            gw.iter_mut().zip(&dz).for_each(|(x, d)| *x = ai * d);
        }
        if s.arch == Arch::Gin && s.train_lambda {
            // ∂a/∂λ = x_u, so ∂L/∂λ = ⟨W_up·dz, x_u⟩.
            let w_up = &self.flat[s.w_up()..s.b_up()];
            let dl: f64 = own
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    x * w_up[i * s.d_hid..(i + 1) * s.d_hid].iter().zip(&dz).map(|(w, d)| w * d).sum::<f64>()
                })
                .sum();
            g[s.lambda()] = dl;
        }
        (loss, grad)
    }

    /// Forward pass for the central node of `sub`.
    pub fn forward(&self, sub: &SubGraph) -> Result<Activations> {
        self.check_dim(sub.dim)?;
        Ok(self.forward_from(self.aggregate(&Neighbourhood::of_subgraph(sub))))
    }

    /// Central-node cross-entropy and its exact gradient.
    pub fn loss_and_grad(&self, sub: &SubGraph) -> Result<(f64, Gradient)> {
        self.check_dim(sub.dim)?;
        if sub.label >= self.shape.classes {
            return Err(Error::Dimension(format!("label {} exceeds {} classes", sub.label, self.shape.classes)));
        }
        let act = self.forward_from(self.aggregate(&Neighbourhood::of_subgraph(sub)));
        Ok(self.backward(&act, sub.row(0), sub.label))
    }

    /// Predicted class of the central node (lowest index on ties).
    pub fn predict(&self, sub: &SubGraph) -> Result<usize> {
        let act = self.forward(sub)?;
        Ok(argmax(&act.logits))
    }

    /// Mean cross-entropy over every node of `g`, each aggregating its full
    /// in-neighbourhood, with its gradient.
    pub fn full_graph_loss_and_grad(&self, g: &Graph) -> Result<(f64, Gradient)> {
        self.check_dim(g.dim())?;
        if g.num_classes() > self.shape.classes {
            return Err(Error::Dimension(format!(
                "graph has {} classes, model {}",
                g.num_classes(),
                self.shape.classes
            )));
        }
        let n = g.node_count();
        if n == 0 {
            return Ok((0.0, Gradient::zeros(self.flat.len())));
        }
        let per_node = crate::par::map_range(0..n, |u| {
            let act = self.forward_from(self.aggregate(&Neighbourhood::of_graph_node(g, u)));
            self.backward(&act, g.features(u), g.label(u))
        });
        let loss = per_node.iter().map(|(l, _)| l).sum::<f64>() / n as f64;
        let mut sum = tree_sum(per_node.into_iter().map(|(_, gr)| gr.flat).collect(), self.flat.len());
        sum.iter_mut().for_each(|x| *x /= n as f64);
        Ok((loss, Gradient { flat: sum }))
    }

    /// Write `<stem>.bin` (little-endian f64) and `<stem>.json` (shape).
    pub fn save(&self, bin_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.flat.iter().flat_map(|x| x.to_le_bytes()).collect();
        std::fs::write(bin_path, bytes)?;
        std::fs::write(header_path, serde_json::to_string_pretty(&self.shape)?)?;
        Ok(())
    }

    pub fn load(bin_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<Self> {
        let shape: ModelShape = serde_json::from_str(&std::fs::read_to_string(header_path)?)?;
        let bytes = std::fs::read(bin_path)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Integrity(format!("checkpoint length {} is not a multiple of 8", bytes.len())));
        }
        let flat = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        Self::from_flat(shape, flat).map_err(|e| Error::Integrity(format!("checkpoint does not match its header: {e}")))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use approx::assert_relative_eq;

    fn sub(features: &[&[f64]], edges: &[(usize, usize)], nulled: &[bool], label: usize) -> SubGraph {
        let dim = features[0].len();
        SubGraph {
            central: 0,
            peripherals: (1..features.len()).collect(),
            features: features.concat(),
            dim,
            local_edges: edges.to_vec(),
            nulled: nulled.to_vec(),
            label,
        }
    }

    /// `d_in = 1`, `d_hid = 1`, identity-like weights so the embedding is
    /// `elu(a)` with `a` the aggregated scalar.
    fn scalar_model(arch: Arch) -> ModelParams {
        let shape = ModelShape::new(arch, 1, 1, 2);
        let mut flat = vec![0.0; shape.param_count()];
        flat[0] = 1.0;
        ModelParams::from_flat(shape, flat).unwrap()
    }

    #[test]
    fn bare_central_aggregation() {
        let s = sub(&[&[3.0]], &[], &[false], 0);
        for arch in [Arch::Gcn, Arch::Gin, Arch::Sage] {
            assert_eq!(scalar_model(arch).forward(&s).unwrap().aggregated, vec![3.0]);
        }
    }

    #[test]
    fn sage_mean_halves_with_zero_peripheral() {
        let s = sub(&[&[4.0], &[0.0]], &[(1, 0)], &[false, false], 0);
        assert_eq!(scalar_model(Arch::Sage).forward(&s).unwrap().aggregated, vec![2.0]);
    }

    #[test]
    fn nulled_peripheral_is_ignored() {
        let with = sub(&[&[4.0], &[0.0]], &[(1, 0)], &[false, true], 0);
        let without = sub(&[&[4.0]], &[], &[false], 0);
        for arch in [Arch::Gcn, Arch::Gin, Arch::Sage] {
            let m = scalar_model(arch);
            assert_eq!(m.forward(&with).unwrap(), m.forward(&without).unwrap());
        }
    }

    #[test]
    fn gcn_uses_symmetric_degrees() {
        // 1 -> 0, 2 -> 0, 2 -> 1: d_0 = 3, d_1 = 2, d_2 = 1.
        let s = sub(&[&[1.0], &[1.0], &[1.0]], &[(1, 0), (2, 0), (2, 1)], &[false; 3], 0);
        let a = scalar_model(Arch::Gcn).forward(&s).unwrap().aggregated[0];
        let want = 1.0 / 3.0 + 1.0 / 6f64.sqrt() + 1.0 / 3f64.sqrt();
        assert_relative_eq!(a, want, epsilon = 1e-15);
    }

    #[test]
    fn duplicate_peripheral_changes_sum_not_mean() {
        let one = sub(&[&[2.0], &[2.0]], &[(1, 0)], &[false; 2], 0);
        let two = sub(&[&[2.0], &[2.0], &[2.0]], &[(1, 0), (2, 0)], &[false; 3], 0);
        let gin = scalar_model(Arch::Gin);
        let sage = scalar_model(Arch::Sage);
        assert_ne!(gin.forward(&one).unwrap().aggregated, gin.forward(&two).unwrap().aggregated);
        assert_eq!(sage.forward(&one).unwrap().aggregated, sage.forward(&two).unwrap().aggregated);
    }

    #[test]
    fn uniform_logits_give_ln_c() {
        let shape = ModelShape::new(Arch::Sage, 2, 3, 5);
        let m = ModelParams::from_flat(shape, vec![0.0; shape.param_count()]).unwrap();
        let s = sub(&[&[1.0, -1.0]], &[], &[false], 3);
        let (loss, _) = m.loss_and_grad(&s).unwrap();
        assert_relative_eq!(loss, 5f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![0.3 * i as f64 - 0.4, 0.7 - 0.2 * i as f64, 0.1]).collect();
        let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let s = sub(&rows, &[(1, 0), (2, 0), (3, 1), (2, 3)], &[false, false, false, true], 1);
        for arch in [Arch::Gcn, Arch::Gin, Arch::Sage] {
            let mut m = ModelParams::init(ModelShape::new(arch, 3, 4, 3), 9).unwrap();
            if arch == Arch::Gin {
                let i = m.shape.lambda();
                m.flat[i] = 0.3;
            }
            let (_, g) = m.loss_and_grad(&s).unwrap();
            for i in 0..m.flat.len() {
                let h = 1e-5;
                let mut p = m.clone();
                p.flat[i] += h;
                let mut q = m.clone();
                q.flat[i] -= h;
                let fd = (p.loss_and_grad(&s).unwrap().0 - q.loss_and_grad(&s).unwrap().0) / (2.0 * h);
                assert!((fd - g.flat[i]).abs() <= 1e-6 + 1e-4 * fd.abs(), "{arch} param {i}: {fd} vs {}", g.flat[i]);
            }
        }
    }

    #[test]
    fn frozen_lambda_has_no_gradient_or_drift() {
        let mut shape = ModelShape::new(Arch::Gin, 2, 2, 2);
        shape.train_lambda = false;
        let mut m = ModelParams::init(shape, 1).unwrap();
        let s = sub(&[&[1.0, 2.0]], &[], &[false], 1);
        let (_, g) = m.loss_and_grad(&s).unwrap();
        assert_eq!(g.flat[shape.lambda()], 0.0);
        let noise = vec![1.0; shape.param_count()];
        m.sgd_step(&noise, 0.1);
        assert_eq!(m.gin_lambda(), 0.0);
    }

    #[test]
    fn clipping() {
        let g = clip_gradient(Gradient { flat: vec![0.0, 4.0] });
        assert_eq!(g.flat, vec![0.0, 0.5]);
        let g = clip_gradient(Gradient { flat: vec![0.3, 0.0] });
        assert_eq!(g.flat, vec![0.3, 0.0]);
        assert_eq!(clip_gradient(Gradient::zeros(3)).flat, vec![0.0; 3]);
    }

    #[test]
    fn tree_sum_is_a_sum() {
        let parts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, 1.0]).collect();
        assert_eq!(tree_sum(parts, 2), vec![21.0, 7.0]);
        assert_eq!(tree_sum(vec![], 2), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = ModelParams::init(ModelShape::new(Arch::Gcn, 3, 2, 2), 0).unwrap();
        let s = sub(&[&[1.0]], &[], &[false], 0);
        assert!(matches!(m.forward(&s), Err(Error::Dimension(_))));
    }

    #[test]
    fn full_graph_gradient_matches_finite_differences() {
        let mut b = GraphBuilder::new(2, 2);
        for i in 0..4 {
            b.push_node(&[i as f64 * 0.5 - 1.0, 0.3], i % 2).unwrap();
        }
        b.add_edge(0, 1);
        b.add_edge(2, 1);
        b.add_edge(3, 0);
        let g = b.build().unwrap();
        let m = ModelParams::init(ModelShape::new(Arch::Gcn, 2, 3, 2), 4).unwrap();
        let (_, grad) = m.full_graph_loss_and_grad(&g).unwrap();
        for i in 0..m.flat.len() {
            let h = 1e-5;
            let mut p = m.clone();
            p.flat[i] += h;
            let mut q = m.clone();
            q.flat[i] -= h;
            let fd =
                (p.full_graph_loss_and_grad(&g).unwrap().0 - q.full_graph_loss_and_grad(&g).unwrap().0) / (2.0 * h);
            assert!((fd - grad.flat[i]).abs() <= 1e-6 + 1e-4 * fd.abs());
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = ModelParams::init(ModelShape::new(Arch::Gin, 3, 4, 2), 2).unwrap();
        let (bin, json) = (dir.path().join("model.bin"), dir.path().join("model.json"));
        m.save(&bin, &json).unwrap();
        assert_eq!(ModelParams::load(&bin, &json).unwrap(), m);
        std::fs::write(&bin, [0u8; 16]).unwrap();
        assert!(matches!(ModelParams::load(&bin, &json), Err(Error::Integrity(_))));
    }
}
