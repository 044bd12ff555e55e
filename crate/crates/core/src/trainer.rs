//! The private training loop, evaluation and the node-impact experiment.
//!
//! One iteration samples sub-graphs from the training nodes, takes one
//! gradient per sub-graph, clips each to norm 0.5, sums them, adds
//! spherical noise with coordinate-wise standard deviation `σ` to the sum
//! and takes a plain SGD step with the noisy sum. The noisy sum is the only
//! quantity that reaches the model; [`ClippedSum`] is consumed by
//! [`ClippedSum::privatize`] so the raw sum cannot be used afterwards.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::{self, AccountantConfig, CalibrationReport, DivergenceForm, DoutGrid};
use crate::gnn::{clip_gradient, l2_norm, tree_sum, Arch, Gradient, ModelParams, ModelShape};
use crate::graph::{gen_erdos_renyi, Graph, NodeSplit};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::rng::{self, Stream};
use crate::sampler::{
    heter_poisson, heter_poisson_with, FeatureSource, SampleKey, SamplerConfig, SamplerMode, SubGraph,
};
use crate::{par, Error, NodeId, Result};

/// Sum of clipped per-sub-graph gradients for one iteration.
///
/// The raw sum is private data. The only way out is [`privatize`], which
/// takes the value by move:
///
/// ```compile_fail
/// use nodedp::noise::{NoiseKind, NoiseSpec};
/// use nodedp::trainer::ClippedSum;
///
/// let sum = ClippedSum::from_clipped(vec![], 3);
/// let spec = NoiseSpec::new(NoiseKind::Sml, 1.0, 3).unwrap();
/// let mut rng = nodedp::rng::stream(0, nodedp::rng::Stream::Noise);
/// let noisy = sum.privatize(&spec, &mut rng);
/// let _again = sum.privatize(&spec, &mut rng); // `sum` was moved
/// ```
///
/// [`privatize`]: ClippedSum::privatize
#[derive(Debug)]
pub struct ClippedSum {
    sum: Vec<f64>,
    count: usize,
}

/// The noisy gradient sum `g^t`; safe to use for anything.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateGradient {
    pub flat: Vec<f64>,
}

impl ClippedSum {
    /// Sum already-clipped gradients in a fixed tree order.
    pub fn from_clipped(clipped: Vec<Gradient>, len: usize) -> Self {
        let count = clipped.len();
        Self { sum: tree_sum(clipped.into_iter().map(|g| g.flat).collect(), len), count }
    }

    /// Number of gradients in the sum.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Add one noise draw to the sum and release it.
    pub fn privatize<R: Rng + ?Sized>(self, noise: &NoiseSpec, rng: &mut R) -> PrivateGradient {
        let mut flat = self.sum;
        noise.add_to(&mut flat, rng);
        PrivateGradient { flat }
    }

    /// Fold one more clipped-sized vector into the sum (audit canaries).
    pub(crate) fn add(&mut self, v: &[f64]) {
        self.sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
    }
}

/// How test nodes see their neighbourhood at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Test nodes live in the training graph; each samples neighbours
    /// among test nodes only.
    Transductive,
    /// Test nodes live on a separate graph and use all their in-neighbours.
    Inductive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: u64,
    pub learning_rate: f64,
    pub q_b: f64,
    pub m: f64,
    /// Fixed noise level; `Some(0.0)` trains without noise.
    pub sigma: Option<f64>,
    /// Calibrate σ to this ε before training (used when `sigma` is `None`).
    pub eps_target: Option<f64>,
    pub delta: f64,
    pub arch: Arch,
    pub hidden: usize,
    pub train_lambda: bool,
    pub seed: u64,
    /// Neighbour-sampling multiplier at evaluation time.
    pub n_test: f64,
    pub enforce_no_overlap: bool,
    pub noise: NoiseKind,
    pub divergence: DivergenceForm,
    pub dout_grid: DoutGrid,
}

impl TrainConfig {
    /// Defaults for a graph of `node_count` nodes: `T = ⌈9/q_b⌉`,
    /// `δ = node_count^−1.1`, SML noise, overlap enforced.
    pub fn new(q_b: f64, node_count: usize) -> Self {
        Self {
            iterations: (9.0 / q_b).ceil() as u64,
            learning_rate: 0.01,
            q_b,
            m: 2.0,
            sigma: None,
            eps_target: None,
            delta: (node_count.max(2) as f64).powf(-1.1),
            arch: Arch::Gcn,
            hidden: 128,
            train_lambda: true,
            seed: 0,
            n_test: 13.0,
            enforce_no_overlap: true,
            noise: NoiseKind::Sml,
            divergence: DivergenceForm::Bound,
            dout_grid: DoutGrid::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("need at least one iteration".into()));
        }
        if !(self.n_test >= 0.0) {
            return Err(Error::InvalidParameter(format!("N_test must be >= 0, got {}", self.n_test)));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidParameter("hidden dimension must be >= 1".into()));
        }
        if self.sigma.is_none() && self.eps_target.is_none() {
            return Err(Error::InvalidParameter("set either sigma or a target epsilon".into()));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {s}")));
            }
        }
        self.sampler().validate()
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig::train(self.q_b, self.m, self.enforce_no_overlap)
    }

    pub fn shape(&self, g: &Graph) -> ModelShape {
        ModelShape {
            train_lambda: self.train_lambda,
            ..ModelShape::new(self.arch, g.dim(), self.hidden, g.num_classes())
        }
    }

    /// Accountant settings for a universe of `node_count` nodes.
    pub fn accountant(&self, node_count: usize) -> AccountantConfig {
        AccountantConfig {
            enforce_no_overlap: self.enforce_no_overlap,
            noise: self.noise,
            form: self.divergence,
            dout_grid: self.dout_grid,
            ..AccountantConfig::new(self.q_b, self.m, self.iterations, self.delta, node_count)
        }
    }
}

/// Accounted ε; `Infinite` for runs without noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Finite(f64),
    Infinite,
}

impl Epsilon {
    pub fn value(self) -> f64 {
        match self {
            Epsilon::Finite(e) => e,
            Epsilon::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Epsilon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Epsilon::Finite(e) => s.serialize_f64(*e),
            Epsilon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(e) => Ok(Epsilon::Finite(e)),
            Raw::Text(t) if t == "inf" => Ok(Epsilon::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Accuracy and per-class precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Classes never predicted get precision 0.
    pub precision: Vec<f64>,
    pub mean_precision: f64,
    pub evaluated: usize,
}

impl Metrics {
    pub fn from_predictions(predicted: &[usize], truth: &[usize], classes: usize) -> Self {
        let n = predicted.len();
        let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
        let mut hits = vec![0usize; classes];
        let mut calls = vec![0usize; classes];
        for (&p, &t) in predicted.iter().zip(truth) {
            calls[p] += 1;
            if p == t {
                hits[p] += 1;
            }
        }
        let precision: Vec<f64> =
            hits.iter().zip(&calls).map(|(&h, &c)| if c == 0 { 0.0 } else { h as f64 / c as f64 }).collect();
        let mean_precision = precision.iter().sum::<f64>() / classes.max(1) as f64;
        Self { accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 }, precision, mean_precision, evaluated: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Mean central-node loss per iteration (0 when nothing was sampled).
    pub losses: Vec<f64>,
    pub metrics: Metrics,
    pub epsilon: Epsilon,
    pub delta: f64,
    pub sigma: f64,
    pub alpha: Option<f64>,
    pub calibration: Option<CalibrationReport>,
    /// Sub-graphs used over the whole run.
    pub subgraphs_total: usize,
    /// Set when no iteration sampled a single sub-graph.
    pub zero_coverage: bool,
    /// Peripheral slots inspected by overlap nulling over the whole run.
    pub overlap_work: usize,
    pub wall_clock_secs: f64,
}

/// Per-iteration hook; receives the iteration index, the batch's clipped
/// sum (before noise) and the released gradient.
pub(crate) trait IterationHook {
    fn before_release(&mut self, _t: u64, _sum: &mut ClippedSum, _subgraphs: usize) {}
    fn after_release(&mut self, _t: u64, _released: &PrivateGradient) {}
}

struct NoHook;
impl IterationHook for NoHook {}

/// Resolve the noise level: fixed σ, or calibration to the target ε.
pub fn resolve_sigma(cfg: &TrainConfig, node_count: usize) -> Result<(f64, Option<CalibrationReport>)> {
    match (cfg.sigma, cfg.eps_target) {
        (Some(s), _) => Ok((s, None)),
        (None, Some(eps)) => {
            let report = accountant::calibrate_sigma(eps, &cfg.accountant(node_count))?;
            Ok((report.sigma, Some(report)))
        }
        (None, None) => Err(Error::InvalidParameter("set either sigma or a target epsilon".into())),
    }
}

/// Train on `split.train_ids` of `g`, then evaluate transductively on
/// `split.test_ids`.
pub fn train(g: &Graph, split: &NodeSplit, cfg: &TrainConfig) -> Result<(ModelParams, RunReport)> {
    let start = Instant::now();
    cfg.validate()?;
    let (sigma, calibration) = resolve_sigma(cfg, g.node_count())?;
    let (params, mut report) = train_with_sigma(g, &split.train_ids, cfg, sigma, &mut NoHook)?;
    report.metrics = evaluate(&params, g, split, cfg)?;
    report.calibration = calibration;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((params, report))
}

pub(crate) fn train_with_sigma(
    g: &Graph,
    train_ids: &[NodeId],
    cfg: &TrainConfig,
    sigma: f64,
    hook: &mut impl IterationHook,
) -> Result<(ModelParams, RunReport)> {
    let mut params = ModelParams::init(cfg.shape(g), cfg.seed)?;
    let len = params.param_count();
    let noise = NoiseSpec::new(cfg.noise, sigma, len)?;
    let sampler = cfg.sampler();
    let mut losses = Vec::with_capacity(cfg.iterations as usize);
    let (mut subgraphs_total, mut overlap_work) = (0, 0);
    for t in 0..cfg.iterations {
        let batch = heter_poisson(g, train_ids, &sampler, SampleKey { seed: cfg.seed, round: t })?;
        overlap_work += batch.overlap_work;
        subgraphs_total += batch.len();
        let results = par::map(&batch.subgraphs, |s| params.loss_and_grad(s));
        let mut clipped = Vec::with_capacity(results.len());
        let mut loss_sum = 0.0;
        for r in results {
            let (loss, grad) = r?;
            loss_sum += loss;
            clipped.push(clip_gradient(grad));
        }
        let loss = if batch.is_empty() { 0.0 } else { loss_sum / batch.len() as f64 };
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss is not finite at iteration {t}")));
        }
        losses.push(loss);
        let mut sum = ClippedSum::from_clipped(clipped, len);
        hook.before_release(t, &mut sum, batch.len());
        let released = sum.privatize(&noise, &mut rng::keyed(cfg.seed, Stream::Noise, t, 0));
        hook.after_release(t, &released);
        params.sgd_step(&released.flat, cfg.learning_rate);
        if params.flat.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric(format!("parameters diverged at iteration {t}")));
        }
    }
    let zero_coverage = subgraphs_total == 0;
    let (epsilon, alpha) = if sigma == 0.0 {
        (Epsilon::Infinite, None)
    } else if cfg.q_b == 0.0 {
        // Nothing about the data is ever released.
        (Epsilon::Finite(0.0), None)
    } else {
        let acc = accountant::epsilon_for_sigma(&cfg.accountant(g.node_count()), sigma)?;
        (Epsilon::Finite(acc.epsilon), Some(acc.alpha))
    };
    let report = RunReport {
        losses,
        metrics: Metrics::from_predictions(&[], &[], g.num_classes()),
        epsilon,
        delta: cfg.delta,
        sigma,
        alpha,
        calibration: None,
        subgraphs_total,
        zero_coverage,
        overlap_work,
        wall_clock_secs: 0.0,
    };
    Ok((params, report))
}

/// Transductive evaluation: every test node is a central node whose
/// peripherals are sampled among test nodes with multiplier `n_test`.
pub fn evaluate(params: &ModelParams, g: &Graph, split: &NodeSplit, cfg: &TrainConfig) -> Result<Metrics> {
    evaluate_with(params, g, g, split, cfg)
}

/// [`evaluate`] reading feature rows through `source`.
pub fn evaluate_with(
    params: &ModelParams,
    g: &Graph,
    source: &impl FeatureSource,
    split: &NodeSplit,
    cfg: &TrainConfig,
) -> Result<Metrics> {
    let sampler = SamplerConfig {
        q_b: 1.0,
        m: cfg.n_test,
        enforce_no_overlap: false,
        mode: SamplerMode::Inference { test_ids: split.test_ids.clone() },
    };
    let batch =
        heter_poisson_with(g, source, &split.test_ids, &sampler, SampleKey { seed: cfg.seed, round: u64::MAX })?;
    score(params, &batch.subgraphs, g.num_classes())
}

/// Inductive evaluation on a separate graph, each node with its full
/// in-neighbourhood.
pub fn evaluate_inductive(params: &ModelParams, test_graph: &Graph) -> Result<Metrics> {
    let subs = par::map_range(0..test_graph.node_count(), |u| {
        SubGraph::induce(test_graph, test_graph, u, test_graph.in_edges(u).to_vec(), |_| false)
    });
    score(params, &subs, test_graph.num_classes())
}

fn score(params: &ModelParams, subs: &[SubGraph], classes: usize) -> Result<Metrics> {
    let predicted = par::map(subs, |s| params.predict(s)).into_iter().collect::<Result<Vec<_>>>()?;
    let truth: Vec<usize> = subs.iter().map(|s| s.label).collect();
    Ok(Metrics::from_predictions(&predicted, &truth, classes.max(params.shape.classes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactConfig {
    pub n: usize,
    pub p: f64,
    pub d: usize,
    pub classes: usize,
    /// Fractions `χ` of the `n` base nodes the added node points at.
    pub chi_grid: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
    pub arch: Arch,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub chi: f64,
    pub mean: f64,
    pub sd: f64,
}

/// For each `χ`, the gradient change `Δ = ‖g* − g′‖₂` of the full-graph
/// loss when a node with `round(χ·n)` out-edges joins an Erdős–Rényi graph,
/// averaged over `repeats` fresh graphs and models.
pub fn impact_experiment(cfg: &ImpactConfig) -> Result<Vec<ImpactRow>> {
    if let Some(&chi) = cfg.chi_grid.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidParameter(format!("chi must lie in [0, 1], got {chi}")));
    }
    if cfg.repeats == 0 || cfg.n == 0 {
        return Err(Error::InvalidParameter("need n >= 1 and at least one repeat".into()));
    }
    let mut deltas = vec![Vec::with_capacity(cfg.repeats); cfg.chi_grid.len()];
    for r in 0..cfg.repeats as u64 {
        let run_seed: u64 = rng::keyed(cfg.seed, Stream::Experiment, r, 0).random();
        let base = gen_erdos_renyi(cfg.n, cfg.p, cfg.d, cfg.classes, run_seed)?;
        let params = ModelParams::init(ModelShape::new(cfg.arch, cfg.d, cfg.hidden, cfg.classes), run_seed)?;
        let (_, g_star) = params.full_graph_loss_and_grad(&base)?;
        let mut rng = rng::keyed(cfg.seed, Stream::Experiment, r, 1);
        let feature: Vec<f64> = (0..cfg.d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let label = rng.random_range(0..cfg.classes);
        let order = {
            let mut ids: Vec<NodeId> = (0..cfg.n).collect();
            rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);
            ids
        };
        for (ci, &chi) in cfg.chi_grid.iter().enumerate() {
            let mut targets = order[..(chi * cfg.n as f64).round() as usize].to_vec();
            targets.sort_unstable();
            let g_prime = base.add_node(&feature, label, &targets, &[])?;
            let (_, grad) = params.full_graph_loss_and_grad(&g_prime)?;
            let diff: Vec<f64> = g_star.flat.iter().zip(&grad.flat).map(|(a, b)| a - b).collect();
            deltas[ci].push(l2_norm(&diff));
        }
    }
    Ok(cfg
        .chi_grid
        .iter()
        .zip(deltas)
        .map(|(&chi, d)| {
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let var = if d.len() > 1 { d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            ImpactRow { chi, mean, sd: var.sqrt() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_planted_classes, split_train_test, PlantedConfig};
    use std::sync::Mutex;

    fn planted(n: usize, classes: usize, separation: f64, seed: u64) -> Graph {
        gen_planted_classes(&PlantedConfig { n, d: 8, classes, p_intra: 0.01, p_inter: 0.002, separation, seed })
            .unwrap()
    }

    fn quick_cfg(sigma: f64) -> TrainConfig {
        TrainConfig {
            sigma: Some(sigma),
            hidden: 16,
            iterations: 60,
            q_b: 0.1,
            learning_rate: 0.05,
            ..TrainConfig::new(0.1, 400)
        }
    }

    #[test]
    fn metrics_definitions() {
        let m = Metrics::from_predictions(&[0, 1, 2, 3], &[0, 1, 2, 3], 4);
        assert_eq!((m.accuracy, m.mean_precision), (1.0, 1.0));
        let m = Metrics::from_predictions(&[0; 8], &[0, 1, 2, 3, 0, 1, 2, 3], 4);
        assert_eq!(m.accuracy, 0.25);
        assert_eq!(m.precision, vec![0.25, 0.0, 0.0, 0.0]);
        assert_eq!(m.mean_precision, 0.0625);
    }

    #[test]
    fn epsilon_serializes_infinity_as_text() {
        assert_eq!(serde_json::to_string(&Epsilon::Infinite).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Epsilon::Finite(2.5)).unwrap(), "2.5");
        let back: Epsilon = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, Epsilon::Infinite);
        assert!(serde_json::from_str::<Epsilon>("\"nan\"").is_err());
    }

    #[test]
    fn noiseless_training_learns_separable_task() {
        let g = planted(400, 2, 6.0, 1);
        let split = split_train_test(&g, 0.7, 1).unwrap();
        let (_, report) = train(&g, &split, &quick_cfg(0.0)).unwrap();
        assert_eq!(report.epsilon, Epsilon::Infinite);
        assert!(report.metrics.accuracy > 0.9, "{}", report.metrics.accuracy);
        assert!(report.losses.last().unwrap() < &report.losses[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let g = planted(200, 2, 3.0, 2);
        let split = split_train_test(&g, 0.7, 2).unwrap();
        let cfg = TrainConfig { iterations: 10, ..quick_cfg(1.0) };
        let (pa, mut ra) = train(&g, &split, &cfg).unwrap();
        let (pb, mut rb) = train(&g, &split, &cfg).unwrap();
        ra.wall_clock_secs = 0.0;
        rb.wall_clock_secs = 0.0;
        assert_eq!(pa, pb);
        assert_eq!(ra, rb);
        assert!(matches!(ra.epsilon, Epsilon::Finite(e) if e > 0.0));
    }

    #[test]
    fn zero_rate_is_a_pure_noise_walk() {
        let g = planted(100, 2, 3.0, 3);
        let split = split_train_test(&g, 0.7, 3).unwrap();
        let cfg = TrainConfig { q_b: 0.0, iterations: 5, ..quick_cfg(1.0) };
        let (params, report) = train(&g, &split, &cfg).unwrap();
        assert!(report.zero_coverage);
        assert_eq!(report.subgraphs_total, 0);
        let init = ModelParams::init(cfg.shape(&g), cfg.seed).unwrap();
        let mut walk = init.clone();
        for t in 0..5 {
            let noise = NoiseSpec::new(cfg.noise, 1.0, init.param_count()).unwrap();
            let step = noise.sample(&mut rng::keyed(cfg.seed, Stream::Noise, t, 0));
            walk.sgd_step(&step, cfg.learning_rate);
        }
        assert_eq!(params, walk);
    }

    /// Records every feature row read.
    struct Logged<'a> {
        g: &'a Graph,
        reads: Mutex<Vec<NodeId>>,
    }

    impl FeatureSource for Logged<'_> {
        fn feature_row(&self, id: NodeId) -> &[f64] {
            self.reads.lock().unwrap().push(id);
            self.g.features(id)
        }
    }

    #[test]
    fn evaluation_never_reads_training_rows() {
        let g = gen_erdos_renyi(150, 0.1, 4, 3, 6).unwrap();
        let split = split_train_test(&g, 0.6, 6).unwrap();
        let cfg = TrainConfig { hidden: 8, ..quick_cfg(0.0) };
        let params = ModelParams::init(cfg.shape(&g), 0).unwrap();
        let log = Logged { g: &g, reads: Mutex::new(Vec::new()) };
        let m = evaluate_with(&params, &g, &log, &split, &cfg).unwrap();
        assert_eq!(m.evaluated, split.test_ids.len());
        let train = split.train_mask(g.node_count());
        let reads = log.reads.into_inner().unwrap();
        assert!(!reads.is_empty());
        assert!(reads.iter().all(|&id| !train[id]));
    }

    #[test]
    fn released_gradient_is_the_only_update() {
        struct Capture(Vec<Vec<f64>>);
        impl IterationHook for Capture {
            fn after_release(&mut self, _t: u64, released: &PrivateGradient) {
                self.0.push(released.flat.clone());
            }
        }
        let g = planted(120, 2, 3.0, 7);
        let split = split_train_test(&g, 0.7, 7).unwrap();
        let cfg = TrainConfig { iterations: 4, ..quick_cfg(0.5) };
        let mut cap = Capture(Vec::new());
        let (params, _) = train_with_sigma(&g, &split.train_ids, &cfg, 0.5, &mut cap).unwrap();
        let mut replay = ModelParams::init(cfg.shape(&g), cfg.seed).unwrap();
        for step in &cap.0 {
            replay.sgd_step(step, cfg.learning_rate);
        }
        assert_eq!(params, replay);
    }

    #[test]
    fn inductive_evaluation_covers_every_node() {
        let g = planted(80, 2, 6.0, 8);
        let params = ModelParams::init(ModelShape::new(Arch::Sage, 8, 4, 2), 0).unwrap();
        assert_eq!(evaluate_inductive(&params, &g).unwrap().evaluated, 80);
    }

    #[test]
    fn impact_rejects_bad_chi_and_is_deterministic() {
        let mut cfg = ImpactConfig {
            n: 30,
            p: 0.1,
            d: 4,
            classes: 3,
            chi_grid: vec![0.0, 0.5, 1.0],
            repeats: 3,
            seed: 1,
            arch: Arch::Gcn,
            hidden: 8,
        };
        let a = impact_experiment(&cfg).unwrap();
        assert_eq!(a, impact_experiment(&cfg).unwrap());
        assert!(a.iter().all(|r| r.mean > 0.0));
        cfg.chi_grid.push(1.5);
        assert!(impact_experiment(&cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = quick_cfg(1.0);
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = quick_cfg(1.0);
        cfg.sigma = None;
        assert!(cfg.validate().is_err());
    }
}
