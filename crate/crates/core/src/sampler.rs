//! HeterPoisson sub-graph sampling.
//!
//! Each input node becomes a *central* node independently with probability
//! `q_b`. A central node `i` then samples each in-neighbour `j` (every `j`
//! with `j -> i`) independently with probability `min(1, M / D_ot(j))`, where
//! `D_ot(j)` is `j`'s out-degree in the whole graph. A node with many
//! out-edges is therefore sampled as a peripheral `M` times in expectation no
//! matter how many centrals it points at, which is what bounds its influence
//! on one step's gradient sum.
//!
//! After all sub-graphs are formed, a peripheral that is itself central
//! somewhere is *nulled* inside every sub-graph where it appears as a
//! peripheral: its feature row is zeroed and it is flagged so aggregation
//! ignores it. Its edges are kept.
//!
//! All coins come from streams keyed by `(seed, round, central id)`, with one
//! coin drawn per whole-graph in-neighbour whether or not that neighbour is an
//! eligible candidate. Two runs over graphs that differ in one node therefore
//! share every coin except those that involve that node.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{mask, Graph, GraphBuilder, NodeId};
use crate::rng::{self, Stream};
use crate::{par, Error, Result};

/// Read access to feature rows; lets callers observe which rows a
/// sub-graph construction touches.
pub trait FeatureSource: Sync {
    fn feature_row(&self, id: NodeId) -> &[f64];
}

impl FeatureSource for Graph {
    fn feature_row(&self, id: NodeId) -> &[f64] {
        self.features(id)
    }
}

/// One induced sub-graph around a central node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubGraph {
    pub central: NodeId,
    /// Peripheral ids, ascending. Local index of `peripherals[i]` is `i + 1`;
    /// the central node has local index 0.
    pub peripherals: Vec<NodeId>,
    /// Feature rows by local index, row-major.
    pub features: Vec<f64>,
    pub dim: usize,
    /// Induced edges `(src, dst)` in local indices.
    pub local_edges: Vec<(usize, usize)>,
    /// Nulled flags by local index (never set for the central node).
    pub nulled: Vec<bool>,
    /// Class of the central node.
    pub label: usize,
}

impl SubGraph {
    /// Induce the sub-graph on `{central} ∪ peripherals` from `g`'s topology,
    /// copying feature rows from `source`. Rows of nulled members are never
    /// read.
    pub fn induce(
        g: &Graph,
        source: &impl FeatureSource,
        central: NodeId,
        mut peripherals: Vec<NodeId>,
        is_nulled: impl Fn(NodeId) -> bool,
    ) -> SubGraph {
        peripherals.sort_unstable();
        peripherals.dedup();
        peripherals.retain(|&p| p != central);
        let dim = g.dim();
        let members: Vec<NodeId> = std::iter::once(central).chain(peripherals.iter().copied()).collect();
        let local_of = |id: NodeId| -> Option<usize> {
            if id == central {
                Some(0)
            } else {
                peripherals.binary_search(&id).ok().map(|i| i + 1)
            }
        };
        let mut features = Vec::with_capacity(members.len() * dim);
        let mut nulled = Vec::with_capacity(members.len());
        for (local, &id) in members.iter().enumerate() {
            let null = local > 0 && is_nulled(id);
            nulled.push(null);
            if null {
                features.extend(std::iter::repeat_n(0.0, dim));
            } else {
                features.extend_from_slice(source.feature_row(id));
            }
        }
        let mut local_edges = Vec::new();
        for (dst_local, &dst) in members.iter().enumerate() {
            for &src in g.in_edges(dst) {
                if let Some(src_local) = local_of(src) {
                    local_edges.push((src_local, dst_local));
                }
            }
        }
        local_edges.sort_unstable();
        SubGraph { central, peripherals, features, dim, local_edges, nulled, label: g.label(central) }
    }

    pub fn len(&self) -> usize {
        1 + self.peripherals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn row(&self, local: usize) -> &[f64] {
        &self.features[local * self.dim..(local + 1) * self.dim]
    }

    pub fn contains_peripheral(&self, id: NodeId) -> bool {
        self.peripherals.binary_search(&id).is_ok()
    }
}

/// Output of one HeterPoisson call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubGraphBatch {
    pub subgraphs: Vec<SubGraph>,
    /// Every central id, ascending.
    pub central_set: Vec<NodeId>,
    /// Peripheral slots inspected by the overlap-nulling pass.
    pub overlap_work: usize,
}

impl SubGraphBatch {
    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    pub fn is_central(&self, id: NodeId) -> bool {
        self.central_set.binary_search(&id).is_ok()
    }

    /// Debug dump.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplerMode {
    /// Peripherals are drawn from the input node set.
    Train,
    /// Peripherals are drawn from the test set only, so training rows are
    /// never read at inference time.
    Inference { test_ids: Vec<NodeId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Base sampling rate for central nodes, in `[0, 1]`.
    pub q_b: f64,
    /// Neighbour-sampling multiplier `M`.
    pub m: f64,
    pub enforce_no_overlap: bool,
    pub mode: SamplerMode,
}

impl SamplerConfig {
    pub fn train(q_b: f64, m: f64, enforce_no_overlap: bool) -> Self {
        Self { q_b, m, enforce_no_overlap, mode: SamplerMode::Train }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q_b) {
            return Err(Error::InvalidParameter(format!("q_b must lie in [0, 1], got {}", self.q_b)));
        }
        if !(self.m >= 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!("M must be finite and >= 0, got {}", self.m)));
        }
        Ok(())
    }
}

/// Probability that a node with whole-graph out-degree `d_out` is kept by
/// neighbour sampling: `min(1, M / d_out)`.
pub fn inclusion_probability(d_out: usize, m: f64) -> f64 {
    if m <= 0.0 {
        0.0
    } else if d_out == 0 {
        1.0
    } else {
        (m / d_out as f64).min(1.0)
    }
}

/// Keep each candidate independently with probability
/// `min(1, M / D_ot)`, one coin per candidate in order.
pub fn neighbor_sampling<R: Rng + ?Sized>(g: &Graph, candidates: &[NodeId], m: f64, rng: &mut R) -> Vec<NodeId> {
    candidates.iter().copied().filter(|&j| rng.random::<f64>() < inclusion_probability(g.out_degree(j), m)).collect()
}

/// Coin source for one HeterPoisson call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleKey {
    pub seed: u64,
    /// Iteration or trial number.
    pub round: u64,
}

fn sample_central(g: &Graph, i: NodeId, allowed: &[bool], cfg: &SamplerConfig, key: SampleKey) -> Option<Vec<NodeId>> {
    let mut rng = rng::keyed(key.seed, Stream::Sampler, key.round, i as u64);
    if rng.random::<f64>() >= cfg.q_b {
        return None;
    }
    let mut picked = Vec::new();
    for &j in g.in_edges(i) {
        let coin: f64 = rng.random();
        if allowed[j] && coin < inclusion_probability(g.out_degree(j), cfg.m) {
            picked.push(j);
        }
    }
    Some(picked)
}

/// One HeterPoisson draw over `input_ids` of the whole graph `g`.
pub fn heter_poisson(g: &Graph, input_ids: &[NodeId], cfg: &SamplerConfig, key: SampleKey) -> Result<SubGraphBatch> {
    heter_poisson_with(g, g, input_ids, cfg, key)
}

/// [`heter_poisson`] reading feature rows through `source`.
pub fn heter_poisson_with(
    g: &Graph,
    source: &impl FeatureSource,
    input_ids: &[NodeId],
    cfg: &SamplerConfig,
    key: SampleKey,
) -> Result<SubGraphBatch> {
    cfg.validate()?;
    let n = g.node_count();
    if let Some(&bad) = input_ids.iter().find(|&&id| id >= n) {
        return Err(Error::Integrity(format!("input node {bad} does not exist")));
    }
    let allowed = match &cfg.mode {
        SamplerMode::Train => mask(input_ids, n),
        SamplerMode::Inference { test_ids } => {
            let test = mask(test_ids, n);
            if let Some(&bad) = input_ids.iter().find(|&&id| !test[id]) {
                return Err(Error::InvalidParameter(format!("inference input node {bad} is not a test node")));
            }
            test
        }
    };

    let drawn = par::map(input_ids, |&i| sample_central(g, i, &allowed, cfg, key).map(|p| (i, p)));
    let sampled: Vec<(NodeId, Vec<NodeId>)> = drawn.into_iter().flatten().collect();

    let mut central_set: Vec<NodeId> = sampled.iter().map(|(i, _)| *i).collect();
    central_set.sort_unstable();
    if central_set.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("input ids must be distinct".into()));
    }
    let central_mask = mask(&central_set, n);
    let enforce = cfg.enforce_no_overlap;
    let overlap_work = if enforce { sampled.iter().map(|(_, p)| p.len()).sum() } else { 0 };

    let subgraphs = par::map(&sampled, |(i, peripherals)| {
        SubGraph::induce(g, source, *i, peripherals.clone(), |j| enforce && central_mask[j])
    });
    Ok(SubGraphBatch { subgraphs, central_set, overlap_work })
}

/// The node that distinguishes two adjacent graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacentNode {
    pub feature: Vec<f64>,
    pub label: usize,
    /// Nodes `z` points at; `|out_targets|` is `z`'s out-degree.
    pub out_targets: Vec<NodeId>,
    /// Nodes pointing at `z`.
    pub in_sources: Vec<NodeId>,
}

/// Batches for an adjacent pair under shared randomness.
#[derive(Debug, Clone)]
pub struct CoupledSample {
    /// `𝒢′ = 𝒢* ∪ {z}`; also the whole graph both runs sample from.
    pub graph_prime: Graph,
    pub z: NodeId,
    pub star: SubGraphBatch,
    pub prime: SubGraphBatch,
    /// Realised sensitivity index: 0.5 if `z` is central (plus the number of
    /// sub-graphs holding `z` as a live peripheral when overlap is not
    /// enforced), otherwise the number of sub-graphs holding `z`.
    pub k: f64,
}

/// Run HeterPoisson on `𝒢*` (input = every node but `z`) and on `𝒢′`
/// (input = every node) with the same coins. Out-degrees come from `𝒢′`,
/// the whole graph, in both runs.
pub fn coupled_adjacent_sample(
    g_star: &Graph,
    z: &AdjacentNode,
    cfg: &SamplerConfig,
    key: SampleKey,
) -> Result<CoupledSample> {
    if cfg.mode != SamplerMode::Train {
        return Err(Error::InvalidParameter("coupled sampling is defined for training mode".into()));
    }
    let graph_prime = g_star.add_node(&z.feature, z.label, &z.out_targets, &z.in_sources)?;
    coupled_on(graph_prime, cfg, key)
}

/// As [`coupled_adjacent_sample`] when `𝒢′` is already built; `z` is its
/// last node.
pub fn coupled_on(graph_prime: Graph, cfg: &SamplerConfig, key: SampleKey) -> Result<CoupledSample> {
    let z = graph_prime
        .node_count()
        .checked_sub(1)
        .ok_or_else(|| Error::InvalidParameter("adjacent graph is empty".into()))?;
    let all: Vec<NodeId> = (0..=z).collect();
    let star = heter_poisson(&graph_prime, &all[..z], cfg, key)?;
    let prime = heter_poisson(&graph_prime, &all, cfg, key)?;
    let holding = prime.subgraphs.iter().filter(|s| s.contains_peripheral(z)).count() as f64;
    let k = if prime.is_central(z) {
        if cfg.enforce_no_overlap {
            0.5
        } else {
            0.5 + holding
        }
    } else {
        holding
    };
    Ok(CoupledSample { graph_prime, z, star, prime, k })
}

/// Build a graph from `g` keeping only `ids` (renumbered densely in order).
pub fn induced_graph(g: &Graph, ids: &[NodeId]) -> Result<Graph> {
    let mut new_id = vec![usize::MAX; g.node_count()];
    let mut b = GraphBuilder::new(g.dim(), g.num_classes());
    for (k, &id) in ids.iter().enumerate() {
        new_id[id] = k;
        b.push_node(g.features(id), g.label(id))?;
    }
    for (s, t) in g.edges() {
        if new_id[s] != usize::MAX && new_id[t] != usize::MAX {
            b.add_edge(new_id[s], new_id[t]);
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_erdos_renyi;

    /// Star: 1..=k all point at 0, plus 1 -> 2 when k >= 2.
    fn fan_in(k: usize) -> Graph {
        let mut b = GraphBuilder::new(2, 2);
        for i in 0..=k {
            b.push_node(&[i as f64 + 1.0, 1.0], i % 2).unwrap();
        }
        for i in 1..=k {
            b.add_edge(i, 0);
        }
        if k >= 2 {
            b.add_edge(1, 2);
        }
        b.build().unwrap()
    }

    #[test]
    fn inclusion_probability_clamps() {
        assert_eq!(inclusion_probability(4, 0.0), 0.0);
        assert_eq!(inclusion_probability(4, 1.0), 0.25);
        assert_eq!(inclusion_probability(4, 10.0), 1.0);
        assert_eq!(inclusion_probability(0, 1.0), 1.0);
    }

    #[test]
    fn neighbor_sampling_extremes() {
        let g = gen_erdos_renyi(30, 0.3, 1, 2, 4).unwrap();
        let cand: Vec<NodeId> = (0..30).collect();
        let mut r = rng::stream(1, Stream::Sampler);
        assert!(neighbor_sampling(&g, &cand, 0.0, &mut r).is_empty());
        let m = g.max_out_degree() as f64;
        assert_eq!(neighbor_sampling(&g, &cand, m, &mut r), cand);
    }

    #[test]
    fn neighbor_sampling_rate_matches_bernoulli() {
        // One candidate with out-degree 4, M = 1: rate 0.25, s.d. of the mean
        // over 1e5 trials is sqrt(0.25·0.75/1e5) ≈ 0.00137.
        let mut b = GraphBuilder::new(1, 1);
        for _ in 0..5 {
            b.push_node(&[0.0], 0).unwrap();
        }
        for t in 1..5 {
            b.add_edge(0, t);
        }
        let g = b.build().unwrap();
        let mut r = rng::stream(3, Stream::Sampler);
        let trials = 100_000;
        let hits: usize = (0..trials).map(|_| neighbor_sampling(&g, &[0], 1.0, &mut r).len()).sum();
        let rate = hits as f64 / trials as f64;
        assert!((rate - 0.25).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn full_rate_no_multiplier_gives_bare_centrals() {
        let g = fan_in(4);
        let ids: Vec<NodeId> = (0..5).collect();
        let batch =
            heter_poisson(&g, &ids, &SamplerConfig::train(1.0, 0.0, true), SampleKey { seed: 1, round: 0 }).unwrap();
        assert_eq!(batch.len(), 5);
        assert!(batch.subgraphs.iter().all(|s| s.peripherals.is_empty() && s.local_edges.is_empty()));
        assert_eq!(batch.central_set, ids);
    }

    #[test]
    fn overlapping_central_is_nulled_only_as_peripheral() {
        // a = 0, b = 1 with b -> a; M large so b is always picked.
        let g = fan_in(1);
        let ids = vec![0, 1];
        let batch =
            heter_poisson(&g, &ids, &SamplerConfig::train(1.0, 10.0, true), SampleKey { seed: 5, round: 0 }).unwrap();
        let ga = batch.subgraphs.iter().find(|s| s.central == 0).unwrap();
        let gb = batch.subgraphs.iter().find(|s| s.central == 1).unwrap();
        assert_eq!(ga.peripherals, vec![1]);
        assert_eq!(ga.row(1), &[0.0, 0.0]);
        assert!(ga.nulled[1]);
        assert_eq!(ga.local_edges, vec![(1, 0)]);
        assert_eq!(gb.row(0), g.features(1));
        assert!(!gb.nulled[0]);

        let loose =
            heter_poisson(&g, &ids, &SamplerConfig::train(1.0, 10.0, false), SampleKey { seed: 5, round: 0 }).unwrap();
        let ga = loose.subgraphs.iter().find(|s| s.central == 0).unwrap();
        assert_eq!(ga.row(1), g.features(1));
        assert!(!ga.nulled[1]);
    }

    #[test]
    fn induced_edges_are_graph_edges() {
        let g = gen_erdos_renyi(40, 0.2, 2, 2, 8).unwrap();
        let ids: Vec<NodeId> = (0..40).collect();
        for round in 0..20 {
            let batch =
                heter_poisson(&g, &ids, &SamplerConfig::train(0.5, 3.0, true), SampleKey { seed: 2, round }).unwrap();
            for s in &batch.subgraphs {
                let members: Vec<NodeId> = std::iter::once(s.central).chain(s.peripherals.iter().copied()).collect();
                for &p in &s.peripherals {
                    assert!(g.has_edge(p, s.central));
                }
                for &(a, b) in &s.local_edges {
                    assert!(g.has_edge(members[a], members[b]));
                }
                let expected = members
                    .iter()
                    .flat_map(|&x| members.iter().map(move |&y| (x, y)))
                    .filter(|&(x, y)| g.has_edge(x, y))
                    .count();
                assert_eq!(expected, s.local_edges.len());
            }
        }
    }

    #[test]
    fn inference_mode_stays_inside_test_set() {
        let g = gen_erdos_renyi(60, 0.2, 2, 2, 8).unwrap();
        let test: Vec<NodeId> = (40..60).collect();
        let cfg = SamplerConfig {
            q_b: 1.0,
            m: 100.0,
            enforce_no_overlap: false,
            mode: SamplerMode::Inference { test_ids: test.clone() },
        };
        let batch = heter_poisson(&g, &test, &cfg, SampleKey { seed: 1, round: 0 }).unwrap();
        assert!(batch.subgraphs.iter().all(|s| s.peripherals.iter().all(|&p| p >= 40)));
        let n_in_test: usize = test.iter().map(|&i| g.in_edges(i).iter().filter(|&&j| j >= 40).count()).sum();
        let n_periph: usize = batch.subgraphs.iter().map(|s| s.peripherals.len()).sum();
        assert_eq!(n_in_test, n_periph);
        assert!(heter_poisson(&g, &[0], &cfg, SampleKey { seed: 1, round: 0 }).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let g = gen_erdos_renyi(50, 0.1, 2, 2, 8).unwrap();
        let ids: Vec<NodeId> = (0..50).collect();
        let cfg = SamplerConfig::train(0.3, 2.0, true);
        let a = heter_poisson(&g, &ids, &cfg, SampleKey { seed: 9, round: 4 }).unwrap();
        let b = heter_poisson(&g, &ids, &cfg, SampleKey { seed: 9, round: 4 }).unwrap();
        let c = heter_poisson(&g, &ids, &cfg, SampleKey { seed: 9, round: 5 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.central_set, c.central_set);
        assert!(a.to_json().unwrap().contains("central_set"));
    }

    #[test]
    fn rejects_bad_config() {
        let g = fan_in(2);
        assert!(
            heter_poisson(&g, &[0], &SamplerConfig::train(1.5, 1.0, true), SampleKey { seed: 0, round: 0 }).is_err()
        );
        assert!(
            heter_poisson(&g, &[0], &SamplerConfig::train(0.5, -1.0, true), SampleKey { seed: 0, round: 0 }).is_err()
        );
        assert!(
            heter_poisson(&g, &[9], &SamplerConfig::train(0.5, 1.0, true), SampleKey { seed: 0, round: 0 }).is_err()
        );
    }

    #[test]
    fn coupled_isolated_unsampled_node_changes_nothing() {
        let g = gen_erdos_renyi(20, 0.2, 2, 2, 3).unwrap();
        let z = AdjacentNode { feature: vec![1.0, 1.0], label: 0, out_targets: vec![], in_sources: vec![] };
        let cfg = SamplerConfig::train(0.4, 2.0, true);
        let mut seen_zero = false;
        let mut seen_central = false;
        for round in 0..200 {
            let c = coupled_adjacent_sample(&g, &z, &cfg, SampleKey { seed: 1, round }).unwrap();
            if c.prime.is_central(c.z) {
                seen_central = true;
                assert_eq!(c.k, 0.5);
                assert_eq!(c.prime.len(), c.star.len() + 1);
            } else {
                seen_zero = true;
                assert_eq!(c.k, 0.0);
                assert_eq!(c.star, c.prime);
            }
        }
        assert!(seen_zero && seen_central);
    }
}
