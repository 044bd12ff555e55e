//! Directed graph with per-node features and class labels.
//!
//! Edges are stored twice, as sorted out- and in-adjacency lists, and the two
//! views are kept mirror-consistent by construction: the only way to obtain a
//! [`Graph`] is through [`GraphBuilder`] or one of the mutating constructors,
//! all of which rebuild both lists. Self-loops are dropped and duplicate
//! edges collapse to one.

mod generate;
mod io;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};
use crate::{Error, Result};

pub use generate::{gen_erdos_renyi, gen_planted_classes, PlantedConfig};
pub use io::{load_graph, load_graph_with, save_graph, IngestOptions};

/// Dense 0-based node identifier.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    node_count: usize,
    dim: usize,
    num_classes: usize,
    /// Row-major `node_count × dim`.
    features: Vec<f64>,
    labels: Vec<usize>,
    out_edges: Vec<Vec<NodeId>>,
    in_edges: Vec<Vec<NodeId>>,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self, id: NodeId) -> &[f64] {
        &self.features[id * self.dim..(id + 1) * self.dim]
    }

    pub fn label(&self, id: NodeId) -> usize {
        self.labels[id]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn out_edges(&self, id: NodeId) -> &[NodeId] {
        &self.out_edges[id]
    }

    /// Sources of edges pointing at `id`; this is the neighbourhood NB(id).
    pub fn in_edges(&self, id: NodeId) -> &[NodeId] {
        &self.in_edges[id]
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.out_edges[id].len()
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.in_edges[id].len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.out_edges.get(src).is_some_and(|targets| targets.binary_search(&dst).is_ok())
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Iterate `(src, dst)` pairs in source-major order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out_edges.iter().enumerate().flat_map(|(src, targets)| targets.iter().map(move |&dst| (src, dst)))
    }

    /// New graph with one extra node (id = `node_count()`) whose out-edges
    /// point at `targets` and whose in-edges come from `sources`.
    pub fn add_node(&self, feature: &[f64], label: usize, targets: &[NodeId], sources: &[NodeId]) -> Result<Graph> {
        if feature.len() != self.dim {
            return Err(Error::Dimension(format!(
                "feature has length {}, graph dimension is {}",
                feature.len(),
                self.dim
            )));
        }
        check_distinct(targets, self.node_count, "target")?;
        check_distinct(sources, self.node_count, "source")?;
        let new_id = self.node_count;
        let mut builder = GraphBuilder::from_graph(self);
        builder.num_classes = builder.num_classes.max(label + 1);
        builder.push_node(feature, label)?;
        for &t in targets {
            builder.add_edge(new_id, t);
        }
        for &s in sources {
            builder.add_edge(s, new_id);
        }
        builder.build()
    }

    /// Add a node with out-edges only.
    pub fn add_node_with_out_edges(&self, feature: &[f64], label: usize, targets: &[NodeId]) -> Result<Graph> {
        self.add_node(feature, label, targets, &[])
    }

    /// Drop the highest-numbered node and every edge touching it.
    pub fn remove_last_node(&self) -> Result<Graph> {
        if self.node_count == 0 {
            return Err(Error::Integrity("cannot remove a node from an empty graph".into()));
        }
        let last = self.node_count - 1;
        let mut builder = GraphBuilder::new(self.dim, self.num_classes);
        for id in 0..last {
            builder.push_node(self.features(id), self.labels[id])?;
        }
        for (s, t) in self.edges() {
            if s != last && t != last {
                builder.add_edge(s, t);
            }
        }
        builder.build()
    }

    /// Graph with every edge mirrored.
    pub fn symmetrized(&self) -> Graph {
        let mut builder = GraphBuilder::from_graph(self);
        for (s, t) in self.edges() {
            builder.add_edge(t, s);
        }
        builder.build().expect("mirroring edges keeps ids valid")
    }

    /// Debug export as pretty JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Check the structural invariants. Graphs built through this module
    /// always pass; this exists for deserialized values and for tests.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count;
        if self.features.len() != n * self.dim || self.labels.len() != n {
            return Err(Error::Integrity("feature/label arrays do not match node count".into()));
        }
        if self.out_edges.len() != n || self.in_edges.len() != n {
            return Err(Error::Integrity("adjacency arrays do not match node count".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::Integrity(format!("label {bad} out of range for {} classes", self.num_classes)));
        }
        let mut mirrored = 0usize;
        for (src, targets) in self.out_edges.iter().enumerate() {
            if targets.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Integrity(format!("out-edges of {src} not strictly sorted")));
            }
            for &dst in targets {
                if dst == src {
                    return Err(Error::Integrity(format!("self-loop on {src}")));
                }
                if dst >= n || self.in_edges[dst].binary_search(&src).is_err() {
                    return Err(Error::Integrity(format!("edge {src}->{dst} not mirrored")));
                }
                mirrored += 1;
            }
        }
        let in_total: usize = self.in_edges.iter().map(Vec::len).sum();
        if in_total != mirrored {
            return Err(Error::Integrity("in-edges contain entries without out-edges".into()));
        }
        Ok(())
    }
}

fn check_distinct(ids: &[NodeId], node_count: usize, what: &str) -> Result<()> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Integrity(format!("duplicate {what} {}", w[0])));
    }
    if let Some(&bad) = sorted.iter().find(|&&id| id >= node_count) {
        return Err(Error::Integrity(format!("{what} {bad} does not exist")));
    }
    Ok(())
}

/// Incremental constructor; `build` sorts, dedups and mirrors adjacency.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    dim: usize,
    num_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    edges: Vec<(NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn new(dim: usize, num_classes: usize) -> Self {
        Self { dim, num_classes, features: Vec::new(), labels: Vec::new(), edges: Vec::new() }
    }

    pub fn from_graph(g: &Graph) -> Self {
        Self {
            dim: g.dim,
            num_classes: g.num_classes,
            features: g.features.clone(),
            labels: g.labels.clone(),
            edges: g.edges().collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Append a node; returns its id.
    pub fn push_node(&mut self, feature: &[f64], label: usize) -> Result<NodeId> {
        if feature.len() != self.dim {
            return Err(Error::Dimension(format!("feature row has length {}, expected {}", feature.len(), self.dim)));
        }
        self.features.extend_from_slice(feature);
        self.labels.push(label);
        Ok(self.labels.len() - 1)
    }

    /// Record `src -> dst`. Self-loops are ignored.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId) {
        if src != dst {
            self.edges.push((src, dst));
        }
    }

    pub fn build(self) -> Result<Graph> {
        let n = self.labels.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for &(s, t) in &self.edges {
            if s >= n || t >= n {
                return Err(Error::Integrity(format!("edge {s}->{t} references a node outside 0..{n}")));
            }
            out_edges[s].push(t);
            in_edges[t].push(s);
        }
        for list in out_edges.iter_mut().chain(in_edges.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let g = Graph {
            node_count: n,
            dim: self.dim,
            num_classes: self.num_classes,
            features: self.features,
            labels: self.labels,
            out_edges,
            in_edges,
        };
        if let Some(&bad) = g.labels.iter().find(|&&l| l >= g.num_classes) {
            return Err(Error::Integrity(format!("label {bad} out of range for {} classes", g.num_classes)));
        }
        Ok(g)
    }
}

/// Disjoint train/test partition of the node set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train_ids: Vec<NodeId>,
    pub test_ids: Vec<NodeId>,
}

impl NodeSplit {
    /// Membership mask over `0..node_count` for the test side.
    pub fn test_mask(&self, node_count: usize) -> Vec<bool> {
        mask(&self.test_ids, node_count)
    }

    pub fn train_mask(&self, node_count: usize) -> Vec<bool> {
        mask(&self.train_ids, node_count)
    }
}

pub(crate) fn mask(ids: &[NodeId], node_count: usize) -> Vec<bool> {
    let mut m = vec![false; node_count];
    for &id in ids {
        m[id] = true;
    }
    m
}

/// Uniformly random train/test split; `round(train_fraction · n)` nodes go
/// to the train side. Both id lists are returned sorted.
pub fn split_train_test(g: &Graph, train_fraction: f64, seed: u64) -> Result<NodeSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let n = g.node_count();
    let mut ids: Vec<NodeId> = (0..n).collect();
    ids.shuffle(&mut rng::stream(seed, Stream::Split));
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut train_ids = ids[..n_train].to_vec();
    let mut test_ids = ids[n_train..].to_vec();
    train_ids.sort_unstable();
    test_ids.sort_unstable();
    Ok(NodeSplit { train_ids, test_ids })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        let mut b = GraphBuilder::new(2, 2);
        b.push_node(&[0.0, 1.0], 0).unwrap();
        b.push_node(&[1.0, 0.0], 1).unwrap();
        b.push_node(&[1.0, 1.0], 0).unwrap();
        b.add_edge(0, 1);
        b.add_edge(1, 2);
        b.build().unwrap()
    }

    #[test]
    fn builder_mirrors_adjacency_and_drops_self_loops() {
        let mut b = GraphBuilder::new(1, 1);
        for _ in 0..3 {
            b.push_node(&[0.0], 0).unwrap();
        }
        b.add_edge(0, 1);
        b.add_edge(0, 1);
        b.add_edge(2, 2);
        b.add_edge(2, 0);
        let g = b.build().unwrap();
        g.validate().unwrap();
        assert_eq!(g.out_edges(0), &[1]);
        assert_eq!(g.in_edges(0), &[2]);
        assert_eq!(g.out_degree(2), 1);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn dangling_edge_is_integrity_error() {
        let mut b = GraphBuilder::new(1, 1);
        b.push_node(&[0.0], 0).unwrap();
        b.add_edge(0, 5);
        assert!(matches!(b.build(), Err(Error::Integrity(_))));
    }

    #[test]
    fn add_node_out_edges() {
        let g = path3();
        let g2 = g.add_node_with_out_edges(&[3.0, 3.0], 1, &[0, 2]).unwrap();
        g2.validate().unwrap();
        assert_eq!(g2.node_count(), 4);
        assert_eq!(g2.out_edges(3), &[0, 2]);
        assert_eq!(g2.in_edges(0), &[3]);
        assert_eq!(g2.in_edges(2), &[1, 3]);

        let isolated = g.add_node_with_out_edges(&[0.0, 0.0], 0, &[]).unwrap();
        assert_eq!(isolated.out_degree(3), 0);
        assert_eq!(isolated.in_degree(3), 0);
    }

    #[test]
    fn add_then_remove_round_trips() {
        let g = path3();
        let g2 = g.add_node(&[3.0, 3.0], 1, &[0, 1], &[2]).unwrap();
        assert_eq!(g2.remove_last_node().unwrap(), g);
    }

    #[test]
    fn add_node_rejects_duplicate_targets() {
        let g = path3();
        assert!(matches!(g.add_node_with_out_edges(&[0.0, 0.0], 0, &[1, 1]), Err(Error::Integrity(_))));
        assert!(matches!(g.add_node_with_out_edges(&[0.0, 0.0], 0, &[7]), Err(Error::Integrity(_))));
    }

    #[test]
    fn symmetrize_emits_both_directions() {
        let g = path3().symmetrized();
        g.validate().unwrap();
        assert!(g.has_edge(1, 0) && g.has_edge(0, 1) && g.has_edge(2, 1));
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let g = gen_erdos_renyi(100, 0.0, 1, 2, 1).unwrap();
        let s = split_train_test(&g, 0.8, 42).unwrap();
        assert_eq!(s.train_ids.len(), 80);
        assert_eq!(s.test_ids.len(), 20);
        let mut all: Vec<_> = s.train_ids.iter().chain(&s.test_ids).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, split_train_test(&g, 0.8, 42).unwrap());
        assert!(split_train_test(&g, 1.0, 42).is_err());
        assert!(split_train_test(&g, 0.0, 42).is_err());
    }

    #[test]
    fn different_seeds_give_different_splits() {
        // Two uniform 16/4 splits of 20 nodes coincide with probability
        // 1 / C(20, 4) ≈ 2e-4; over 20 seed pairs a collision is < 0.5%.
        let g = gen_erdos_renyi(20, 0.0, 1, 2, 1).unwrap();
        let distinct = (0..20)
            .filter(|&s| split_train_test(&g, 0.8, s).unwrap() != split_train_test(&g, 0.8, s + 1000).unwrap())
            .count();
        assert_eq!(distinct, 20);
    }
}
