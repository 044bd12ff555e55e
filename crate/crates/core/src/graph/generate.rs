use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphBuilder};
use crate::rng::{self, Stream};
use crate::{Error, Result};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Erdős–Rényi directed graph: each ordered pair `(i, j)`, `i ≠ j`, gets the
/// edge `i -> j` independently with probability `p`. Features are standard
/// normal, labels uniform over `0..classes`.
pub fn gen_erdos_renyi(n: usize, p: f64, d: usize, classes: usize, seed: u64) -> Result<Graph> {
    check_probability("p", p)?;
    if n == 0 || classes == 0 {
        return Err(Error::InvalidParameter("n and classes must be at least 1".into()));
    }
    let mut rng = rng::stream(seed, Stream::Graph);
    let mut builder = GraphBuilder::new(d, classes);
    let mut row = vec![0.0; d];
    for _ in 0..n {
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        builder.push_node(&row, rng.random_range(0..classes))?;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                builder.add_edge(i, j);
            }
        }
    }
    builder.build()
}

/// Parameters for [`gen_planted_classes`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    /// Euclidean distance between any two class means.
    pub separation: f64,
    pub seed: u64,
}

/// Planted-partition graph with Gaussian class clusters.
///
/// Class `c` has mean `separation/√2 · e_c`, so every pair of means is exactly
/// `separation` apart; node features are `N(μ_c, I)`. Edges within a class
/// appear with probability `p_intra`, across classes with `p_inter`. Labels
/// are balanced (round-robin, then shuffled).
pub fn gen_planted_classes(cfg: &PlantedConfig) -> Result<Graph> {
    check_probability("p_intra", cfg.p_intra)?;
    check_probability("p_inter", cfg.p_inter)?;
    if cfg.p_inter > cfg.p_intra {
        return Err(Error::InvalidParameter(format!(
            "p_inter ({}) must not exceed p_intra ({})",
            cfg.p_inter, cfg.p_intra
        )));
    }
    if cfg.n == 0 || cfg.classes == 0 {
        return Err(Error::InvalidParameter("n and classes must be at least 1".into()));
    }
    if cfg.separation != 0.0 && cfg.d < cfg.classes {
        return Err(Error::InvalidParameter(format!(
            "separated class means need d >= classes ({} < {})",
            cfg.d, cfg.classes
        )));
    }
    if !(cfg.separation >= 0.0) {
        return Err(Error::InvalidParameter("separation must be non-negative".into()));
    }
    let mut rng = rng::stream(cfg.seed, Stream::Graph);
    let mut labels: Vec<usize> = (0..cfg.n).map(|i| i % cfg.classes).collect();
    labels.shuffle(&mut rng);

    let offset = cfg.separation / std::f64::consts::SQRT_2;
    let mut builder = GraphBuilder::new(cfg.d, cfg.classes);
    let mut row = vec![0.0; cfg.d];
    for &label in &labels {
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        if offset != 0.0 {
            row[label] += offset;
        }
        builder.push_node(&row, label)?;
    }
    for i in 0..cfg.n {
        for j in 0..cfg.n {
            if i == j {
                continue;
            }
            let p = if labels[i] == labels[j] { cfg.p_intra } else { cfg.p_inter };
            if rng.random_bool(p) {
                builder.add_edge(i, j);
            }
        }
    }
    builder.build()
}
