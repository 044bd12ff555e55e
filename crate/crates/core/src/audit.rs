//! White-box privacy auditing with Dirac gradient canaries.
//!
//! Each audited iteration runs the ordinary training step up to the clipped
//! sum, draws a canary `g^c = [k, 0, …, 0]` with `k ~ ρ` at the audited
//! out-degree, and with probability `q_b` folds it into the sum before noise
//! is added. From the released `g^t` two scores are logged:
//! `O′ = ⟨g^t, g^c⟩` and `O* = ⟨g^t − g^c, g^c⟩`. A threshold attack that
//! separates `O′` (positives) from `O*` (negatives) gives an attack accuracy
//! and, through exact binomial confidence bounds on its error rates, an
//! empirical lower bound on ε.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::graph::{Graph, NodeSplit};
use crate::noise::NoiseKind;
use crate::rng::{self, Stream};
use crate::trainer::{
    resolve_sigma, train_with_sigma, ClippedSum, Epsilon, IterationHook, PrivateGradient, TrainConfig,
};
use crate::{accountant, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Out-degree whose ρ the canary norm is drawn from; defaults to the
    /// graph's largest out-degree.
    pub audited_dout: Option<usize>,
    /// Confidence of the error-rate bounds, in `(0, 1)`.
    pub confidence: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { audited_dout: None, confidence: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditObservations {
    pub o_star: Vec<f64>,
    pub o_prime: Vec<f64>,
    /// Canary norm `k` per trial.
    pub canary_norms: Vec<f64>,
    /// Whether the canary entered the sum in that trial.
    pub inserted: Vec<bool>,
    pub trials: usize,
}

impl AuditObservations {
    pub fn new(o_star: Vec<f64>, o_prime: Vec<f64>) -> Result<Self> {
        if o_star.is_empty() || o_prime.is_empty() {
            return Err(Error::InvalidParameter("audit needs observations on both sides".into()));
        }
        if o_star.iter().chain(&o_prime).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("audit scores must be finite".into()));
        }
        let trials = o_star.len().max(o_prime.len());
        Ok(Self { canary_norms: vec![], inserted: vec![], trials, o_star, o_prime })
    }

    /// `trial,score_star,score_prime,k`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "score_star", "score_prime", "k"])?;
        for (t, ((s, p), k)) in self.o_star.iter().zip(&self.o_prime).zip(&self.canary_norms).enumerate() {
            w.write_record([t.to_string(), s.to_string(), p.to_string(), k.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scores of one trial: `(⟨g^t − g^c, g^c⟩, ⟨g^t, g^c⟩)`.
pub fn canary_scores(released: &[f64], canary: &[f64]) -> Result<(f64, f64)> {
    if released.len() != canary.len() {
        return Err(Error::Dimension(format!("canary has {} entries, the gradient {}", canary.len(), released.len())));
    }
    let prime: f64 = released.iter().zip(canary).map(|(g, c)| g * c).sum();
    let norm2: f64 = canary.iter().map(|c| c * c).sum();
    Ok((prime - norm2, prime))
}

struct CanaryHook {
    seed: u64,
    q_b: f64,
    support: Vec<f64>,
    weights: Option<WeightedIndex<f64>>,
    current_k: f64,
    obs: AuditObservations,
}

impl IterationHook for CanaryHook {
    fn before_release(&mut self, t: u64, sum: &mut ClippedSum, _subgraphs: usize) {
        let mut rng = rng::keyed(self.seed, Stream::Audit, t, 0);
        let k = match &self.weights {
            Some(w) => self.support[w.sample(&mut rng)],
            None => 0.0,
        };
        let insert = rng.random::<f64>() < self.q_b;
        if insert {
            sum.add(&[k]);
        }
        self.current_k = k;
        self.obs.canary_norms.push(k);
        self.obs.inserted.push(insert);
    }

    fn after_release(&mut self, _t: u64, released: &PrivateGradient) {
        let k = self.current_k;
        let prime = released.flat[0] * k;
        self.obs.o_prime.push(prime);
        self.obs.o_star.push(prime - k * k);
        self.obs.trials += 1;
    }
}

/// An audited run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRun {
    pub observations: AuditObservations,
    pub sigma: f64,
    /// Accounted ε of the training configuration the noise was set for.
    pub epsilon: Epsilon,
    pub audited_dout: usize,
}

/// Run `trials` canary iterations of the training loop.
///
/// σ is resolved from `cfg` exactly as training would (fixed, or
/// calibrated for `cfg.iterations` steps); the audit then runs `trials`
/// iterations with that σ.
pub fn run_audit(
    g: &Graph,
    split: &NodeSplit,
    cfg: &TrainConfig,
    trials: u64,
    audit: &AuditConfig,
) -> Result<AuditRun> {
    cfg.validate()?;
    if cfg.noise != NoiseKind::Sml {
        return Err(Error::InvalidParameter("the canary audit is defined for SML noise".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one audit trial".into()));
    }
    if !(audit.confidence > 0.0 && audit.confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence must lie in (0, 1), got {}", audit.confidence)));
    }
    let (sigma, calibration) = resolve_sigma(cfg, g.node_count())?;
    let epsilon = match (sigma, calibration) {
        (0.0, _) => Epsilon::Infinite,
        (_, Some(c)) => Epsilon::Finite(c.epsilon),
        (s, None) => Epsilon::Finite(accountant::epsilon_for_sigma(&cfg.accountant(g.node_count()), s)?.epsilon),
    };
    let audited_dout = audit.audited_dout.unwrap_or_else(|| g.max_out_degree());
    let rho = cfg.accountant(g.node_count()).rho(audited_dout)?;
    let weights = WeightedIndex::new(rho.probs()).ok();
    let mut hook = CanaryHook {
        seed: cfg.seed,
        q_b: cfg.q_b,
        support: rho.support,
        weights,
        current_k: 0.0,
        obs: AuditObservations { o_star: vec![], o_prime: vec![], canary_norms: vec![], inserted: vec![], trials: 0 },
    };
    let run_cfg = TrainConfig { iterations: trials, ..cfg.clone() };
    train_with_sigma(g, &split.train_ids, &run_cfg, sigma, &mut hook)?;
    Ok(AuditRun { observations: hook.obs, sigma, epsilon, audited_dout })
}

/// Best threshold attack: scores above the threshold are called `O′`.
/// Returns `((TPR + TNR) / 2, threshold)` at the best threshold.
pub fn attack_accuracy(obs: &AuditObservations) -> Result<(f64, f64)> {
    let r = sweep(obs)?;
    Ok((r.accuracy, r.threshold))
}

struct Sweep {
    accuracy: f64,
    threshold: f64,
    false_pos: usize,
    false_neg: usize,
    n_pos: usize,
    n_neg: usize,
}

fn sweep(obs: &AuditObservations) -> Result<Sweep> {
    let (n_pos, n_neg) = (obs.o_prime.len(), obs.o_star.len());
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidParameter("audit needs observations on both sides".into()));
    }
    // (score, is_positive), ascending.
    let mut pooled: Vec<(f64, bool)> =
        obs.o_prime.iter().map(|&s| (s, true)).chain(obs.o_star.iter().map(|&s| (s, false))).collect();
    if pooled.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::Numeric("audit scores must be finite".into()));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Threshold below everything: all called positive.
    let mut best = Sweep { accuracy: 0.5, threshold: f64::NEG_INFINITY, false_pos: n_neg, false_neg: 0, n_pos, n_neg };
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut i = 0;
    while i < pooled.len() {
        let s = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == s {
            if pooled[i].1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
        let tpr = (n_pos - pos_below) as f64 / n_pos as f64;
        let tnr = neg_below as f64 / n_neg as f64;
        let acc = 0.5 * (tpr + tnr);
        if acc > best.accuracy {
            best =
                Sweep { accuracy: acc, threshold: s, false_pos: n_neg - neg_below, false_neg: pos_below, n_pos, n_neg };
        }
    }
    Ok(best)
}

/// One-sided Clopper–Pearson upper bound on a binomial rate.
pub fn clopper_pearson_upper(failures: usize, n: usize, confidence: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("confidence bound needs at least one trial".into()));
    }
    if failures >= n {
        return Ok(1.0);
    }
    let beta = Beta::new(failures as f64 + 1.0, (n - failures) as f64)
        .map_err(|e| Error::Numeric(format!("beta quantile: {e}")))?;
    Ok(beta.inverse_cdf(confidence))
}

/// Empirical ε at the best attack threshold from upper confidence bounds
/// on its false-positive and false-negative rates, floored at 0.
pub fn empirical_epsilon(obs: &AuditObservations, delta: f64, confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let s = sweep(obs)?;
    let fpr = clopper_pearson_upper(s.false_pos, s.n_neg, confidence)?;
    let fnr = clopper_pearson_upper(s.false_neg, s.n_pos, confidence)?;
    let side = |num: f64, den: f64| if num > 0.0 && den > 0.0 { (num / den).ln() } else { 0.0 };
    Ok(side(1.0 - delta - fpr, fnr).max(side(1.0 - delta - fnr, fpr)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub best_attack_accuracy: f64,
    pub empirical_eps: f64,
    pub threshold: f64,
    pub confidence: f64,
    pub theoretical_eps: Epsilon,
    pub sigma: f64,
    pub trials: usize,
    pub audited_dout: usize,
}

impl AuditResult {
    pub fn from_run(run: &AuditRun, delta: f64, confidence: f64) -> Result<Self> {
        let (acc, threshold) = attack_accuracy(&run.observations)?;
        Ok(Self {
            best_attack_accuracy: acc,
            empirical_eps: empirical_epsilon(&run.observations, delta, confidence)?,
            threshold,
            confidence,
            theoretical_eps: run.epsilon,
            sigma: run.sigma,
            trials: run.observations.trials,
            audited_dout: run.audited_dout,
        })
    }
}
