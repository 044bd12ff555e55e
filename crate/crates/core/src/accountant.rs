//! Rényi-DP accounting for HeterPoisson sampling with spherical noise.
//!
//! For a differing node `z` with whole-graph out-degree `D`, the distance
//! between the clipped gradient sums of two adjacent runs is a random
//! sensitivity index `k`:
//!
//! - with probability `q_b`, `z` is central and `k = 0.5` (one extra clipped
//!   gradient of norm at most 0.5);
//! - otherwise `k` out-neighbours of `z` are central and sample `z`, so
//!   `k ~ Binomial(D, q_b·min(1, M/D))` sub-graphs differ, each by at most 1.
//!
//! The one-step Rényi divergence of the noisy sum is bounded through the
//! mixture `E_{k~ρ}[B_k]`, where for SML noise
//! `B_k = α·e^{√2(α−1)k/σ}/(2α−1) + 1/2` bounds `e^{(α−1)·D_α}` of two
//! Laplace laws `k` apart. `T` steps compose linearly, the worst out-degree
//! is taken over `0..=max_dout`, and the RDP curve is converted to
//! `(ε, δ)`-DP and minimised over a grid of orders α.
//!
//! Every sum is evaluated in log space so that out-degrees in the tens of
//! thousands neither overflow nor underflow.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::noise::NoiseKind;
use crate::sampler::inclusion_probability;
use crate::{par, Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Terms this far (in nats) below the running maximum are dropped once the
/// remaining tail is provably geometric.
const PRUNE_NATS: f64 = 40.0;

/// Probability mass function of the sensitivity index `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoPmf {
    pub support: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl RhoPmf {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|lp| lp.exp()).collect()
    }

    pub fn total(&self) -> f64 {
        self.log_probs.iter().map(|lp| lp.exp()).sum()
    }

    /// Probability of the support point `k` (0 if absent).
    pub fn prob(&self, k: f64) -> f64 {
        self.support.iter().zip(&self.log_probs).filter(|(s, _)| **s == k).map(|(_, lp)| lp.exp()).sum()
    }
}

fn check_rates(q_b: f64, m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q_b) {
        return Err(Error::InvalidParameter(format!("q_b must lie in [0, 1], got {q_b}")));
    }
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!("M must be finite and >= 0, got {m}")));
    }
    Ok(())
}

/// Per-neighbour success probability: an out-neighbour of `z` is central
/// with probability `q_b` and then keeps `z` with `min(1, M/D)`.
pub fn neighbor_success_probability(d_out: usize, q_b: f64, m: f64) -> f64 {
    if d_out == 0 {
        0.0
    } else {
        q_b * inclusion_probability(d_out, m)
    }
}

/// `ln Bi(k; n, p)` with the `p ∈ {0, 1}` edge cases handled exactly.
fn ln_binomial_pmf(k: u64, n: u64, p: f64, ln_choose: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// ρ when central/peripheral overlap is enforced: mass `(1−q_b)·Bi(k)` on
/// `k = 0..=D` and `q_b` on `k = 0.5`. For `D = 0` this is
/// `{0: 1−q_b, 0.5: q_b}`.
pub fn rho_pmf(d_out: usize, q_b: f64, m: f64) -> Result<RhoPmf> {
    check_rates(q_b, m)?;
    let p = neighbor_success_probability(d_out, q_b, m);
    let n = d_out as u64;
    let ln_miss = (-q_b).ln_1p();
    let mut support = Vec::with_capacity(d_out + 2);
    let mut log_probs = Vec::with_capacity(d_out + 2);
    for k in 0..=n {
        support.push(k as f64);
        log_probs.push(ln_miss + ln_binomial_pmf(k, n, p, ln_choose(n, k)));
    }
    support.push(0.5);
    log_probs.push(ln_or_neg_inf(q_b));
    Ok(RhoPmf { support, log_probs })
}

/// ρ without overlap enforcement: `(1−q_b)·Bi(k)` on integer `k` and
/// `q_b·Bi(k)` on `k + 0.5`, since a central `z` may also sit in other
/// sub-graphs as a live peripheral.
pub fn rho_pmf_no_enforce(d_out: usize, q_b: f64, m: f64) -> Result<RhoPmf> {
    check_rates(q_b, m)?;
    let p = neighbor_success_probability(d_out, q_b, m);
    let n = d_out as u64;
    let ln_miss = (-q_b).ln_1p();
    let ln_hit = ln_or_neg_inf(q_b);
    let mut support = Vec::with_capacity(2 * d_out + 2);
    let mut log_probs = Vec::with_capacity(2 * d_out + 2);
    for k in 0..=n {
        let lb = ln_binomial_pmf(k, n, p, ln_choose(n, k));
        support.push(k as f64);
        log_probs.push(ln_miss + lb);
        support.push(k as f64 + 0.5);
        log_probs.push(ln_hit + lb);
    }
    Ok(RhoPmf { support, log_probs })
}

fn check_order(alpha: f64, sigma: f64) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be finite and > 1, got {alpha}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    Ok(())
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Exact `D_α(Lap(k, σ) ‖ Lap(0, σ))` for univariate Laplace laws with
/// standard deviation `σ`. Symmetric in the order of its arguments.
pub fn laplace_renyi_divergence(k: f64, alpha: f64, sigma: f64) -> Result<f64> {
    check_order(alpha, sigma)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    Ok(ln_exact_laplace(k.abs(), alpha, sigma) / (alpha - 1.0))
}

/// `ln` of `α/(2α−1)·e^{√2(α−1)k/σ} + (α−1)/(2α−1)·e^{−√2αk/σ}`.
fn ln_exact_laplace(k: f64, alpha: f64, sigma: f64) -> f64 {
    let denom = 2.0 * alpha - 1.0;
    log_add_exp(
        (alpha / denom).ln() + SQRT_2 * (alpha - 1.0) * k / sigma,
        ((alpha - 1.0) / denom).ln() - SQRT_2 * alpha * k / sigma,
    )
}

/// `ln B_k` with `B_k = α·e^{√2(α−1)k/σ}/(2α−1) + 1/2`.
fn ln_bk_bound(k: f64, alpha: f64, sigma: f64) -> f64 {
    log_add_exp((alpha / (2.0 * alpha - 1.0)).ln() + SQRT_2 * (alpha - 1.0) * k / sigma, -std::f64::consts::LN_2)
}

/// The SML bound `B_k`, an upper bound on `e^{(α−1)·D_α}` of two Laplace
/// laws `k` apart.
pub fn bk_sml(k: f64, alpha: f64, sigma: f64) -> Result<f64> {
    check_order(alpha, sigma)?;
    let v = ln_bk_bound(k, alpha, sigma).exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("B_k overflows at k={k}, alpha={alpha}, sigma={sigma}")))
    }
}

/// `ln B_k` (never overflows).
pub fn ln_bk_sml(k: f64, alpha: f64, sigma: f64) -> Result<f64> {
    check_order(alpha, sigma)?;
    Ok(ln_bk_bound(k, alpha, sigma))
}

/// The Gaussian analogue `e^{α(α−1)k²/(2σ²)}`, returned in log form.
pub fn ln_bk_gaussian(k: f64, alpha: f64, sigma: f64) -> Result<f64> {
    check_order(alpha, sigma)?;
    Ok(alpha * (alpha - 1.0) * k * k / (2.0 * sigma * sigma))
}

/// Which per-`k` factor the accountant averages over ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceForm {
    /// The closed-form bound `B_k` (SML) or `e^{α(α−1)k²/(2σ²)}` (Gaussian).
    Bound,
    /// The exact Laplace divergence term instead of `B_k`; tighter, and
    /// still valid since `B_k` only upper-bounds it. SML only.
    ExactLaplace,
}

/// Out-degrees the worst case is searched over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoutGrid {
    /// Every `D` in `0..=max_dout`.
    Exact,
    /// Roughly `points` log-spaced values plus both endpoints. Heuristic:
    /// the maximum over a subset can only under-report γ.
    Logarithmic { points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountantConfig {
    pub q_b: f64,
    pub m: f64,
    /// Number of composed iterations `T`.
    pub iterations: u64,
    pub delta: f64,
    pub alpha_grid: Vec<f64>,
    /// Largest out-degree the differing node may have, normally `|𝒢| − 1`.
    pub max_dout: usize,
    pub enforce_no_overlap: bool,
    pub noise: NoiseKind,
    pub form: DivergenceForm,
    pub dout_grid: DoutGrid,
}

/// Orders `1.1, 1.2, …, 10.0`.
pub fn default_alpha_grid() -> Vec<f64> {
    (11..=100).map(|i| i as f64 / 10.0).collect()
}

impl AccountantConfig {
    /// SML noise, enforced overlap, exact `D` sweep, default α grid and
    /// `max_dout = node_count − 1`.
    pub fn new(q_b: f64, m: f64, iterations: u64, delta: f64, node_count: usize) -> Self {
        Self {
            q_b,
            m,
            iterations,
            delta,
            alpha_grid: default_alpha_grid(),
            max_dout: node_count.saturating_sub(1),
            enforce_no_overlap: true,
            noise: NoiseKind::Sml,
            form: DivergenceForm::Bound,
            dout_grid: DoutGrid::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rates(self.q_b, self.m)?;
        if !(self.q_b > 0.0) {
            return Err(Error::InvalidParameter("q_b must be > 0 for accounting".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidParameter("alpha grid is empty".into()));
        }
        if let Some(a) = self.alpha_grid.iter().find(|&&a| !(a > 1.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha grid value {a} is not > 1")));
        }
        if self.form == DivergenceForm::ExactLaplace && self.noise != NoiseKind::Sml {
            return Err(Error::InvalidParameter("the exact Laplace form applies to SML noise only".into()));
        }
        Ok(())
    }

    pub fn is_heuristic(&self) -> bool {
        matches!(self.dout_grid, DoutGrid::Logarithmic { .. })
    }

    fn dout_values(&self) -> Vec<usize> {
        match self.dout_grid {
            DoutGrid::Exact => (0..=self.max_dout).collect(),
            DoutGrid::Logarithmic { points } => {
                let mut v = vec![0, self.max_dout];
                let top = (self.max_dout.max(1) as f64).ln();
                let points = points.max(2);
                for i in 0..points {
                    v.push((top * i as f64 / (points - 1) as f64).exp().round() as usize);
                }
                v.retain(|&d| d <= self.max_dout);
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }

    /// ρ for out-degree `d` under this configuration's overlap rule.
    pub fn rho(&self, d_out: usize) -> Result<RhoPmf> {
        if self.enforce_no_overlap {
            rho_pmf(d_out, self.q_b, self.m)
        } else {
            rho_pmf_no_enforce(d_out, self.q_b, self.m)
        }
    }
}

/// Running log-sum-exp with a fixed accumulation order.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.sum += (t - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `ln n!` for `n = 0..=max`.
fn ln_factorial_table(max: usize) -> Vec<f64> {
    (0..=max as u64).map(ln_factorial).collect()
}

/// Evaluator of `ln E_{k~ρ(D)}[B_k]` for one `(α, σ)`.
#[derive(Debug, Clone, Copy)]
struct MixtureTerm<'a> {
    ln_fact: &'a [f64],
    kind: NoiseKind,
    form: DivergenceForm,
    alpha: f64,
    sigma: f64,
    q_b: f64,
    m: f64,
    enforce: bool,
}

impl<'a> MixtureTerm<'a> {
    fn new(cfg: &AccountantConfig, ln_fact: &'a [f64], alpha: f64, sigma: f64) -> Self {
        Self {
            ln_fact,
            kind: cfg.noise,
            form: cfg.form,
            alpha,
            sigma,
            q_b: cfg.q_b,
            m: cfg.m,
            enforce: cfg.enforce_no_overlap,
        }
    }

    fn ln_b(&self, k: f64) -> f64 {
        match (self.kind, self.form) {
            (NoiseKind::Gaussian, _) => self.alpha * (self.alpha - 1.0) * k * k / (2.0 * self.sigma * self.sigma),
            (NoiseKind::Sml, DivergenceForm::Bound) => ln_bk_bound(k, self.alpha, self.sigma),
            (NoiseKind::Sml, DivergenceForm::ExactLaplace) => {
                if k == 0.0 {
                    0.0
                } else {
                    ln_exact_laplace(k, self.alpha, self.sigma)
                }
            }
        }
    }

    /// Upper bound on `ln_b(k+1) − ln_b(k)` valid for every `k ≥ 0`, if one
    /// exists.
    fn step_bound(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::Sml => Some(SQRT_2 * (self.alpha - 1.0) / self.sigma),
            NoiseKind::Gaussian => None,
        }
    }

    fn ln_expectation(&self, d_out: usize) -> f64 {
        let ln_miss = (-self.q_b).ln_1p();
        let ln_hit = ln_or_neg_inf(self.q_b);
        let mut acc = LogSum::new();
        if self.enforce || d_out == 0 {
            acc.add(ln_hit + self.ln_b(0.5));
        }
        let p = neighbor_success_probability(d_out, self.q_b, self.m);
        let n = d_out as u64;
        let chain = |acc: &mut LogSum, k: u64, lb: f64| -> (f64, f64) {
            let a = ln_miss + lb + self.ln_b(k as f64);
            acc.add(a);
            let b = if self.enforce || d_out == 0 {
                f64::NEG_INFINITY
            } else {
                let t = ln_hit + lb + self.ln_b(k as f64 + 0.5);
                acc.add(t);
                t
            };
            (a, b)
        };
        if p <= 0.0 || p >= 1.0 {
            let k = if p >= 1.0 { n } else { 0 };
            chain(&mut acc, k, 0.0);
            return acc.value();
        }
        let ln_odds = p.ln() - (-p).ln_1p();
        let ln_fail_all = n as f64 * (-p).ln_1p();
        let step = self.step_bound();
        let lf = self.ln_fact;
        let ln_n_fact = lf[d_out];
        for k in 0..=n {
            let lb = ln_n_fact - lf[k as usize] - lf[(n - k) as usize] + k as f64 * ln_odds + ln_fail_all;
            let (a, b) = chain(&mut acc, k, lb);
            if let Some(step) = step {
                // Binomial log-ratio r_k = ln((n−k)/(k+1)) + ln(p/(1−p)) falls
                // with k. Once r_k + step < −ln 2 every later term is at most
                // half the previous one, so the tail is below the current term.
                if k < n {
                    let r = ((n - k) as f64 / (k + 1) as f64).ln() + ln_odds;
                    if r + step < -std::f64::consts::LN_2 && a.max(b) < acc.max - PRUNE_NATS {
                        break;
                    }
                }
            }
        }
        acc.value()
    }
}

/// `ln E_{k~ρ(D)}[B_k]` for a single out-degree.
pub fn ln_expected_bk(cfg: &AccountantConfig, d_out: usize, alpha: f64, sigma: f64) -> Result<f64> {
    cfg.validate()?;
    check_order(alpha, sigma)?;
    let table = ln_factorial_table(d_out);
    Ok(MixtureTerm::new(cfg, &table, alpha, sigma).ln_expectation(d_out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBound {
    /// Composed RDP bound γ over all `T` iterations.
    pub gamma: f64,
    pub alpha: f64,
    /// Out-degree attaining the maximum (smallest on ties).
    pub argmax_dout: usize,
}

/// Composed `(α, γ)`-RDP bound:
/// `γ = T/(α−1) · max_D ln E_{k~ρ(D)}[B_k]`.
pub fn rdp_gamma(cfg: &AccountantConfig, sigma: f64, alpha: f64) -> Result<GammaBound> {
    cfg.validate()?;
    check_order(alpha, sigma)?;
    if cfg.iterations == 0 {
        return Ok(GammaBound { gamma: 0.0, alpha, argmax_dout: 0 });
    }
    let table = ln_factorial_table(cfg.max_dout);
    let term = MixtureTerm::new(cfg, &table, alpha, sigma);
    let douts = cfg.dout_values();
    let values = par::map(&douts, |&d| term.ln_expectation(d));
    let (best, &worst) = values
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.total_cmp(b).then(ib.cmp(ia)))
        .expect("dout grid is never empty");
    let gamma = cfg.iterations as f64 / (alpha - 1.0) * worst;
    if !gamma.is_finite() {
        return Err(Error::Numeric(format!("gamma is not finite at sigma={sigma}, alpha={alpha}")));
    }
    Ok(GammaBound { gamma, alpha, argmax_dout: douts[best] })
}

/// RDP to `(ε, δ)`-DP: `ε = γ + ln((α−1)/α) − (ln δ + ln α)/(α−1)`, with
/// `γ` already composed over all iterations.
pub fn rdp_to_dp(gamma: f64, alpha: f64, delta: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must be > 1, got {alpha}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(gamma + ((alpha - 1.0) / alpha).ln() - (delta.ln() + alpha.ln()) / (alpha - 1.0))
}

/// Accounted privacy at a fixed noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub argmax_dout: usize,
}

/// `(ε, δ)` at noise `sigma`, minimised over the α grid.
pub fn epsilon_for_sigma(cfg: &AccountantConfig, sigma: f64) -> Result<Accounting> {
    cfg.validate()?;
    let mut best: Option<Accounting> = None;
    for &alpha in &cfg.alpha_grid {
        let g = rdp_gamma(cfg, sigma, alpha)?;
        let epsilon = rdp_to_dp(g.gamma, alpha, cfg.delta)?;
        if best.is_none_or(|b| epsilon < b.epsilon) {
            best = Some(Accounting {
                sigma,
                epsilon,
                delta: cfg.delta,
                alpha,
                gamma: g.gamma,
                argmax_dout: g.argmax_dout,
            });
        }
    }
    Ok(best.expect("alpha grid validated non-empty"))
}

/// Result of [`calibrate_sigma`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub sigma: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub argmax_dout: usize,
    /// Total mass of ρ at the worst out-degree; 1 up to rounding.
    pub pmf_checksum: f64,
    /// Set when the out-degree sweep used the logarithmic grid.
    pub heuristic: bool,
}

pub const SIGMA_MIN: f64 = 1e-3;
pub const SIGMA_MAX: f64 = 1e6;
const RELATIVE_TOLERANCE: f64 = 1e-3;

/// Incremental feasibility checks for calibration: remembers, per order,
/// the out-degree that last broke the budget and tries it first.
struct Feasibility<'a> {
    cfg: &'a AccountantConfig,
    douts: Vec<usize>,
    ln_fact: Vec<f64>,
    worst_hint: Vec<usize>,
    alpha_order: Vec<usize>,
}

impl<'a> Feasibility<'a> {
    fn new(cfg: &'a AccountantConfig) -> Self {
        let douts = cfg.dout_values();
        let n_alpha = cfg.alpha_grid.len();
        Self {
            cfg,
            douts,
            ln_fact: ln_factorial_table(cfg.max_dout),
            worst_hint: vec![0; n_alpha],
            alpha_order: (0..n_alpha).collect(),
        }
    }

    /// Largest allowed `max_D ln E[B_k]` for order `alpha` at the target.
    fn budget(&self, eps: f64, alpha: f64) -> f64 {
        let slack = eps - ((alpha - 1.0) / alpha).ln() + (self.cfg.delta.ln() + alpha.ln()) / (alpha - 1.0);
        slack * (alpha - 1.0) / self.cfg.iterations as f64
    }

    fn feasible(&mut self, eps: f64, sigma: f64) -> bool {
        if self.cfg.iterations == 0 {
            return self.cfg.alpha_grid.iter().any(|&a| rdp_to_dp(0.0, a, self.cfg.delta).is_ok_and(|e| e <= eps));
        }
        for pos in 0..self.alpha_order.len() {
            let ai = self.alpha_order[pos];
            let alpha = self.cfg.alpha_grid[ai];
            let budget = self.budget(eps, alpha);
            let term = MixtureTerm::new(self.cfg, &self.ln_fact, alpha, sigma);
            if term.ln_expectation(self.worst_hint[ai]) > budget {
                continue;
            }
            let values = par::map(&self.douts, |&d| term.ln_expectation(d));
            match values.iter().position(|&v| v > budget) {
                Some(i) => self.worst_hint[ai] = self.douts[i],
                None => {
                    // Try the successful order first next time.
                    self.alpha_order[..=pos].rotate_right(1);
                    return true;
                }
            }
        }
        false
    }
}

/// Smallest σ (to relative tolerance 1e-3) whose accounted ε, minimised
/// over the α grid, is at most `eps_target`.
///
/// Brackets geometrically from σ = 1, then bisects in log space. Fails if
/// the target is not met anywhere in `[1e-3, 1e6]`.
pub fn calibrate_sigma(eps_target: f64, cfg: &AccountantConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    if !(eps_target > 0.0) || !eps_target.is_finite() {
        return Err(Error::Calibration(format!("target epsilon must be finite and > 0, got {eps_target}")));
    }
    let mut check = Feasibility::new(cfg);
    let (mut lo, mut hi);
    if check.feasible(eps_target, 1.0) {
        hi = 1.0;
        lo = 0.5;
        while check.feasible(eps_target, lo) {
            hi = lo;
            if lo <= SIGMA_MIN {
                return finish(cfg, SIGMA_MIN);
            }
            lo = (lo / 2.0).max(SIGMA_MIN);
        }
    } else {
        lo = 1.0;
        hi = 2.0;
        while !check.feasible(eps_target, hi) {
            lo = hi;
            if hi >= SIGMA_MAX {
                return Err(Error::Calibration(format!(
                    "epsilon {eps_target} is unreachable for sigma <= {SIGMA_MAX:e}"
                )));
            }
            hi = (hi * 2.0).min(SIGMA_MAX);
        }
    }
    while hi / lo > 1.0 + RELATIVE_TOLERANCE {
        let mid = (lo * hi).sqrt();
        if check.feasible(eps_target, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    finish(cfg, hi)
}

fn finish(cfg: &AccountantConfig, sigma: f64) -> Result<CalibrationReport> {
    let acc = epsilon_for_sigma(cfg, sigma)?;
    let pmf_checksum = cfg.rho(acc.argmax_dout)?.total();
    Ok(CalibrationReport {
        sigma,
        alpha: acc.alpha,
        gamma: acc.gamma,
        epsilon: acc.epsilon,
        delta: cfg.delta,
        argmax_dout: acc.argmax_dout,
        pmf_checksum,
        heuristic: cfg.is_heuristic(),
    })
}

/// Gaussian σ that gives the same exponent in `A_k = Pr(k)·B_k` as SML at
/// `sigma_sml`: solves `α(α−1)k²/(2σ_G²) = √2(α−1)k/σ_sml`.
pub fn gaussian_sigma_to_match_ak(k: f64, alpha: f64, sigma_sml: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("k must be > 0, got {k}")));
    }
    check_order(alpha, sigma_sml)?;
    Ok((alpha * k * sigma_sml / (2.0 * SQRT_2)).sqrt())
}

/// Ceiling on per-class precision of any classifier that reads
/// `(ε, δ)`-private per-node embeddings over `C` balanced classes:
/// `(e^ε + δ(C−1)) / (C − 1 + e^ε)`.
pub fn precision_upper_bound(eps: f64, delta: f64, classes: usize) -> Result<f64> {
    if classes < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {classes}")));
    }
    if !(eps >= 0.0) || !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("need eps >= 0 and 0 <= delta < 1, got ({eps}, {delta})")));
    }
    let c1 = (classes - 1) as f64;
    let e = eps.exp();
    Ok(((e + delta * c1) / (c1 + e)).min(1.0))
}
