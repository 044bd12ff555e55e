//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "nodedp", version, about = "Node-level differentially private GNN training")]
pub struct Cli {
    /// Directory for every output file and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Root seed; every random component draws from a named sub-stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON object of default flag values; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic graph.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Calibrate σ for a target (ε, δ).
    #[command(args_override_self = true)]
    Calibrate(CalibrateArgs),
    /// Train privately and evaluate on the held-out nodes.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Evaluate a saved model.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Audit a configuration with gradient canaries.
    #[command(args_override_self = true)]
    Audit(AuditArgs),
    /// Measure how one node's out-degree moves the full-graph gradient.
    #[command(args_override_self = true)]
    Impact(ImpactArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Calibrate(_) => "calibrate",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Audit(_) => "audit",
            Command::Impact(_) => "impact",
        }
    }
}

pub const SUBCOMMANDS: [&str; 6] = ["gen", "calibrate", "train", "eval", "audit", "impact"];

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not a probability in [0, 1]"))
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("{p} must lie strictly between 0 and 1"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{x} must be finite and >= 0"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphModel {
    /// Erdős–Rényi with random labels.
    Er,
    /// Class-planted graph with shifted class means.
    Planted,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    Sml,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchArg {
    Gcn,
    Gin,
    Sage,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "er")]
    pub model: GraphModel,
    #[arg(long)]
    pub n: usize,
    /// Edge probability (Erdős–Rényi).
    #[arg(long, default_value = "0.1", value_parser = probability)]
    pub p: f64,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Same-class edge probability (planted).
    #[arg(long, default_value = "0.01", value_parser = probability)]
    pub p_intra: f64,
    /// Cross-class edge probability (planted).
    #[arg(long, default_value = "0.002", value_parser = probability)]
    pub p_inter: f64,
    /// Distance between class means (planted).
    #[arg(long, default_value = "5", value_parser = non_negative)]
    pub separation: f64,
}

/// Accountant knobs shared by `calibrate`, `train` and `audit`.
#[derive(Debug, Args, Serialize)]
pub struct AccountingArgs {
    /// Base sampling rate of central nodes.
    #[arg(long, default_value = "0.05", value_parser = probability)]
    pub qb: f64,
    /// Neighbour-sampling multiplier M.
    #[arg(long, default_value = "2", value_parser = non_negative)]
    pub m: f64,
    /// Iterations (default: ⌈9/q_b⌉).
    #[arg(long)]
    pub t: Option<u64>,
    /// Failure probability (default: |V|^-1.1).
    #[arg(long, value_parser = open_unit)]
    pub delta: Option<f64>,
    /// Keep central nodes live when they are also sampled as peripherals.
    #[arg(long)]
    pub no_overlap_enforce: bool,
    #[arg(long, value_enum, default_value = "sml")]
    pub noise: NoiseArg,
    /// Account with the exact Laplace divergence instead of its closed-form bound.
    #[arg(long)]
    pub exact_divergence: bool,
    /// Sweep out-degrees on a logarithmic grid of this many points (heuristic).
    #[arg(long)]
    pub log_grid: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// Target ε.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: f64,
    #[command(flatten)]
    pub accounting: AccountingArgs,
    /// Largest out-degree of the differing node.
    #[arg(long)]
    pub max_dout: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphInput {
    /// Node CSV: `id,label,f_1..f_d`.
    #[arg(long)]
    pub nodes: PathBuf,
    /// Edge list: `src dst` per line.
    #[arg(long)]
    pub edges: PathBuf,
    /// Add the reverse of every edge at ingest.
    #[arg(long)]
    pub symmetrize: bool,
    /// Fraction of nodes used for training.
    #[arg(long, default_value = "0.8", value_parser = open_unit)]
    pub train_frac: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "gcn")]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    /// Keep GIN's λ fixed at 0.
    #[arg(long)]
    pub freeze_lambda: bool,
    /// Neighbour-sampling multiplier for test nodes.
    #[arg(long, default_value = "13", value_parser = non_negative)]
    pub n_test: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[command(flatten)]
    pub accounting: AccountingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Target ε; σ is calibrated before training.
    #[arg(long, conflicts_with = "sigma", required_unless_present = "sigma")]
    pub eps: Option<f64>,
    /// Fixed noise standard deviation; 0 trains without privacy.
    #[arg(long, value_parser = non_negative)]
    pub sigma: Option<f64>,
    #[arg(long, default_value = "0.01")]
    pub lr: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    /// Directory holding `model.bin` and `model.json`.
    #[arg(long)]
    pub model_dir: PathBuf,
    /// Evaluate every node of the given graph with full neighbourhoods.
    #[arg(long)]
    pub inductive: bool,
    #[arg(long, default_value = "13", value_parser = non_negative)]
    pub n_test: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AuditArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Out-degree whose ρ the canary norm follows (default: max out-degree).
    #[arg(long)]
    pub audited_dout: Option<usize>,
    #[arg(long, default_value = "0.95", value_parser = open_unit)]
    pub confidence: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ImpactArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value = "0.1", value_parser = probability)]
    pub p: f64,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Comma-separated out-degree fractions.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.3,0.5,0.7,0.9", value_parser = probability)]
    pub chi: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value = "gcn")]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
}
