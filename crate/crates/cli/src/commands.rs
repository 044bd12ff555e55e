//! Subcommand implementations.

use std::fs;
use std::path::Path;

use nodedp::accountant::{self, AccountantConfig, DivergenceForm, DoutGrid};
use nodedp::audit::{self, AuditConfig, AuditResult};
use nodedp::gnn::{Arch, ModelParams};
use nodedp::graph::{self, gen_erdos_renyi, gen_planted_classes, IngestOptions, PlantedConfig};
use nodedp::noise::NoiseKind;
use nodedp::trainer::{self, ImpactConfig, TrainConfig};
use nodedp::{Graph, NodeSplit};
use serde::Serialize;

use crate::args::*;
use crate::manifest::{digest, InputDigest, RunManifest};

use nodedp::Result;

/// What a subcommand read and the effective configuration it ran with.
#[derive(Default)]
struct Outcome {
    inputs: Vec<InputDigest>,
    resolved: Option<serde_json::Value>,
}

impl Outcome {
    fn new(inputs: Vec<InputDigest>, resolved: &impl Serialize) -> Result<Self> {
        Ok(Self { inputs, resolved: Some(serde_json::to_value(resolved)?) })
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    fs::create_dir_all(&cli.out)?;
    let Outcome { mut inputs, resolved } = match &cli.command {
        Command::Gen(a) => gen(cli, a)?,
        Command::Calibrate(a) => calibrate(cli, a)?,
        Command::Train(a) => train(cli, a)?,
        Command::Eval(a) => eval(cli, a)?,
        Command::Audit(a) => run_audit(cli, a)?,
        Command::Impact(a) => impact(cli, a)?,
    };
    if let Some(path) = &cli.config {
        inputs.push(digest(path)?);
    }
    let manifest = RunManifest {
        subcommand: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cli.seed,
        threads: cli.threads,
        config: &cli.command,
        resolved,
        inputs,
    };
    write_json(&cli.out.join("manifest.json"), &manifest)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Write a report file and echo it on stdout.
fn emit(cli: &Cli, name: &str, value: &impl Serialize) -> Result<()> {
    write_json(&cli.out.join(name), value)?;
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn gen(cli: &Cli, a: &GenArgs) -> Result<Outcome> {
    let g = match a.model {
        GraphModel::Er => gen_erdos_renyi(a.n, a.p, a.d, a.classes, cli.seed)?,
        GraphModel::Planted => gen_planted_classes(&PlantedConfig {
            n: a.n,
            d: a.d,
            classes: a.classes,
            p_intra: a.p_intra,
            p_inter: a.p_inter,
            separation: a.separation,
            seed: cli.seed,
        })?,
    };
    graph::save_graph(&g, cli.out.join("nodes.csv"), cli.out.join("edges.txt"))?;
    #[derive(Serialize)]
    struct Summary {
        nodes: usize,
        edges: usize,
        dim: usize,
        classes: usize,
        max_out_degree: usize,
    }
    emit(
        cli,
        "graph.json",
        &Summary {
            nodes: g.node_count(),
            edges: g.edge_count(),
            dim: g.dim(),
            classes: g.num_classes(),
            max_out_degree: g.max_out_degree(),
        },
    )?;
    Ok(Outcome::default())
}

fn noise_kind(n: NoiseArg) -> NoiseKind {
    match n {
        NoiseArg::Sml => NoiseKind::Sml,
        NoiseArg::Gaussian => NoiseKind::Gaussian,
    }
}

fn arch(a: ArchArg) -> Arch {
    match a {
        ArchArg::Gcn => Arch::Gcn,
        ArchArg::Gin => Arch::Gin,
        ArchArg::Sage => Arch::Sage,
    }
}

fn default_iterations(q_b: f64) -> u64 {
    if q_b > 0.0 {
        (9.0 / q_b).ceil() as u64
    } else {
        1
    }
}

fn accounting(a: &AccountingArgs, node_count: usize) -> AccountantConfig {
    let delta = a.delta.unwrap_or_else(|| (node_count.max(2) as f64).powf(-1.1));
    AccountantConfig {
        enforce_no_overlap: !a.no_overlap_enforce,
        noise: noise_kind(a.noise),
        form: if a.exact_divergence { DivergenceForm::ExactLaplace } else { DivergenceForm::Bound },
        dout_grid: a.log_grid.map_or(DoutGrid::Exact, |points| DoutGrid::Logarithmic { points }),
        ..AccountantConfig::new(a.qb, a.m, a.t.unwrap_or_else(|| default_iterations(a.qb)), delta, node_count)
    }
}

fn calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<Outcome> {
    let mut cfg = accounting(&a.accounting, a.max_dout + 1);
    cfg.max_dout = a.max_dout;
    let report = accountant::calibrate_sigma(a.eps, &cfg)?;
    emit(cli, "calibration.json", &report)?;
    Outcome::new(vec![], &cfg)
}

fn load(g: &GraphInput) -> Result<(Graph, Vec<InputDigest>)> {
    let graph = graph::load_graph_with(&g.nodes, &g.edges, IngestOptions { symmetrize: g.symmetrize })?;
    Ok((graph, vec![digest(&g.nodes)?, digest(&g.edges)?]))
}

fn train_config(cli: &Cli, a: &TrainArgs, node_count: usize) -> TrainConfig {
    let acc = accounting(&a.accounting, node_count);
    TrainConfig {
        iterations: acc.iterations,
        learning_rate: a.lr,
        q_b: acc.q_b,
        m: acc.m,
        sigma: a.sigma,
        eps_target: a.eps,
        delta: acc.delta,
        arch: arch(a.model.arch),
        hidden: a.model.hidden,
        train_lambda: !a.model.freeze_lambda,
        seed: cli.seed,
        n_test: a.model.n_test,
        enforce_no_overlap: acc.enforce_no_overlap,
        noise: acc.noise,
        divergence: acc.form,
        dout_grid: acc.dout_grid,
    }
}

fn split(g: &Graph, input: &GraphInput, seed: u64) -> Result<NodeSplit> {
    graph::split_train_test(g, input.train_frac, seed)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<Outcome> {
    let (g, inputs) = load(&a.graph)?;
    let split = split(&g, &a.graph, cli.seed)?;
    let cfg = train_config(cli, a, g.node_count());
    let (params, report) = trainer::train(&g, &split, &cfg)?;
    params.save(cli.out.join("model.bin"), cli.out.join("model.json"))?;
    let mut loss = String::from("iter,loss\n");
    for (t, l) in report.losses.iter().enumerate() {
        loss.push_str(&format!("{t},{l}\n"));
    }
    fs::write(cli.out.join("loss.csv"), loss)?;
    write_json(&cli.out.join("report.json"), &report)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        accuracy: f64,
        mean_precision: f64,
        epsilon: trainer::Epsilon,
        delta: f64,
        sigma: f64,
        zero_coverage: bool,
        arch: &'a str,
    }
    let arch = cfg.arch.to_string();
    println!(
        "{}",
        serde_json::to_string(&Summary {
            accuracy: report.metrics.accuracy,
            mean_precision: report.metrics.mean_precision,
            epsilon: report.epsilon,
            delta: report.delta,
            sigma: report.sigma,
            zero_coverage: report.zero_coverage,
            arch: &arch,
        })?
    );
    Outcome::new(inputs, &cfg)
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<Outcome> {
    let (g, mut inputs) = load(&a.graph)?;
    let (bin, header) = (a.model_dir.join("model.bin"), a.model_dir.join("model.json"));
    let params = ModelParams::load(&bin, &header)?;
    inputs.push(digest(&bin)?);
    inputs.push(digest(&header)?);
    let metrics = if a.inductive {
        trainer::evaluate_inductive(&params, &g)?
    } else {
        let split = split(&g, &a.graph, cli.seed)?;
        let cfg = TrainConfig {
            n_test: a.n_test,
            seed: cli.seed,
            sigma: Some(0.0),
            ..TrainConfig::new(0.05, g.node_count())
        };
        trainer::evaluate(&params, &g, &split, &cfg)?
    };
    emit(cli, "eval.json", &metrics)?;
    Ok(Outcome { inputs, resolved: None })
}

fn run_audit(cli: &Cli, a: &AuditArgs) -> Result<Outcome> {
    let (g, inputs) = load(&a.train.graph)?;
    let split = split(&g, &a.train.graph, cli.seed)?;
    let cfg = train_config(cli, &a.train, g.node_count());
    let audit_cfg = AuditConfig { audited_dout: a.audited_dout, confidence: a.confidence };
    let run = audit::run_audit(&g, &split, &cfg, a.trials, &audit_cfg)?;
    run.observations.write_csv(fs::File::create(cli.out.join("audit.csv"))?)?;
    let result = AuditResult::from_run(&run, cfg.delta, a.confidence)?;
    emit(cli, "audit.json", &result)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        train: &'a TrainConfig,
        audit: &'a AuditConfig,
        trials: u64,
    }
    Outcome::new(inputs, &Resolved { train: &cfg, audit: &audit_cfg, trials: a.trials })
}

fn impact(cli: &Cli, a: &ImpactArgs) -> Result<Outcome> {
    let cfg = ImpactConfig {
        n: a.n,
        p: a.p,
        d: a.d,
        classes: a.classes,
        chi_grid: a.chi.clone(),
        repeats: a.repeats,
        seed: cli.seed,
        arch: arch(a.arch),
        hidden: a.hidden,
    };
    let rows = trainer::impact_experiment(&cfg)?;
    let mut csv = String::from("chi,mean_delta,sd_delta\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.chi, r.mean, r.sd));
    }
    fs::write(cli.out.join("impact.csv"), csv)?;
    emit(cli, "impact.json", &rows)?;
    Outcome::new(vec![], &cfg)
}
