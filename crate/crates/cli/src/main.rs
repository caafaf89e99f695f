//! `dglearn` command-line interface.
//!
//! stdout carries JSON only. Domain errors exit with status 1 and a JSON
//! object `{"error": kind, "message": text}`; usage errors exit with status 2.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dglearn::equivalence::{check_equivalent, enumerate_equivalence_class, is_reducible, Reducibility, DEFAULT_BUDGET};
use dglearn::evaluation::{multi_domain_eval, run_experiment, shd_to_truth, ExperimentConfig, Learner, MultiDomainConfig, CLASS_BUDGET};
use dglearn::graph::support_of_graph;
use dglearn::scoring::{fit_l1, l0_score, FitOptions, L1Options, ScoredModel};
use dglearn::search::{search, Algorithm, SearchConfig};
use dglearn::sem::{random_dg_with, sample_data, sample_parameters, Dataset, ParamSampling, Parameterization, RandomGraphConfig};
use dglearn::{DirectedGraph, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "dglearn", version, about = "Equivalence and structure learning for linear Gaussian directed graphs")]
struct Cli {
    /// Worker threads (falls back to DGLEARN_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Human-readable summaries on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribution-equivalence queries.
    #[command(subcommand)]
    Equiv(EquivCommand),
    /// Random graphs, parameters and data.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Learn a structure from data.
    Learn(LearnArgs),
    /// Compare learned structures with a ground truth.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Batch experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum EquivCommand {
    /// Decide whether two graphs are distribution equivalent.
    Check {
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        g2: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// List every graph in the equivalence class.
    Enumerate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// An irreducible equivalent graph with the fewest edges.
    Reduce {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Random directed graph with bounded degree and cycle length.
    Graph {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 4)]
        max_degree: usize,
        /// Longest simple cycle; defaults to p. 1 gives a DAG.
        #[arg(long)]
        max_cycle_len: Option<usize>,
        /// Target edge count; defaults to floor(1.2 p).
        #[arg(long)]
        edges: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random stable parameters on a graph.
    Params {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples from a parameterized model, written as CSV.
    Data {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write an `x1,...,xp` header line.
        #[arg(long)]
        header: bool,
    },
}

#[derive(Args, Clone)]
struct SamplingArgs {
    #[arg(long, default_value_t = 0.2)]
    weight_low: f64,
    #[arg(long, default_value_t = 0.8)]
    weight_high: f64,
    #[arg(long, default_value_t = 1.0)]
    variance_low: f64,
    #[arg(long, default_value_t = 3.0)]
    variance_high: f64,
}

impl SamplingArgs {
    fn config(&self) -> ParamSampling {
        ParamSampling {
            weight_low: self.weight_low,
            weight_high: self.weight_high,
            variance_low: self.variance_low,
            variance_high: self.variance_high,
            ..ParamSampling::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Tabu,
    #[value(alias = "hill", alias = "hillclimb")]
    HillClimb,
    L1,
}

#[derive(Args, Clone)]
struct AlgoArgs {
    #[arg(long, value_enum, default_value_t = Algo::Tabu)]
    algo: Algo,
    #[arg(long, default_value_t = 5)]
    tabu_length: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Disable the virtual-edge moves.
    #[arg(long)]
    no_virtual: bool,
    /// Per-edge penalty; defaults to ½ log n.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// ℓ1 coefficient of the `l1` learner.
    #[arg(long, default_value_t = 0.1)]
    l1_lambda: f64,
    /// Weight threshold of the `l1` learner.
    #[arg(long, default_value_t = 0.05)]
    l1_threshold: f64,
}

impl AlgoArgs {
    fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            algorithm: match self.algo {
                Algo::HillClimb => Algorithm::HillClimb,
                _ => Algorithm::Tabu,
            },
            tabu_length: self.tabu_length,
            patience: self.patience,
            use_virtual: !self.no_virtual,
            lambda: self.lambda,
            restarts: self.restarts,
            seed,
            ..SearchConfig::default()
        }
    }

    fn l1_options(&self) -> L1Options {
        L1Options { lambda: self.l1_lambda, threshold: self.l1_threshold, ..L1Options::default() }
    }

    fn learner(&self) -> Learner {
        match self.algo {
            Algo::L1 => Learner::L1 { options: self.l1_options() },
            _ => Learner::Search { config: self.search_config(0) },
        }
    }
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Starting graph; empty when absent.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
}

#[derive(Subcommand)]
enum EvaluateCommand {
    /// Structural Hamming distance from an output to the truth's equivalence class.
    Shd {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = CLASS_BUDGET)]
        budget: usize,
    },
    /// Success rates of structures learned from many random domains of the truth.
    Multidomain {
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        algo: AlgoArgs,
        /// Number of domains.
        #[arg(long, default_value_t = 50)]
        d: usize,
        /// Samples per domain.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// KL threshold, or `auto` for p·10⁻³.
        #[arg(long, default_value = "auto")]
        eta: String,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run a configured experiment and write the full report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the SHD and success-rate curves as CSV.
        #[arg(long)]
        emit_curves: Option<PathBuf>,
    },
}

/// CLI-level failures carried to the JSON error object.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { kind: e.kind(), message: e.to_string() }
    }
}

fn budget_exhausted(budget: usize) -> Failure {
    Failure { kind: "budget_exhausted", message: format!("enumeration budget of {budget} nodes exhausted") }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { kind: "io", message: format!("{}: {e}", path.display()) }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Failure { kind: "parse", message: format!("{}: {e}", path.display()) })
}

fn read_graph(path: &Path) -> Result<DirectedGraph, Failure> {
    read_json(path)
}

fn read_data(path: &Path) -> Result<Dataset, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    Ok(Dataset::from_csv(BufReader::new(file))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_failure(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("library types serialize to JSON")
}

fn score_report(model: &ScoredModel) -> Value {
    json!({
        "nll": model.nll,
        "penalty": model.penalty,
        "score": model.score,
        "blocks": model.per_block_nll,
    })
}

fn parse_eta(raw: &str, p: usize) -> Result<f64, Failure> {
    if raw == "auto" {
        return Ok(p as f64 * 1e-3);
    }
    match raw.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(Failure { kind: "invalid_config", message: format!("--eta must be a positive number or `auto`, got `{raw}`") }),
    }
}

fn equiv(cmd: EquivCommand, verbose: bool) -> Result<Value, Failure> {
    match cmd {
        EquivCommand::Check { g1, g2, budget } => {
            let (a, b) = (read_graph(&g1)?, read_graph(&g2)?);
            let check = check_equivalent(&a, &b, budget)?;
            if verbose {
                eprintln!("{a} vs {b}: {:?}", check.verdict);
            }
            Ok(to_value(&check))
        }
        EquivCommand::Enumerate { graph, budget } => {
            let g = read_graph(&graph)?;
            let class = enumerate_equivalence_class(&support_of_graph(&g), budget)?;
            if !class.exhausted {
                return Err(budget_exhausted(budget));
            }
            if verbose {
                eprintln!("class of {g}: {} members", class.len());
            }
            Ok(to_value(&class.graphs()))
        }
        EquivCommand::Reduce { graph, budget } => {
            let g = read_graph(&graph)?;
            let reduced = match is_reducible(&g, budget) {
                Reducibility::Reducible(h) => h,
                Reducibility::Irreducible => g,
                Reducibility::Inconclusive => return Err(budget_exhausted(budget)),
            };
            Ok(to_value(&reduced))
        }
    }
}

fn simulate(cmd: SimulateCommand, verbose: bool) -> Result<Value, Failure> {
    match cmd {
        SimulateCommand::Graph { p, max_degree, max_cycle_len, edges, seed, out } => {
            let cfg = RandomGraphConfig { target_edges: edges, ..RandomGraphConfig::new(p, max_degree, max_cycle_len.unwrap_or(p)) };
            let g = random_dg_with(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
            if let Some(path) = out {
                write_json(&path, &g)?;
            }
            if verbose {
                eprintln!("{g}");
            }
            Ok(to_value(&g))
        }
        SimulateCommand::Params { graph, sampling, seed, out } => {
            let g = read_graph(&graph)?;
            let params = sample_parameters(&g, &sampling.config(), &mut ChaCha8Rng::seed_from_u64(seed))?;
            if let Some(path) = out {
                write_json(&path, &params)?;
            }
            Ok(to_value(&params))
        }
        SimulateCommand::Data { params, n, seed, out, header } => {
            let pr: Parameterization = read_json(&params)?;
            let data = sample_data(&pr, n, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let file = File::create(&out).map_err(|e| io_failure(&out, e))?;
            data.to_csv(BufWriter::new(file), header)?;
            Ok(json!({ "n": data.n(), "p": data.p(), "out": out }))
        }
    }
}

fn learn(args: LearnArgs, verbose: bool) -> Result<Value, Failure> {
    let data = read_data(&args.data)?;
    let init = match &args.init {
        Some(path) => read_graph(path)?,
        None => DirectedGraph::empty(data.p()),
    };
    match args.algo.algo {
        Algo::L1 => {
            let params = fit_l1(&data, &args.algo.l1_options())?;
            let model = l0_score(&data, &params.graph(), &FitOptions::default())?;
            if verbose {
                eprintln!("l1: {}", model.graph);
            }
            Ok(json!({ "graph": model.graph, "params": params, "score": score_report(&model) }))
        }
        Algo::Tabu | Algo::HillClimb => {
            let cfg = args.algo.search_config(args.seed);
            let outcome = search(&data, &init, &cfg)?;
            if verbose {
                eprintln!("{} after {} iterations, score {:.4}", outcome.model.graph, outcome.iterations, outcome.model.score);
            }
            Ok(json!({
                "graph": outcome.model.graph,
                "params": outcome.model.params,
                "score": score_report(&outcome.model),
                "iterations": outcome.iterations,
                "accepted_moves": outcome.accepted_moves,
            }))
        }
    }
}

fn evaluate(cmd: EvaluateCommand, verbose: bool) -> Result<Value, Failure> {
    match cmd {
        EvaluateCommand::Shd { truth, output, budget } => {
            let (t, o) = (read_graph(&truth)?, read_graph(&output)?);
            Ok(to_value(&shd_to_truth(&o, &t, budget)?))
        }
        EvaluateCommand::Multidomain { truth, algo, d, n, eta, sampling, seed } => {
            let t = read_graph(&truth)?;
            let cfg = MultiDomainConfig {
                d,
                eta: parse_eta(&eta, t.p())?,
                n_samples: n,
                params: sampling.config(),
                fit: FitOptions::population(),
            };
            let learner = algo.learner();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let result = multi_domain_eval(&t, |x, i| learner.learn(x, &t, seed.wrapping_add(i as u64)), &cfg, &mut rng)?;
            if verbose {
                let mean = result.success_rates.iter().sum::<f64>() / result.success_rates.len().max(1) as f64;
                eprintln!("{}: mean success rate {mean:.3} over {d} domains", learner.label());
            }
            Ok(json!({ "algorithm": learner.label(), "eta": cfg.eta, "result": result }))
        }
    }
}

fn experiment(cmd: ExperimentCommand, verbose: bool) -> Result<Value, Failure> {
    let ExperimentCommand::Run { config, out, emit_curves } = cmd;
    let cfg: ExperimentConfig = read_json(&config)?;
    let report = run_experiment(&cfg)?;
    write_json(&out, &report)?;
    if let Some(path) = &emit_curves {
        std::fs::write(path, report.curves_csv()).map_err(|e| io_failure(path, e))?;
    }
    if verbose {
        for s in &report.summary {
            eprintln!("{}: {} outputs, median SHD {:?}, mean success {:?}", s.algorithm, s.outputs, s.median_shd, s.mean_success_rate);
        }
    }
    // runtimes live in the report file only, keeping stdout reproducible
    Ok(json!({ "out": out, "curves": emit_curves, "graphs": report.graphs.len(), "summary": report.summary }))
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("DGLEARN_THREADS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure { kind: "invalid_config", message: format!("DGLEARN_THREADS must be a positive integer, got `{raw}`") }),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<Value, Failure> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(Failure { kind: "invalid_config", message: "--threads must be positive".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { kind: "invalid_config", message: e.to_string() })?;
    }
    match cli.command {
        Command::Equiv(c) => equiv(c, cli.verbose),
        Command::Simulate(c) => simulate(c, cli.verbose),
        Command::Learn(a) => learn(a, cli.verbose),
        Command::Evaluate(c) => evaluate(c, cli.verbose),
        Command::Experiment(c) => experiment(c, cli.verbose),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (value, code) = match run(cli) {
        Ok(v) => (v, ExitCode::SUCCESS),
        Err(f) => (json!({ "error": f.kind, "message": f.message }), ExitCode::from(1)),
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    // a closed pipe leaves nothing useful to report
    if serde_json::to_writer_pretty(&mut lock, &value).is_ok() {
        let _ = writeln!(lock);
    }
    code
}
