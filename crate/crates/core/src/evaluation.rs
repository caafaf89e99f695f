//! Evaluation of learned structures: SHD to the truth's equivalence class,
//! multi-domain KL success rates, and the end-to-end experiment runner.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivalence::{enumerate_equivalence_class, EquivalenceClass};
use crate::error::{Error, Result};
use crate::graph::{shd, support_of_graph, DirectedGraph};
use crate::scoring::{fit_kl, fit_l1, FitOptions, L1Options};
use crate::search::{search, SearchConfig};
use crate::sem::{random_dg_with, sample_data, sample_parameters, Dataset, ParamSampling, RandomGraphConfig};

/// Default node budget for class enumeration during evaluation.
pub const CLASS_BUDGET: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShdToClass {
    pub shd: usize,
    /// Set when the class was only partially enumerated.
    pub upper_bound: bool,
    /// A class member attaining the minimum.
    pub closest: DirectedGraph,
}

/// Smallest SHD between `g_hat` and any member of `class`.
pub fn shd_to_class(g_hat: &DirectedGraph, class: &EquivalenceClass) -> Result<ShdToClass> {
    let mut best: Option<(usize, DirectedGraph)> = None;
    for member in class.graphs() {
        let d = shd(g_hat, &member)?;
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, member));
        }
    }
    let (shd, closest) = best.ok_or_else(|| Error::InvalidParameters("empty equivalence class".into()))?;
    Ok(ShdToClass { shd, upper_bound: !class.exhausted, closest })
}

/// [`shd_to_class`] against the enumerated class of `truth`.
pub fn shd_to_truth(g_hat: &DirectedGraph, truth: &DirectedGraph, budget: usize) -> Result<ShdToClass> {
    if g_hat.p() != truth.p() {
        return Err(Error::DimensionMismatch { expected: truth.p(), got: g_hat.p() });
    }
    shd_to_class(g_hat, &enumerate_equivalence_class(&support_of_graph(truth), budget)?)
}

/// Structure learners available to the experiment runner.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Learner {
    /// Returns the ground truth.
    Oracle,
    /// Returns the empty graph.
    Empty,
    /// Local search; `config.seed` is replaced per run.
    Search {
        #[serde(default)]
        config: SearchConfig,
    },
    /// Thresholded ℓ1 fit.
    L1 {
        #[serde(default)]
        options: L1Options,
    },
}

impl Learner {
    pub fn label(&self) -> String {
        match self {
            Learner::Oracle => "oracle".into(),
            Learner::Empty => "empty".into(),
            Learner::Search { config } => format!("{:?}", config.algorithm).to_lowercase(),
            Learner::L1 { .. } => "l1".into(),
        }
    }

    pub fn learn(&self, data: &Dataset, truth: &DirectedGraph, seed: u64) -> Result<DirectedGraph> {
        match self {
            Learner::Oracle => Ok(truth.clone()),
            Learner::Empty => Ok(DirectedGraph::empty(data.p())),
            Learner::Search { config } => {
                let cfg = SearchConfig { seed, ..config.clone() };
                Ok(search(data, &DirectedGraph::empty(data.p()), &cfg)?.model.graph)
            }
            Learner::L1 { options } => Ok(fit_l1(data, options)?.graph()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiDomainConfig {
    /// Number of domains.
    pub d: usize,
    /// KL threshold for a successful fit.
    pub eta: f64,
    /// Samples per domain given to the learner.
    pub n_samples: usize,
    pub params: ParamSampling,
    pub fit: FitOptions,
}

impl Default for MultiDomainConfig {
    fn default() -> Self {
        MultiDomainConfig {
            d: 50,
            eta: 1e-3,
            n_samples: 10_000,
            params: ParamSampling::default(),
            fit: FitOptions::population(),
        }
    }
}

impl MultiDomainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be at least 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig("eta must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiDomainResult {
    /// Structure learned from each domain's data.
    pub outputs: Vec<DirectedGraph>,
    /// `kl[i][j]`: minimal KL of output `i` fit to domain `j`.
    pub kl: Vec<Vec<f64>>,
    /// Fraction of domains each output fits below `eta`.
    pub success_rates: Vec<f64>,
}

/// Success rate of each output against fixed target covariances.
pub fn success_rates(outputs: &[DirectedGraph], targets: &[DMatrix<f64>], eta: f64, fit: &FitOptions) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    // identical outputs share fits
    let mut distinct: BTreeMap<&DirectedGraph, Vec<f64>> = BTreeMap::new();
    for g in outputs {
        if !distinct.contains_key(g) {
            let row = targets.iter().map(|s| fit_kl(g, s, fit).map(|(_, kl)| kl)).collect::<Result<Vec<_>>>()?;
            distinct.insert(g, row);
        }
    }
    let kl: Vec<Vec<f64>> = outputs.iter().map(|g| distinct[g].clone()).collect();
    let d = targets.len().max(1) as f64;
    let rates = kl.iter().map(|row| row.iter().filter(|&&k| k < eta).count() as f64 / d).collect();
    Ok((kl, rates))
}

/// Samples `d` parameterizations of `g_star`, learns one structure per domain
/// from that domain's data only, and scores each output by the fraction of
/// domain covariances it can fit within `eta`.
pub fn multi_domain_eval<F, R>(g_star: &DirectedGraph, learner: F, cfg: &MultiDomainConfig, rng: &mut R) -> Result<MultiDomainResult>
where
    F: Fn(&Dataset, usize) -> Result<DirectedGraph>,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let mut params = Vec::with_capacity(cfg.d);
    let mut data = Vec::with_capacity(cfg.d);
    for _ in 0..cfg.d {
        let pr = sample_parameters(g_star, &cfg.params, rng)?;
        data.push(sample_data(&pr, cfg.n_samples, rng)?);
        params.push(pr);
    }
    let targets = params.iter().map(|p| p.covariance()).collect::<Result<Vec<_>>>()?;
    let outputs = data.iter().enumerate().map(|(i, x)| learner(x, i)).collect::<Result<Vec<_>>>()?;
    let (kl, success_rates) = success_rates(&outputs, &targets, cfg.eta, &cfg.fit)?;
    Ok(MultiDomainResult { outputs, kl, success_rates })
}

/// Settings of [`run_experiment`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub n_graphs: usize,
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Defaults to `p`.
    #[serde(default)]
    pub max_cycle_len: Option<usize>,
    #[serde(default)]
    pub target_edges: Option<usize>,
    pub n_samples: usize,
    /// Number of domains.
    pub d: usize,
    /// Defaults to `p · 10⁻³`.
    #[serde(default)]
    pub eta: Option<f64>,
    pub algorithms: Vec<Learner>,
    pub seed: u64,
    #[serde(default)]
    pub params: ParamSampling,
    #[serde(default = "FitOptions::population")]
    pub kl_fit: FitOptions,
    #[serde(default = "default_budget")]
    pub class_budget: usize,
}

fn default_max_degree() -> usize {
    4
}

fn default_budget() -> usize {
    CLASS_BUDGET
}

impl ExperimentConfig {
    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.p as f64 * 1e-3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n_graphs == 0 {
            return Err(Error::InvalidConfig("p and n_graphs must be positive".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms given".into()));
        }
        for l in &self.algorithms {
            if let Learner::Search { config } = l {
                config.validate()?;
            }
        }
        self.domain_config().validate()
    }

    fn domain_config(&self) -> MultiDomainConfig {
        MultiDomainConfig { d: self.d, eta: self.eta(), n_samples: self.n_samples, params: self.params.clone(), fit: self.kl_fit.clone() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputRecord {
    pub graph: DirectedGraph,
    pub shd_to_class: usize,
    pub shd_upper_bound: bool,
    pub success_rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgorithmRecord {
    pub algorithm: String,
    /// One output per domain.
    pub outputs: Vec<OutputRecord>,
    pub runtime_secs: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphRecord {
    pub index: usize,
    pub ground_truth: DirectedGraph,
    pub class_size: Option<usize>,
    pub algorithms: Vec<AlgorithmRecord>,
    pub error: Option<String>,
}

/// Fraction of outputs at or below each SHD, and at or above each success rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Curves {
    pub algorithm: String,
    /// `(s, fraction with shd_to_class ≤ s)`.
    pub shd: Vec<(usize, f64)>,
    /// `(r, fraction with success_rate ≥ r)`.
    pub success: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub outputs: usize,
    pub failures: usize,
    pub median_shd: Option<f64>,
    pub mean_success_rate: Option<f64>,
    /// Fraction of outputs with success rate ≥ 0.5.
    pub frac_success_at_least_half: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub graphs: Vec<GraphRecord>,
    pub curves: Vec<Curves>,
    pub summary: Vec<Summary>,
}

impl EvalReport {
    /// Curve data as CSV rows `algorithm,curve,x,fraction`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("algorithm,curve,x,fraction\n");
        for c in &self.curves {
            for (s, f) in &c.shd {
                out.push_str(&format!("{},shd,{},{}\n", c.algorithm, s, f));
            }
            for (r, f) in &c.success {
                out.push_str(&format!("{},success,{},{}\n", c.algorithm, r, f));
            }
        }
        out
    }
}

fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[m] } else { 0.5 * (xs[m - 1] + xs[m]) })
}

fn run_graph(cfg: &ExperimentConfig, index: usize) -> GraphRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let gcfg = RandomGraphConfig {
        p: cfg.p,
        max_degree: cfg.max_degree,
        max_cycle_len: cfg.max_cycle_len.unwrap_or(cfg.p),
        target_edges: cfg.target_edges,
        max_proposals: None,
    };
    let truth = match random_dg_with(&gcfg, &mut rng) {
        Ok(g) => g,
        Err(e) => {
            return GraphRecord { index, ground_truth: DirectedGraph::empty(cfg.p), class_size: None, algorithms: vec![], error: Some(e.to_string()) };
        }
    };
    let class = enumerate_equivalence_class(&support_of_graph(&truth), cfg.class_budget);
    let class_size = class.as_ref().ok().map(EquivalenceClass::len);
    let dcfg = cfg.domain_config();
    let algorithms = cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, learner)| {
            // each algorithm sees the same domains
            let mut arng = rng.clone();
            let base = rng.clone().random::<u64>() ^ (a as u64);
            let start = Instant::now();
            let res = multi_domain_eval(&truth, |x, i| learner.learn(x, &truth, base.wrapping_add(i as u64)), &dcfg, &mut arng)
                .and_then(|md| {
                    let class = class.as_ref().map_err(Clone::clone)?;
                    md.outputs
                        .iter()
                        .zip(&md.success_rates)
                        .map(|(g, &rate)| {
                            let s = shd_to_class(g, class)?;
                            Ok(OutputRecord { graph: g.clone(), shd_to_class: s.shd, shd_upper_bound: s.upper_bound, success_rate: rate })
                        })
                        .collect::<Result<Vec<_>>>()
                });
            let runtime_secs = start.elapsed().as_secs_f64();
            match res {
                Ok(outputs) => AlgorithmRecord { algorithm: learner.label(), outputs, runtime_secs, error: None },
                Err(e) => AlgorithmRecord { algorithm: learner.label(), outputs: vec![], runtime_secs, error: Some(e.to_string()) },
            }
        })
        .collect();
    GraphRecord { index, ground_truth: truth, class_size, algorithms, error: None }
}

/// Runs every algorithm on `n_graphs` random ground truths. Graphs run in
/// parallel on independent random streams; failures are recorded per graph.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let graphs: Vec<GraphRecord> = (0..cfg.n_graphs).into_par_iter().map(|i| run_graph(cfg, i)).collect();

    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for (a, learner) in cfg.algorithms.iter().enumerate() {
        let label = learner.label();
        let recs: Vec<&AlgorithmRecord> = graphs.iter().filter_map(|g| g.algorithms.get(a)).collect();
        let outs: Vec<&OutputRecord> = recs.iter().flat_map(|r| &r.outputs).collect();
        let failures = graphs.len() - recs.iter().filter(|r| r.error.is_none()).count();
        let total = outs.len().max(1) as f64;
        let max_shd = outs.iter().map(|o| o.shd_to_class).max().unwrap_or(0).max(cfg.p * (cfg.p - 1));
        let shd_curve = (0..=max_shd).map(|s| (s, outs.iter().filter(|o| o.shd_to_class <= s).count() as f64 / total)).collect();
        let success_curve = (0..=20)
            .map(|k| {
                let r = k as f64 / 20.0;
                (r, outs.iter().filter(|o| o.success_rate >= r - 1e-12).count() as f64 / total)
            })
            .collect();
        curves.push(Curves { algorithm: label.clone(), shd: shd_curve, success: success_curve });
        let mut shds: Vec<f64> = outs.iter().map(|o| o.shd_to_class as f64).collect();
        let nonempty = !outs.is_empty();
        summary.push(Summary {
            algorithm: label,
            outputs: outs.len(),
            failures,
            median_shd: median(&mut shds),
            mean_success_rate: nonempty.then(|| outs.iter().map(|o| o.success_rate).sum::<f64>() / total),
            frac_success_at_least_half: nonempty.then(|| outs.iter().filter(|o| o.success_rate >= 0.5).count() as f64 / total),
        });
    }
    Ok(EvalReport { config: cfg.clone(), graphs, curves, summary })
}
