//! Gaussian likelihood, support-constrained maximum likelihood, the ℓ0 score
//! and the ℓ1 and population (KL) fits.
//!
//! Everything works on the covariance `S = XᵀX / n`. With the noise variances
//! profiled out (`σ_i² = r_i`), the objective per sample of one strongly
//! connected block `C` is
//!
//! ```text
//! F_C(B) = -log|det(I - B_CC)| + ½ Σ_{i∈C} log r_i,   r_i = (e_i - b_i)ᵀ S (e_i - b_i)
//! ```
//!
//! and `nll = n Σ_C F_C + n p / 2`. Blocks share no parameters, so each is fit
//! on its own and cached by its local structure.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{find_mscs, DirectedGraph, MscsPartition};
use crate::optim::{minimize, LbfgsOptions};
use crate::sem::{spectral_radius, Dataset, Parameterization, STABILITY_MARGIN};

/// `|det(I - B)|` below this is treated as singular.
const SINGULAR_DET: f64 = 1e-12;

/// Knobs of the inner maximum-likelihood problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Starting points per cyclic block; the first is a least-squares warm start.
    pub restarts: usize,
    /// Keep every iterate strictly inside the stable region.
    pub enforce_stability: bool,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Mixed into the per-block seed of the random starts.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 5, enforce_stability: true, max_iter: 500, grad_tol: 1e-7, seed: 0 }
    }
}

impl FitOptions {
    /// Settings for fitting population covariances: no stability constraint and
    /// more starts, since equivalent structures of a stable model may be unstable.
    pub fn population() -> Self {
        FitOptions { restarts: 12, enforce_stability: false, max_iter: 2000, grad_tol: 1e-10, seed: 0 }
    }

    fn lbfgs(&self) -> LbfgsOptions {
        LbfgsOptions { max_iter: self.max_iter, grad_tol: self.grad_tol, ..Default::default() }
    }
}

/// `−n log|det(I−B)| + Σ_i [(n/2) log σ_i² + ‖X_i − X B_i‖² / (2σ_i²)]`.
pub fn nll(data: &Dataset, params: &Parameterization) -> Result<f64> {
    nll_from_covariance(data.covariance(), data.n() as f64, params)
}

/// [`nll`] computed from a covariance and a sample size.
pub fn nll_from_covariance(s: &DMatrix<f64>, n: f64, params: &Parameterization) -> Result<f64> {
    let p = params.p();
    if s.nrows() != p {
        return Err(Error::DimensionMismatch { expected: p, got: s.nrows() });
    }
    let i_minus_b = DMatrix::identity(p, p) - params.b();
    let det = i_minus_b.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::SingularSystem);
    }
    let mut total = -n * det.abs().ln();
    for i in 0..p {
        let col = i_minus_b.column(i);
        let r = (s * col).dot(&col);
        let var = params.omega()[i];
        total += 0.5 * n * var.ln() + n * r / (2.0 * var);
    }
    Ok(total)
}

/// Per-block conditional NLLs of `X_C | X_Pa(C)` implied by `params`, in
/// partition order. They sum to [`nll`].
pub fn block_nll(data: &Dataset, params: &Parameterization, partition: &MscsPartition) -> Result<Vec<f64>> {
    let p = params.p();
    let s = data.covariance();
    let n = data.n() as f64;
    if s.nrows() != p {
        return Err(Error::DimensionMismatch { expected: p, got: s.nrows() });
    }
    let i_minus_b = DMatrix::identity(p, p) - params.b();
    partition
        .blocks
        .iter()
        .map(|block| {
            let sub = i_minus_b.select_rows(block).select_columns(block);
            let det = sub.determinant();
            if !det.is_finite() || det.abs() < SINGULAR_DET {
                return Err(Error::SingularSystem);
            }
            let mut total = -n * det.abs().ln();
            for &i in block {
                let col = i_minus_b.column(i);
                let r = (s * col).dot(&col);
                let var = params.omega()[i];
                total += 0.5 * n * var.ln() + n * r / (2.0 * var);
            }
            Ok(total)
        })
        .collect()
}

/// Fitted parameters of one strongly connected block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFit {
    /// `(parent, child, weight)` for every edge into the block.
    pub weights: Vec<(usize, usize, f64)>,
    /// `(vertex, σ²)` for every block vertex.
    pub variances: Vec<(usize, f64)>,
    /// Per-sample objective `F_C` at the optimum.
    pub objective: f64,
}

/// Structure of one block: its vertices and each vertex's sorted parents.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockKey {
    pub vertices: Vec<usize>,
    pub parents: Vec<Vec<usize>>,
}

impl BlockKey {
    pub fn new(g: &DirectedGraph, vertices: &[usize]) -> Self {
        BlockKey { vertices: vertices.to_vec(), parents: vertices.iter().map(|&v| g.parents(v)).collect() }
    }

    fn seed(&self, base: u64) -> u64 {
        // FNV-1a; stable across platforms and toolchains
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (v, pa) in self.vertices.iter().zip(&self.parents) {
            eat(*v as u64);
            eat(u64::MAX);
            pa.iter().for_each(|&a| eat(a as u64));
        }
        h
    }
}

/// Concentrated objective of one block over its free weights.
struct BlockProblem<'a> {
    s: &'a DMatrix<f64>,
    key: &'a BlockKey,
    /// Position of each vertex inside the block.
    local: HashMap<usize, usize>,
    enforce_stability: bool,
}

impl<'a> BlockProblem<'a> {
    fn new(s: &'a DMatrix<f64>, key: &'a BlockKey, enforce_stability: bool) -> Self {
        let local = key.vertices.iter().enumerate().map(|(a, &v)| (v, a)).collect();
        BlockProblem { s, key, local, enforce_stability }
    }

    fn dim(&self) -> usize {
        self.key.parents.iter().map(Vec::len).sum()
    }

    /// `I - B_CC` for the packed weights `x`.
    fn internal(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let m = self.key.vertices.len();
        let mut a = DMatrix::identity(m, m);
        let mut idx = 0;
        for (ci, pa) in self.key.parents.iter().enumerate() {
            for &u in pa {
                if let Some(&li) = self.local.get(&u) {
                    a[(li, ci)] -= x[idx];
                }
                idx += 1;
            }
        }
        a
    }

    fn residual(&self, v: usize, pa: &[usize], beta: &[f64]) -> (f64, DVector<f64>) {
        let s = self.s;
        // S_{Pa,Pa} β - S_{Pa,v}
        let mut grad = DVector::zeros(pa.len());
        let mut r = s[(v, v)];
        for (a, &u) in pa.iter().enumerate() {
            let mut acc = -s[(u, v)];
            for (b, &w) in pa.iter().enumerate() {
                acc += s[(u, w)] * beta[b];
            }
            grad[a] = acc;
            r += beta[a] * (acc - s[(u, v)]);
        }
        (r, grad)
    }

    fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let a = self.internal(x);
        let m = a.nrows();
        if self.enforce_stability && m > 1 {
            let b_cc = DMatrix::identity(m, m) - &a;
            if spectral_radius(&b_cc) >= 1.0 - STABILITY_MARGIN {
                return None;
            }
        }
        let lu = a.lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() < SINGULAR_DET {
            return None;
        }
        let inv = lu.try_inverse()?;
        let mut f = -det.abs().ln();
        let mut grad = DVector::zeros(x.len());
        let mut idx = 0;
        for (ci, (&v, pa)) in self.key.vertices.iter().zip(&self.key.parents).enumerate() {
            let beta = &x.as_slice()[idx..idx + pa.len()];
            let (r, g) = self.residual(v, pa, beta);
            if !(r > 1e-300) {
                return None;
            }
            f += 0.5 * r.ln();
            for (a, &u) in pa.iter().enumerate() {
                let mut d = g[a] / r;
                if let Some(&li) = self.local.get(&u) {
                    d += inv[(ci, li)];
                }
                grad[idx + a] = d;
            }
            idx += pa.len();
        }
        f.is_finite().then_some((f, grad))
    }

    /// Per-vertex least squares, ignoring the determinant term.
    fn ols(&self) -> DVector<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for (&v, pa) in self.key.vertices.iter().zip(&self.key.parents) {
            x.extend(least_squares(self.s, v, pa));
        }
        DVector::from_vec(x)
    }

    /// Shrinks the internal weights until the block is stable.
    fn shrink_to_stable(&self, x: &mut DVector<f64>) {
        let m = self.key.vertices.len();
        let b_cc = DMatrix::identity(m, m) - self.internal(x);
        let rho = spectral_radius(&b_cc);
        if rho < 0.95 {
            return;
        }
        let scale = 0.95 / rho;
        let mut idx = 0;
        for pa in &self.key.parents {
            for &u in pa {
                if self.local.contains_key(&u) {
                    x[idx] *= scale;
                }
                idx += 1;
            }
        }
    }

    /// Scales the internal weights of `x` along their ray until `det(I - B_CC)`
    /// changes sign. The concentrated objective is infinite on `det = 0`, so
    /// the two sign regions can only be explored from separate starts.
    fn across_singular(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let sign = self.internal(x).determinant().signum();
        let mut t = 1.0;
        while t < 64.0 {
            t *= 1.25;
            let mut y = x.clone();
            let mut idx = 0;
            for pa in &self.key.parents {
                for &u in pa {
                    if self.local.contains_key(&u) {
                        y[idx] *= t;
                    }
                    idx += 1;
                }
            }
            let det = self.internal(&y).determinant();
            if det.signum() != sign && det.abs() > 1e-3 {
                return Some(y);
            }
        }
        None
    }

    fn fit(&self, x: &DVector<f64>) -> BlockFit {
        let mut weights = Vec::with_capacity(x.len());
        let mut variances = Vec::with_capacity(self.key.vertices.len());
        let mut idx = 0;
        for (&v, pa) in self.key.vertices.iter().zip(&self.key.parents) {
            let beta = &x.as_slice()[idx..idx + pa.len()];
            variances.push((v, self.residual(v, pa, beta).0));
            weights.extend(pa.iter().zip(beta).map(|(&u, &w)| (u, v, w)));
            idx += pa.len();
        }
        let objective = self.eval(x).map(|(f, _)| f).unwrap_or(f64::INFINITY);
        BlockFit { weights, variances, objective }
    }
}

/// Regression coefficients of `v` on `pa` from the covariance `s`.
fn least_squares(s: &DMatrix<f64>, v: usize, pa: &[usize]) -> Vec<f64> {
    if pa.is_empty() {
        return Vec::new();
    }
    let gram = DMatrix::from_fn(pa.len(), pa.len(), |a, b| s[(pa[a], pa[b])]);
    let rhs = DVector::from_fn(pa.len(), |a, _| s[(pa[a], v)]);
    let sol = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => gram.svd(true, true).solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(pa.len())),
    };
    sol.iter().copied().collect()
}

/// Fits one block: closed form for a single vertex, multi-start L-BFGS otherwise.
pub fn fit_block(s: &DMatrix<f64>, key: &BlockKey, opts: &FitOptions, warm: Option<&DVector<f64>>) -> Result<BlockFit> {
    let problem = BlockProblem::new(s, key, opts.enforce_stability);
    if key.vertices.len() == 1 {
        let x = problem.ols();
        let fit = problem.fit(&x);
        return if fit.objective.is_finite() {
            Ok(fit)
        } else {
            Err(Error::OptimizationFailed(format!("degenerate residual variance at X{}", key.vertices[0] + 1)))
        };
    }
    let dim = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed(opts.seed));
    let mut starts: Vec<DVector<f64>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.clone());
    }
    let mut ols = problem.ols();
    if opts.enforce_stability {
        problem.shrink_to_stable(&mut ols);
    }
    starts.push(ols);
    // wider starts reach regions of the unconstrained problem far from the origin
    const SCALES: [f64; 4] = [1.0, 2.0, 0.5, 4.0];
    for r in 1..opts.restarts.max(1) {
        let scale = if opts.enforce_stability { 1.0 } else { SCALES[(r - 1) % SCALES.len()] };
        let mut x = DVector::from_fn(dim, |_, _| scale * rng.random_range(-0.5..=0.5));
        if opts.enforce_stability {
            problem.shrink_to_stable(&mut x);
        }
        starts.push(x);
    }
    if !opts.enforce_stability {
        let mirrored: Vec<_> = starts.iter().filter_map(|x| problem.across_singular(x)).collect();
        starts.extend(mirrored);
    }

    let lbfgs = opts.lbfgs();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for x0 in starts {
        let Some(m) = minimize(|x| problem.eval(x), x0, &lbfgs) else { continue };
        if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    match best {
        Some((_, x)) => Ok(problem.fit(&x)),
        None if opts.enforce_stability => Err(Error::UnstableOptimum),
        None => Err(Error::OptimizationFailed(format!("no feasible start for block {:?}", key.vertices))),
    }
}

/// Per-sample concentrated objective `Σ_C F_C` of `b` over the support of `g`
/// and its gradient with respect to the free entries of `b` (zero elsewhere).
/// Evaluated block by block, exactly as during fitting.
pub fn concentrated_objective(s: &DMatrix<f64>, g: &DirectedGraph, b: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let p = g.p();
    if s.nrows() != p || b.nrows() != p || b.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: b.nrows() });
    }
    let mut total = 0.0;
    let mut grad = DMatrix::zeros(p, p);
    for block in find_mscs(g).blocks {
        let key = BlockKey::new(g, &block);
        let problem = BlockProblem::new(s, &key, false);
        let x: Vec<f64> =
            key.vertices.iter().zip(&key.parents).flat_map(|(&v, pa)| pa.iter().map(move |&u| b[(u, v)])).collect();
        let (f, gx) = problem.eval(&DVector::from_vec(x)).ok_or(Error::SingularSystem)?;
        total += f;
        let mut idx = 0;
        for (&v, pa) in key.vertices.iter().zip(&key.parents) {
            for &u in pa {
                grad[(u, v)] = gx[idx];
                idx += 1;
            }
        }
    }
    Ok((total, grad))
}

/// A fitted structure with its score.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoredModel {
    pub graph: DirectedGraph,
    pub params: Parameterization,
    pub nll: f64,
    pub penalty: f64,
    pub score: f64,
    pub per_block_nll: Vec<BlockScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScore {
    pub block: Vec<usize>,
    pub nll: f64,
}

/// Scores structures against one covariance, caching block fits.
///
/// A block fit depends only on its [`BlockKey`], so rescoring a graph after a
/// local move refits only the blocks whose vertices or parent sets changed,
/// and the result is identical to scoring from scratch.
pub struct Scorer {
    cov: DMatrix<f64>,
    n: f64,
    lambda: f64,
    opts: FitOptions,
    cache: Mutex<HashMap<BlockKey, std::result::Result<Arc<BlockFit>, Error>>>,
}

impl Scorer {
    /// `λ = ½ log n`.
    pub fn new(data: &Dataset, opts: FitOptions) -> Self {
        let n = data.n() as f64;
        Scorer::from_covariance(data.covariance().clone(), n, 0.5 * n.ln(), opts)
    }

    pub fn from_covariance(cov: DMatrix<f64>, n: f64, lambda: f64, opts: FitOptions) -> Self {
        Scorer { cov, n, lambda, opts, cache: Mutex::new(HashMap::new()) }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn p(&self) -> usize {
        self.cov.nrows()
    }

    pub fn options(&self) -> &FitOptions {
        &self.opts
    }

    pub fn cached_blocks(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }

    pub fn block(&self, key: &BlockKey) -> Result<Arc<BlockFit>> {
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(key) {
            return hit.clone();
        }
        let fit = fit_block(&self.cov, key, &self.opts, None).map(Arc::new);
        self.cache.lock().expect("cache poisoned").insert(key.clone(), fit.clone());
        fit
    }

    fn blocks(&self, g: &DirectedGraph) -> Result<(MscsPartition, Vec<Arc<BlockFit>>)> {
        if g.p() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: g.p() });
        }
        let part = find_mscs(g);
        let fits = part.blocks.iter().map(|b| self.block(&BlockKey::new(g, b))).collect::<Result<_>>()?;
        Ok((part, fits))
    }

    fn block_value(&self, fit: &BlockFit) -> f64 {
        self.n * (fit.objective + 0.5 * fit.variances.len() as f64)
    }

    /// Fitted NLL of `g` without assembling parameters.
    pub fn nll(&self, g: &DirectedGraph) -> Result<f64> {
        let (_, fits) = self.blocks(g)?;
        Ok(fits.iter().map(|f| self.block_value(f)).sum())
    }

    /// `nll + λ · |E|`.
    pub fn score_value(&self, g: &DirectedGraph) -> Result<f64> {
        Ok(self.nll(g)? + self.lambda * g.edge_count() as f64)
    }

    pub fn score(&self, g: &DirectedGraph) -> Result<ScoredModel> {
        let (part, fits) = self.blocks(g)?;
        let params = assemble(g.p(), &fits)?;
        let per_block_nll: Vec<BlockScore> = part
            .blocks
            .iter()
            .zip(&fits)
            .map(|(b, f)| BlockScore { block: b.clone(), nll: self.block_value(f) })
            .collect();
        let nll = per_block_nll.iter().map(|b| b.nll).sum();
        let penalty = self.lambda * g.edge_count() as f64;
        Ok(ScoredModel { graph: g.clone(), params, nll, penalty, score: nll + penalty, per_block_nll })
    }
}

fn assemble(p: usize, fits: &[Arc<BlockFit>]) -> Result<Parameterization> {
    let mut b = DMatrix::zeros(p, p);
    let mut omega = DVector::zeros(p);
    for f in fits {
        for &(u, v, w) in &f.weights {
            b[(u, v)] = w;
        }
        for &(v, s) in &f.variances {
            omega[v] = s;
        }
    }
    Parameterization::new(b, omega)
}

/// Maximum-likelihood parameters of `g`, block by block.
pub fn fit_mle(data: &Dataset, g: &DirectedGraph, opts: &FitOptions) -> Result<Parameterization> {
    Ok(Scorer::new(data, opts.clone()).score(g)?.params)
}

/// [`fit_mle`] with an extra starting point taken from `warm` (restricted to
/// the support of `g`), so the result is never worse than `warm` projected.
pub fn fit_mle_warm(data: &Dataset, g: &DirectedGraph, opts: &FitOptions, warm: &Parameterization) -> Result<Parameterization> {
    if g.p() != data.p() || warm.p() != data.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), got: g.p() });
    }
    let part = find_mscs(g);
    let fits = part
        .blocks
        .iter()
        .map(|block| {
            let key = BlockKey::new(g, block);
            let x0: Vec<f64> = key
                .vertices
                .iter()
                .zip(&key.parents)
                .flat_map(|(&v, pa)| pa.iter().map(move |&u| warm.b()[(u, v)]))
                .collect();
            fit_block(data.covariance(), &key, opts, Some(&DVector::from_vec(x0))).map(Arc::new)
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(g.p(), &fits)
}

/// ℓ0-penalized score with `λ = ½ log n` per edge of `g`.
pub fn l0_score(data: &Dataset, g: &DirectedGraph, opts: &FitOptions) -> Result<ScoredModel> {
    Scorer::new(data, opts.clone()).score(g)
}

/// Settings of the ℓ1 baseline.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct L1Options {
    pub lambda: f64,
    /// Entries with smaller magnitude are zeroed after fitting.
    pub threshold: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub enforce_stability: bool,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options { lambda: 0.1, threshold: 0.05, max_iter: 5000, tol: 1e-8, enforce_stability: true }
    }
}

/// Dense concentrated objective and gradient over the full off-diagonal `B`.
fn dense_objective(s: &DMatrix<f64>, b: &DMatrix<f64>, enforce_stability: bool) -> Option<(f64, DMatrix<f64>)> {
    let p = b.nrows();
    if enforce_stability && spectral_radius(b) >= 1.0 - STABILITY_MARGIN {
        return None;
    }
    let a = DMatrix::identity(p, p) - b;
    let lu = a.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return None;
    }
    let inv_t = lu.try_inverse()?.transpose();
    let sa = s * &a;
    let mut f = -det.abs().ln();
    let mut grad = inv_t;
    for i in 0..p {
        let r = sa.column(i).dot(&a.column(i));
        if !(r > 1e-300) {
            return None;
        }
        f += 0.5 * r.ln();
        let gi = -sa.column(i) / r;
        let mut col = grad.column_mut(i);
        col += gi;
        col[i] = 0.0;
    }
    Some((f, grad))
}

/// Proximal-gradient fit of `F(B) + λ‖B‖₁` (per-sample scaling), thresholded,
/// with noise variances refit for the thresholded weights.
pub fn fit_l1(data: &Dataset, opts: &L1Options) -> Result<Parameterization> {
    if !(opts.lambda >= 0.0) {
        return Err(Error::InvalidConfig("lambda must be non-negative".into()));
    }
    let s = data.covariance();
    let p = data.p();
    let l1 = |b: &DMatrix<f64>| b.iter().map(|v| v.abs()).sum::<f64>();
    let mut b = DMatrix::zeros(p, p);
    let (mut f, mut g) = dense_objective(s, &b, opts.enforce_stability)
        .ok_or_else(|| Error::OptimizationFailed("degenerate covariance".into()))?;
    let mut step = 1.0;
    for _ in 0..opts.max_iter {
        let obj = f + opts.lambda * l1(&b);
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = &b - &g * step;
            cand.apply(|v| *v = v.signum() * (v.abs() - step * opts.lambda).max(0.0));
            cand.fill_diagonal(0.0);
            if let Some((fc, gc)) = dense_objective(s, &cand, opts.enforce_stability) {
                let diff = &cand - &b;
                // sufficient decrease for the smooth part (standard prox-gradient test)
                if fc <= f + g.dot(&diff) + diff.norm_squared() / (2.0 * step) + 1e-15 {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((nb, nf, ng)) = accepted else { break };
        let change = (&nb - &b).amax();
        let new_obj = nf + opts.lambda * l1(&nb);
        b = nb;
        f = nf;
        g = ng;
        step = (step * 2.0).min(1.0);
        if change < opts.tol || (obj - new_obj).abs() < opts.tol * 1e-3 {
            break;
        }
    }
    b.apply(|v| {
        if v.abs() < opts.threshold {
            *v = 0.0
        }
    });
    let a = DMatrix::identity(p, p) - &b;
    let omega = DVector::from_fn(p, |i, _| (s * a.column(i)).dot(&a.column(i)));
    Parameterization::new(b, omega)
}

/// Parameters of `g` minimizing `KL(N(0, Σ_target) ‖ N(0, Σ(B, Ω)))`, and that
/// minimal divergence.
pub fn fit_kl(g: &DirectedGraph, sigma_target: &DMatrix<f64>, opts: &FitOptions) -> Result<(Parameterization, f64)> {
    let p = g.p();
    if sigma_target.nrows() != p || sigma_target.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: sigma_target.nrows() });
    }
    let chol = sigma_target.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let scorer = Scorer::from_covariance(sigma_target.clone(), 1.0, 0.0, opts.clone());
    let model = scorer.score(g)?;
    // nll at n = 1 equals Σ_C F_C + p/2
    let kl = model.nll - 0.5 * p as f64 - 0.5 * logdet;
    Ok((model.params, kl.max(0.0)))
}
