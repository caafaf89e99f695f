//! Linear Gaussian structural equation models: `X = Bᵀ X + N`, `N ~ N(0, Ω)`.
//!
//! `B[j][i] != 0` means `X_j -> X_i`. The precision matrix is
//! `Θ = (I - B) Ω⁻¹ (I - B)ᵀ`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Schur};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{find_mscs, DirectedGraph, SupportMatrix};

/// Spectral radius must stay below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Edge weights and noise variances of a linear SEM.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameterization {
    b: DMatrix<f64>,
    omega: DVector<f64>,
}

impl Parameterization {
    pub fn new(b: DMatrix<f64>, omega: DVector<f64>) -> Result<Self> {
        let p = omega.len();
        if b.nrows() != p || b.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: b.nrows() });
        }
        if (0..p).any(|i| b[(i, i)] != 0.0) {
            return Err(Error::InvalidParameters("B must have a zero diagonal".into()));
        }
        if omega.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameters("noise variances must be positive".into()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("B has non-finite entries".into()));
        }
        Ok(Parameterization { b, omega })
    }

    /// `B = 0`, `Ω = I`.
    pub fn identity(p: usize) -> Self {
        Parameterization { b: DMatrix::zeros(p, p), omega: DVector::from_element(p, 1.0) }
    }

    pub fn p(&self) -> usize {
        self.omega.len()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    /// Graph of the nonzero pattern of `B`.
    pub fn graph(&self) -> DirectedGraph {
        let p = self.p();
        let mut g = DirectedGraph::empty(p);
        for i in 0..p {
            for j in 0..p {
                if i != j && self.b[(i, j)] != 0.0 {
                    g.set(i, j, true);
                }
            }
        }
        g
    }

    pub fn is_stable(&self) -> bool {
        is_stable(&self.b)
    }

    /// `Σ = Θ⁻¹`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        precision_of(self)?.covariance()
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    omega: Vec<f64>,
}

impl Serialize for Parameterization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = self.p();
        ParamsJson {
            b: (0..p).map(|i| (0..p).map(|j| self.b[(i, j)]).collect()).collect(),
            omega: self.omega.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Parameterization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ParamsJson::deserialize(d)?;
        let p = raw.omega.len();
        if raw.b.len() != p || raw.b.iter().any(|r| r.len() != p) {
            return Err(serde::de::Error::custom("B must be p x p with p = len(omega)"));
        }
        let b = DMatrix::from_fn(p, p, |i, j| raw.b[i][j]);
        Parameterization::new(b, DVector::from_vec(raw.omega)).map_err(serde::de::Error::custom)
    }
}

/// Symmetric positive-definite precision matrix `Θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionMatrix {
    pub theta: DMatrix<f64>,
}

impl PrecisionMatrix {
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.theta.clone().cholesky().map(|c| c.inverse()).ok_or(Error::NotPositiveDefinite)
    }
}

/// `Q = (I - B) Ω^{-1/2}`, so that `Θ = Q Qᵀ`.
pub fn precision_factor(params: &Parameterization) -> DMatrix<f64> {
    let p = params.p();
    let mut q = DMatrix::identity(p, p) - &params.b;
    for j in 0..p {
        let s = params.omega[j].sqrt();
        q.column_mut(j).scale_mut(1.0 / s);
    }
    q
}

/// `Θ = (I - B) Ω⁻¹ (I - B)ᵀ`.
pub fn precision_of(params: &Parameterization) -> Result<PrecisionMatrix> {
    let p = params.p();
    let i_minus_b = DMatrix::identity(p, p) - &params.b;
    let det = i_minus_b.determinant();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(Error::SingularSystem);
    }
    let q = precision_factor(params);
    let mut theta = &q * q.transpose();
    // symmetrize away round-off
    theta = (&theta + theta.transpose()) * 0.5;
    Ok(PrecisionMatrix { theta })
}

/// Right-multiplies `q` by the Givens rotation `G(j, k, θ)`: in every row,
/// `v_j <- cos θ v_j + sin θ v_k` and `v_k <- -sin θ v_j + cos θ v_k`.
pub fn apply_givens(q: &DMatrix<f64>, j: usize, k: usize, theta: f64) -> Result<DMatrix<f64>> {
    let p = q.ncols();
    for v in [j, k] {
        if v >= p {
            return Err(Error::IndexOutOfRange { index: v, p });
        }
    }
    if j == k {
        return Err(Error::IndexOutOfRange { index: k, p });
    }
    let (s, c) = theta.sin_cos();
    let mut out = q.clone();
    for r in 0..q.nrows() {
        let (vj, vk) = (q[(r, j)], q[(r, k)]);
        out[(r, j)] = c * vj + s * vk;
        out[(r, k)] = -s * vj + c * vk;
    }
    Ok(out)
}

/// Angle of the rotation in the `(j, k)` plane that zeros `q[(i, j)]`.
pub fn zeroing_angle(q: &DMatrix<f64>, i: usize, j: usize, k: usize) -> f64 {
    (-q[(i, j)]).atan2(q[(i, k)])
}

/// Support pattern of a real matrix (exact zeros only).
pub fn support_of_matrix(q: &DMatrix<f64>) -> SupportMatrix {
    let p = q.nrows();
    let mut m = SupportMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            if q[(i, j)] != 0.0 {
                m.set(i, j, true);
            }
        }
    }
    m
}

/// Largest eigenvalue modulus, computed per strongly connected block of the
/// support of `B` (acyclic parts contribute zero).
pub fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    let p = b.nrows();
    let mut g = DirectedGraph::empty(p);
    for i in 0..p {
        for j in 0..p {
            if i != j && b[(i, j)] != 0.0 {
                g.set(i, j, true);
            }
        }
    }
    let mut rho: f64 = (0..p).map(|i| b[(i, i)].abs()).fold(0.0, f64::max);
    for block in find_mscs(&g).blocks {
        if block.len() < 2 {
            continue;
        }
        let sub = b.select_rows(&block).select_columns(&block);
        rho = rho.max(block_spectral_radius(sub));
    }
    rho
}

fn block_spectral_radius(m: DMatrix<f64>) -> f64 {
    let n = m.nrows();
    // QR iteration stalls on spectra symmetric about the origin; shifting by a
    // multiple of the identity breaks the tie in modulus
    let scale = m.amax();
    for shift in [0.0, 0.37, -0.61, 1.13] {
        let c = shift * scale;
        let shifted = &m + DMatrix::identity(n, n) * c;
        if let Some(schur) = Schur::try_new(shifted, 1e-14, 200) {
            return schur.complex_eigenvalues().iter().map(|z| (z - c).norm()).fold(0.0, f64::max);
        }
    }
    // Gelfand bound via repeated squaring; exact in the limit
    let mut a = m;
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..30 {
        let norm = a.norm();
        if norm == 0.0 {
            return 0.0;
        }
        a /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        a = &a * &a;
        power *= 2.0;
    }
    ((log_scale + a.norm().ln()) / power).exp()
}

/// `ρ(B) < 1 - STABILITY_MARGIN`.
pub fn is_stable(b: &DMatrix<f64>) -> bool {
    spectral_radius(b) < 1.0 - STABILITY_MARGIN
}

/// Ranges for random parameter draws.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamSampling {
    /// Weights are uniform on `[-high, -low] ∪ [low, high]`.
    pub weight_low: f64,
    pub weight_high: f64,
    pub variance_low: f64,
    pub variance_high: f64,
    pub max_rejections: usize,
}

impl Default for ParamSampling {
    fn default() -> Self {
        ParamSampling {
            weight_low: 0.2,
            weight_high: 0.8,
            variance_low: 1.0,
            variance_high: 3.0,
            max_rejections: 10_000,
        }
    }
}

/// Draws weights and variances for `g`, resampling `B` until stable.
pub fn sample_parameters<R: Rng + ?Sized>(
    g: &DirectedGraph,
    cfg: &ParamSampling,
    rng: &mut R,
) -> Result<Parameterization> {
    let p = g.p();
    let edges = g.edges();
    let omega = DVector::from_fn(p, |_, _| rng.random_range(cfg.variance_low..=cfg.variance_high));
    for _ in 0..=cfg.max_rejections {
        let mut b = DMatrix::zeros(p, p);
        for &(i, j) in &edges {
            let mag = rng.random_range(cfg.weight_low..=cfg.weight_high);
            b[(i, j)] = if rng.random_bool(0.5) { mag } else { -mag };
        }
        if is_stable(&b) {
            return Parameterization::new(b, omega);
        }
    }
    Err(Error::StabilityRejectionLimit(cfg.max_rejections))
}

/// An `n x p` sample matrix with its empirical covariance `S = XᵀX / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameters("dataset must have n >= 1 rows and p >= 1 columns".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("dataset has non-finite values".into()));
        }
        let n = x.nrows() as f64;
        let cov = x.tr_mul(&x) / n;
        Ok(Dataset { x, cov })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Reads comma-separated rows; a first line of non-numeric fields is a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => rows.push(v),
                Err(_) if lineno == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
            }
        }
        let p = rows.first().map(Vec::len).ok_or_else(|| Error::Parse("no data rows".into()))?;
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Parse(format!("row {} has {} columns, expected {p}", bad + 1, rows[bad].len())));
        }
        let n = rows.len();
        Dataset::new(DMatrix::from_fn(n, p, |t, i| rows[t][i]))
    }

    /// Writes the samples as CSV, optionally with an `x1,...,xp` header.
    pub fn to_csv<W: Write>(&self, writer: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::Io(e.to_string());
        if header {
            w.write_record((1..=self.p()).map(|i| format!("x{i}"))).map_err(to_err)?;
        }
        for t in 0..self.n() {
            w.write_record((0..self.p()).map(|i| format!("{:e}", self.x[(t, i)]))).map_err(to_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `n` i.i.d. samples by solving `(I - Bᵀ) x = ε` for each row.
pub fn sample_data<R: Rng + ?Sized>(params: &Parameterization, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameters("n must be at least 1".into()));
    }
    let p = params.p();
    let sd: Vec<f64> = params.omega.iter().map(|s| s.sqrt()).collect();
    // noise stored transposed: column t is sample t
    let mut noise_t = DMatrix::zeros(p, n);
    for t in 0..n {
        for i in 0..p {
            let z: f64 = StandardNormal.sample(rng);
            noise_t[(i, t)] = z * sd[i];
        }
    }
    let system = (DMatrix::identity(p, p) - &params.b).transpose();
    let lu = system.lu();
    if lu.determinant().abs() < 1e-12 {
        return Err(Error::SingularSystem);
    }
    let x_t = lu.solve(&noise_t).ok_or(Error::SingularSystem)?;
    Dataset::new(x_t.transpose())
}

/// Settings for [`random_dg_with`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomGraphConfig {
    pub p: usize,
    /// Bound on in-degree plus out-degree of every vertex.
    pub max_degree: usize,
    /// Longest allowed simple cycle (vertex count); 1 forces a DAG.
    pub max_cycle_len: usize,
    /// Defaults to `floor(1.2 p)`.
    pub target_edges: Option<usize>,
    /// Defaults to `50 p²` proposals.
    pub max_proposals: Option<usize>,
}

impl RandomGraphConfig {
    pub fn new(p: usize, max_degree: usize, max_cycle_len: usize) -> Self {
        RandomGraphConfig { p, max_degree, max_cycle_len, target_edges: None, max_proposals: None }
    }
}

/// Random graph with bounded degree and bounded cycle length.
pub fn random_dg<R: Rng + ?Sized>(p: usize, max_degree: usize, max_cycle_len: usize, rng: &mut R) -> Result<DirectedGraph> {
    random_dg_with(&RandomGraphConfig::new(p, max_degree, max_cycle_len), rng)
}

/// Proposes uniformly random absent edges and keeps those that respect the
/// degree and cycle-length bounds, until the target edge count or the proposal
/// budget is reached.
pub fn random_dg_with<R: Rng + ?Sized>(cfg: &RandomGraphConfig, rng: &mut R) -> Result<DirectedGraph> {
    let p = cfg.p;
    if p == 0 {
        return Err(Error::InfeasibleConstraints("p must be at least 1".into()));
    }
    let target = cfg.target_edges.unwrap_or((6 * p) / 5);
    if target > p * (p - 1) {
        return Err(Error::InfeasibleConstraints(format!("{target} edges exceed p(p-1)")));
    }
    let budget = cfg.max_proposals.unwrap_or(50 * p * p);
    let mut g = DirectedGraph::empty(p);
    if p < 2 || cfg.max_degree == 0 {
        return Ok(g);
    }
    let max_cycle = cfg.max_cycle_len.max(1);
    for _ in 0..budget {
        if g.edge_count() >= target {
            break;
        }
        let u = rng.random_range(0..p);
        let v = rng.random_range(0..p - 1);
        let v = if v >= u { v + 1 } else { v };
        if g.has_edge(u, v) || g.degree(u) >= cfg.max_degree || g.degree(v) >= cfg.max_degree {
            continue;
        }
        if closes_long_cycle(&g, u, v, max_cycle) {
            continue;
        }
        g.set(u, v, true);
    }
    Ok(g)
}

/// Would adding `u -> v` create a simple cycle with more than `max_len` vertices?
fn closes_long_cycle(g: &DirectedGraph, u: usize, v: usize, max_len: usize) -> bool {
    let p = g.p();
    let mut on_path = vec![false; p];
    on_path[v] = true;
    let mut path_len = 1;
    fn go(g: &DirectedGraph, cur: usize, target: usize, max_len: usize, on_path: &mut [bool], path_len: &mut usize) -> bool {
        if cur == target {
            return *path_len > max_len;
        }
        if *path_len >= max_len {
            // any continuation to the target is too long
            return reachable_avoiding(g, cur, target, on_path);
        }
        for w in 0..g.p() {
            if g.has_edge(cur, w) && !on_path[w] {
                on_path[w] = true;
                *path_len += 1;
                let hit = go(g, w, target, max_len, on_path, path_len);
                *path_len -= 1;
                on_path[w] = false;
                if hit {
                    return true;
                }
            }
        }
        false
    }
    go(g, v, u, max_len, &mut on_path, &mut path_len)
}

fn reachable_avoiding(g: &DirectedGraph, from: usize, to: usize, blocked: &[bool]) -> bool {
    let mut seen = blocked.to_vec();
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        for w in 0..g.p() {
            if g.has_edge(x, w) {
                if w == to {
                    return true;
                }
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    false
}

/// `KL(N(0, Σ_true) ‖ N(0, Σ_fit))`.
pub fn kl_gaussian(sigma_true: &DMatrix<f64>, sigma_fit: &DMatrix<f64>) -> Result<f64> {
    let p = sigma_true.nrows();
    if sigma_fit.nrows() != p || sigma_fit.ncols() != p || sigma_true.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: sigma_fit.nrows() });
    }
    let ct = sigma_true.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let cf = sigma_fit.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = (cf.inverse() * sigma_true).trace();
    let kl = 0.5 * (trace - p as f64 + logdet(&cf) - logdet(&ct));
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::graph::simple_cycles;

    fn g(p: usize, e: &[(usize, usize)]) -> DirectedGraph {
        DirectedGraph::from_edges(p, e).unwrap()
    }

    #[test]
    fn precision_identity() {
        let th = precision_of(&Parameterization::identity(3)).unwrap();
        assert_eq!(th.theta, DMatrix::identity(3, 3));
    }

    #[test]
    fn precision_single_edge() {
        let b = 0.7;
        let mut bm = DMatrix::zeros(2, 2);
        bm[(0, 1)] = b;
        let params = Parameterization::new(bm, DVector::from_element(2, 1.0)).unwrap();
        let th = precision_of(&params).unwrap().theta;
        let expected = DMatrix::from_row_slice(2, 2, &[1.0 + b * b, -b, -b, 1.0]);
        assert_relative_eq!(th, expected, epsilon = 1e-14);
    }

    #[test]
    fn precision_matches_factor_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let gr = random_dg(6, 4, 6, &mut rng).unwrap();
            let params = sample_parameters(&gr, &ParamSampling::default(), &mut rng).unwrap();
            let th = precision_of(&params).unwrap().theta;
            let q = precision_factor(&params);
            assert_relative_eq!(th, &q * q.transpose(), epsilon = 1e-10);
            assert!(th.clone().cholesky().is_some());
        }
    }

    #[test]
    fn params_validation() {
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 0)] = 0.1;
        assert!(Parameterization::new(b, DVector::from_element(2, 1.0)).is_err());
        assert!(Parameterization::new(DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, 0.0])).is_err());
        assert!(Parameterization::new(DMatrix::zeros(3, 3), DVector::from_element(2, 1.0)).is_err());
    }

    #[test]
    fn singular_system_detected() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let params = Parameterization::new(b, DVector::from_element(2, 1.0)).unwrap();
        assert_eq!(precision_of(&params), Err(Error::SingularSystem));
    }

    #[test]
    fn givens_examples() {
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 3.0, -1.0, 4.0, 0.5, 2.0]);
        assert_relative_eq!(apply_givens(&q, 0, 1, 0.0).unwrap(), q);

        let r = apply_givens(&q, 0, 2, std::f64::consts::FRAC_PI_2).unwrap();
        for row in 0..3 {
            assert_relative_eq!(r[(row, 0)], q[(row, 2)], epsilon = 1e-15);
            assert_relative_eq!(r[(row, 2)], -q[(row, 0)], epsilon = 1e-15);
        }

        let th = zeroing_angle(&q, 0, 0, 1);
        let z = apply_givens(&q, 0, 1, th).unwrap();
        assert!(z[(0, 0)].abs() < 1e-15);
        assert_relative_eq!(&z * z.transpose(), &q * q.transpose(), epsilon = 1e-12);
        assert!(apply_givens(&q, 1, 1, 0.3).is_err());
        assert!(apply_givens(&q, 1, 3, 0.3).is_err());
    }

    #[test]
    fn stability_examples() {
        assert!(is_stable(&DMatrix::zeros(3, 3)));
        let unstable = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 1.5, 0.0]);
        assert!(!is_stable(&unstable));
        assert_relative_eq!(spectral_radius(&unstable), 1.5, epsilon = 1e-12);
        let stable = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!(is_stable(&stable));
    }

    #[test]
    fn sampling_respects_ranges_and_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let empty = sample_parameters(&DirectedGraph::empty(3), &ParamSampling::default(), &mut rng).unwrap();
        assert!(empty.b().iter().all(|&v| v == 0.0));
        assert!(empty.omega().iter().all(|&s| (1.0..=3.0).contains(&s)));

        let two = g(2, &[(0, 1), (1, 0)]);
        for _ in 0..200 {
            let pr = sample_parameters(&two, &ParamSampling::default(), &mut rng).unwrap();
            let (a, b) = (pr.b()[(0, 1)], pr.b()[(1, 0)]);
            assert!((a * b).abs() < 1.0);
            for w in [a, b] {
                assert!((0.2..=0.8).contains(&w.abs()));
            }
        }
    }

    #[test]
    fn rejection_limit_reported() {
        let two = g(2, &[(0, 1), (1, 0)]);
        let cfg = ParamSampling { weight_low: 1.5, weight_high: 2.0, max_rejections: 5, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_parameters(&two, &cfg, &mut rng), Err(Error::StabilityRejectionLimit(5)));
    }

    #[test]
    fn white_noise_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = sample_data(&Parameterization::identity(3), 20_000, &mut rng).unwrap();
        let err = (d.covariance() - DMatrix::<f64>::identity(3, 3)).abs().max();
        assert!(err < 5.0 / (20_000f64).sqrt(), "err = {err}");
    }

    #[test]
    fn chain_covariance_converges() {
        let b = 0.6;
        let mut bm = DMatrix::zeros(2, 2);
        bm[(0, 1)] = b;
        let params = Parameterization::new(bm, DVector::from_element(2, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = sample_data(&params, 1_000_000, &mut rng).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, b, b, 1.0 + b * b]);
        for (got, w) in d.covariance().iter().zip(want.iter()) {
            assert!((got - w).abs() <= 0.01 * w.abs(), "got {got}, want {w}");
        }
        assert_relative_eq!(params.covariance().unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let gr = g(3, &[(0, 1), (1, 2), (2, 0)]);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let pr = sample_parameters(&gr, &ParamSampling::default(), &mut rng).unwrap();
            sample_data(&pr, 100, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn random_dg_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_dg(5, 0, 5, &mut rng).unwrap().edge_count(), 0);
        for _ in 0..100 {
            let gr = random_dg(5, 4, 3, &mut rng).unwrap();
            assert!((0..5).all(|v| gr.degree(v) <= 4));
            assert!(simple_cycles(&gr).iter().all(|c| c.len() <= 3));
        }
        for _ in 0..50 {
            assert!(random_dg(6, 4, 1, &mut rng).unwrap().is_acyclic());
        }
        assert!(random_dg(0, 4, 3, &mut rng).is_err());
    }

    #[test]
    fn kl_examples() {
        let i1 = DMatrix::identity(1, 1);
        assert_eq!(kl_gaussian(&i1, &i1).unwrap(), 0.0);
        let kl = kl_gaussian(&i1, &(i1.clone() * 2.0)).unwrap();
        assert_relative_eq!(kl, 0.5 * (0.5 - 1.0 + 2f64.ln()), epsilon = 1e-15);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 1.5]);
        assert!((kl_gaussian(&a, &b).unwrap() - kl_gaussian(&b, &a).unwrap()).abs() > 1e-3);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(kl_gaussian(&a, &bad), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn csv_round_trip_with_header() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = sample_data(&Parameterization::identity(3), 5, &mut rng).unwrap();
        let mut buf = Vec::new();
        d.to_csv(&mut buf, true).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x1,x2,x3\n"));
        let back = Dataset::from_csv(&buf[..]).unwrap();
        assert_eq!(back, d);
        assert!(Dataset::from_csv("1,2\n3\n".as_bytes()).is_err());
    }

    #[test]
    fn params_json_round_trip() {
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 1)] = -0.25;
        let pr = Parameterization::new(b, DVector::from_vec(vec![1.5, 2.0])).unwrap();
        let s = serde_json::to_string(&pr).unwrap();
        assert_eq!(s, r#"{"B":[[0.0,-0.25],[0.0,0.0]],"omega":[1.5,2.0]}"#);
        assert_eq!(serde_json::from_str::<Parameterization>(&s).unwrap(), pr);
    }
}
