//! Limited-memory BFGS with backtracking for smooth objectives on an open domain.
//!
//! The objective returns `None` outside its domain; the line search then
//! shrinks the step, so iterates never leave the region where it is defined.

use std::collections::VecDeque;

use nalgebra::DVector;

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Stop once `‖∇f‖_∞` falls below this.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { max_iter: 500, grad_tol: 1e-7, memory: 8 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    /// Gradient tolerance reached, or no descent step exists at machine precision.
    pub converged: bool,
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient, or `None`
/// outside the domain. Returns `None` when `x0` itself is outside.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: &LbfgsOptions) -> Option<Minimum>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let (mut fx, mut g) = f(&x0)?;
    let mut x = x0;
    let mut history: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let inf = |v: &DVector<f64>| v.amax();

    for iter in 0..opts.max_iter {
        let gnorm = inf(&g);
        if gnorm < opts.grad_tol || x.is_empty() {
            return Some(Minimum { x, value: fx, grad_inf_norm: gnorm, iterations: iter, converged: true });
        }
        let mut dir = two_loop(&g, &history);
        if dir.dot(&g) >= 0.0 {
            history.clear();
            dir = -&g;
        }
        let step = line_search(&mut f, &x, fx, &g, &dir, history.is_empty()).or_else(|| {
            if history.is_empty() {
                None
            } else {
                history.clear();
                line_search(&mut f, &x, fx, &g, &(-&g), true)
            }
        });
        let Some((x_new, f_new, g_new)) = step else {
            // no decrease representable: a numerical stationary point
            let converged = gnorm < opts.grad_tol.sqrt();
            return Some(Minimum { x, value: fx, grad_inf_norm: gnorm, iterations: iter, converged });
        };
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if decrease.abs() <= 1e-15 * fx.abs().max(1.0) && inf(&g) < opts.grad_tol.sqrt() {
            return Some(Minimum { grad_inf_norm: inf(&g), x, value: fx, iterations: iter + 1, converged: true });
        }
    }
    let gnorm = inf(&g);
    Some(Minimum { x, value: fx, grad_inf_norm: gnorm, iterations: opts.max_iter, converged: gnorm < opts.grad_tol })
}

fn two_loop(g: &DVector<f64>, history: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    -q
}

/// Armijo backtracking; the first trial step is 1 (clipped to unit length for
/// steepest-descent directions).
fn line_search<F>(
    f: &mut F,
    x: &DVector<f64>,
    fx: f64,
    g: &DVector<f64>,
    dir: &DVector<f64>,
    steepest: bool,
) -> Option<(DVector<f64>, f64, DVector<f64>)>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let slope = g.dot(dir);
    if !(slope < 0.0) {
        return None;
    }
    let mut t = if steepest { (1.0 / dir.norm()).min(1.0) } else { 1.0 };
    for _ in 0..60 {
        let trial = x + dir * t;
        if trial == *x {
            return None;
        }
        if let Some((ft, gt)) = f(&trial) {
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * t * slope {
                return Some((trial, ft, gt));
            }
        }
        t *= 0.5;
    }
    None
}
