//! Hyperparameter learning: box-constrained ascent of the log marginal
//! likelihood in log coordinates.
//!
//! The optimizer is projected gradient ascent with an Armijo backtracking line
//! search and an optional limited-memory quasi-Newton direction. Parameters are
//! ordered `[theta0..., sigma_f2, sigma_n2]`.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};
use crate::features::rff::RffModel;
use crate::features::{FeatureModel, SolverPath};
use crate::gpr::{exact_likelihood, likelihood_gradient, log_marginal_likelihood, rff_fit};
use crate::kernels::{HyperDomain, HyperParams, KernelSpec};

/// A differentiable objective to maximize. `evaluate` returns the value and the
/// gradient with respect to the natural (not log) parameters.
pub trait Objective {
    fn evaluate(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Value only; defaults to a full evaluation.
    fn value(&mut self, theta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(theta)?.0)
    }

    /// Feature matrices built so far by this objective.
    fn feature_builds(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Glf,
    Rff,
    Exact,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Glf => "glf",
            Backend::Rff => "rff",
            Backend::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "glf" => Ok(Backend::Glf),
            "rff" => Ok(Backend::Rff),
            "exact" => Ok(Backend::Exact),
            other => Err(GlfError::invalid(format!("unknown backend '{other}'"))),
        }
    }
}

/// Gauss-Legendre feature likelihood. The feature model is borrowed, so the
/// gram matrix built once before learning is reused by every evaluation.
pub struct GlfObjective<'a> {
    pub features: &'a FeatureModel,
    pub path: SolverPath,
}

impl Objective for GlfObjective<'_> {
    fn evaluate(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = likelihood_gradient(self.features, &HyperParams::from_vec(theta), self.path)?;
        Ok((r.value, r.grad))
    }

    fn value(&mut self, theta: &[f64]) -> Result<f64> {
        log_marginal_likelihood(self.features, &HyperParams::from_vec(theta), self.path)
    }
}

/// Random Fourier feature likelihood; rebuilds `Z(L)` on every call.
pub struct RffObjective<'a> {
    pub model: &'a RffModel,
    pub y: &'a [f64],
}

impl Objective for RffObjective<'_> {
    fn evaluate(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = rff_fit(self.model, &HyperParams::from_vec(theta), self.y, true)?.report;
        Ok((r.value, r.grad))
    }

    fn value(&mut self, theta: &[f64]) -> Result<f64> {
        Ok(rff_fit(self.model, &HyperParams::from_vec(theta), self.y, false)?.report.value)
    }

    fn feature_builds(&self) -> usize {
        self.model.feature_builds()
    }
}

/// Dense likelihood.
pub struct ExactObjective<'a> {
    pub spec: &'a KernelSpec,
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
}

impl Objective for ExactObjective<'_> {
    fn evaluate(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = exact_likelihood(self.spec, &HyperParams::from_vec(theta), self.x, self.y)?;
        Ok((r.value, r.grad))
    }
}

/// `-sum (ln theta_i - c_i)^2`, maximized at `theta = e^c`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub c: Vec<f64>,
}

impl Objective for QuadraticObjective {
    fn evaluate(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut v = 0.0;
        let mut g = Vec::with_capacity(theta.len());
        for (t, c) in theta.iter().zip(&self.c) {
            let r = t.ln() - c;
            v -= r * r;
            g.push(-2.0 * r / t);
        }
        Ok((v, g))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptOptions {
    pub max_iter: usize,
    /// Convergence when the projected log-gradient norm is `<= tol * (1 + |L|)`.
    pub tol: f64,
    /// Quasi-Newton memory; 0 gives plain projected gradient ascent.
    pub memory: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Largest change of any log coordinate in one step.
    pub max_log_step: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions { max_iter: 500, tol: 1e-6, memory: 6, armijo: 1e-4, max_backtracks: 40, max_log_step: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The line search could not find an increase above `1e-12` relative.
    Stalled,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptStep {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub value: f64,
    pub pg_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptTrace {
    /// Accepted iterates, starting with the initial point.
    pub steps: Vec<OptStep>,
    pub termination: Termination,
    pub wall_seconds: f64,
    pub grad_evals: usize,
    /// Feature matrices built during the optimization.
    pub feature_builds: usize,
}

impl OptTrace {
    pub fn last(&self) -> &OptStep {
        self.steps.last().expect("trace has the initial point")
    }

    /// Mean wall time per gradient evaluation.
    pub fn seconds_per_eval(&self) -> f64 {
        self.wall_seconds / self.grad_evals.max(1) as f64
    }

    /// Everything except timing, for determinism checks.
    pub fn same_path(&self, other: &OptTrace) -> bool {
        self.steps == other.steps
            && self.termination == other.termination
            && self.grad_evals == other.grad_evals
            && self.feature_builds == other.feature_builds
    }

    /// CSV with header `iter,value,pg_norm,theta_1,...,theta_p`.
    pub fn to_csv(&self) -> String {
        let p = self.steps.first().map_or(0, |s| s.theta.len());
        let mut out = String::from("iter,value,pg_norm");
        for k in 1..=p {
            out.push_str(&format!(",theta_{k}"));
        }
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!("{},{:.17e},{:.6e}", s.iter, s.value, s.pg_norm));
            for t in &s.theta {
                out.push_str(&format!(",{t:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Gradient components that can move without leaving the box.
fn projected(g: &[f64], x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            let at_lo = x[i] <= lo[i] && g[i] < 0.0;
            let at_hi = x[i] >= hi[i] && g[i] > 0.0;
            if at_lo || at_hi {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Natural coordinates, clamped so rounding in `exp` cannot leave the box.
fn natural(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter().zip(lower.iter().zip(upper)).map(|(v, (a, b))| v.exp().clamp(*a, *b)).collect()
}

/// Evaluate in log coordinates: returns `(value, d value / d ln theta)`.
fn eval_log(obj: &mut dyn Objective, theta: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    let (v, g) = obj.evaluate(&theta)?;
    if !v.is_finite() || g.iter().any(|a| !a.is_finite()) {
        return Err(GlfError::Numerical("objective is not finite".into()));
    }
    Ok((v, g.iter().zip(&theta).map(|(a, t)| a * t).collect()))
}

/// Maximize `obj` over the box `[lower, upper]` starting at `start`.
pub fn maximize(
    obj: &mut dyn Objective,
    lower: &[f64],
    upper: &[f64],
    start: &[f64],
    opts: &OptOptions,
) -> Result<(Vec<f64>, OptTrace)> {
    let p = start.len();
    if lower.len() != p || upper.len() != p {
        return Err(GlfError::invalid("bounds and start point differ in length"));
    }
    if (0..p).any(|i| !(lower[i] > 0.0 && lower[i] <= upper[i] && upper[i].is_finite())) {
        return Err(GlfError::invalid("bounds must satisfy 0 < lower <= upper < inf"));
    }
    let t0 = Instant::now();
    let builds0 = obj.feature_builds();
    let lo: Vec<f64> = lower.iter().map(|v| v.ln()).collect();
    let hi: Vec<f64> = upper.iter().map(|v| v.ln()).collect();
    let mut x: Vec<f64> = start.iter().map(|v| v.ln()).collect();
    project(&mut x, &lo, &hi);

    let (mut f, mut g) = eval_log(obj, natural(&x, lower, upper)).map_err(|e| {
        GlfError::Numerical(format!("objective failed at the initial point: {e}"))
    })?;
    let mut evals = 1;
    let mut pg = projected(&g, &x, &lo, &hi);
    let mut steps = vec![OptStep { iter: 0, theta: natural(&x, lower, upper), value: f, pg_norm: norm(&pg) }];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut termination = Termination::MaxIterations;

    for iter in 1..=opts.max_iter {
        if norm(&pg) <= opts.tol * (1.0 + f.abs()) {
            termination = Termination::Converged;
            break;
        }
        // Two-loop recursion on the minimization problem -f, restricted to free coordinates.
        let free: Vec<bool> = pg.iter().map(|v| *v != 0.0).collect();
        let mut q: Vec<f64> = pg.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..p {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..p {
                q[i] += s[i] * (a - b);
            }
        }
        let mut dir: Vec<f64> = (0..p).map(|i| if free[i] { q[i] } else { 0.0 }).collect();
        if dot(&dir, &pg) <= 0.0 || dir.iter().any(|v| !v.is_finite()) {
            dir = pg.clone();
            memory.clear();
        }
        let dmax = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if dmax > opts.max_log_step { opts.max_log_step / dmax } else { 1.0 };

        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let mut xn: Vec<f64> = (0..p).map(|i| x[i] + t * dir[i]).collect();
            project(&mut xn, &lo, &hi);
            let dx: Vec<f64> = (0..p).map(|i| xn[i] - x[i]).collect();
            if norm(&dx) == 0.0 {
                break;
            }
            let trial = eval_log(obj, natural(&xn, lower, upper));
            evals += 1;
            if let Ok((fn_, gn)) = trial {
                if fn_ >= f + opts.armijo * dot(&g, &dx) && fn_ >= f {
                    accepted = Some((xn, dx, fn_, gn));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, dx, fn_, gn)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let gain = fn_ - f;
        // Curvature pair for -f: y = -(g_new - g).
        let yv: Vec<f64> = (0..p).map(|i| g[i] - gn[i]).collect();
        let sy = dot(&dx, &yv);
        if opts.memory > 0 && sy > 1e-12 * norm(&dx) * norm(&yv) {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((dx, yv, 1.0 / sy));
        }
        x = xn;
        f = fn_;
        g = gn;
        pg = projected(&g, &x, &lo, &hi);
        steps.push(OptStep { iter, theta: natural(&x, lower, upper), value: f, pg_norm: norm(&pg) });
        if gain <= 1e-12 * (1.0 + f.abs()) && norm(&pg) > opts.tol * (1.0 + f.abs()) {
            termination = Termination::Stalled;
            break;
        }
    }
    if termination == Termination::MaxIterations && norm(&pg) <= opts.tol * (1.0 + f.abs()) {
        termination = Termination::Converged;
    }
    let trace = OptTrace {
        steps,
        termination,
        wall_seconds: t0.elapsed().as_secs_f64(),
        grad_evals: evals,
        feature_builds: obj.feature_builds() - builds0,
    };
    Ok((natural(&x, lower, upper), trace))
}

/// Learn hyperparameters over `domain`, starting from its corner.
pub fn learn(obj: &mut dyn Objective, domain: &HyperDomain, opts: &OptOptions) -> Result<(HyperParams, OptTrace)> {
    let start = domain.corner().to_vec();
    let (theta, trace) = maximize(obj, &domain.lower(), &domain.upper(), &start, opts)?;
    Ok((HyperParams::from_vec(&theta), trace))
}

/// Sweep one coordinate of `theta` over `grid`, clamped into the domain,
/// holding the others fixed.
pub fn profile_likelihood(
    obj: &mut dyn Objective,
    theta: &HyperParams,
    domain: &HyperDomain,
    coordinate: usize,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let base = theta.to_vec();
    if coordinate >= base.len() {
        return Err(GlfError::invalid("profile coordinate out of range"));
    }
    let (lo, hi) = (domain.lower(), domain.upper());
    grid.iter()
        .map(|&v| {
            let mut t = base.clone();
            t[coordinate] = v.clamp(lo[coordinate], hi[coordinate]);
            obj.value(&t)
        })
        .collect()
}
