//! Low-rank-plus-ridge Gaussian process regression and the dense baseline.

pub mod exact;
pub mod lowrank;
pub mod rff;

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};
use crate::features::{weight_diag, FeatureModel, SolverPath};
use crate::kernels::{HyperParams, KernelSpec};
use crate::quadrature::QuadratureGrid;

pub use exact::{exact_gpr, exact_likelihood, ExactResult, EXACT_MAX_N};
pub use lowrank::{LowRankSolution, Summary};
pub use rff::{rff_fit, RffFit};

/// Log marginal likelihood with its gradient over `[theta0..., sigma_f2, sigma_n2]`.
///
/// Each gradient entry is `-trace_terms[i] / 2 + quadratic_terms[i] / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub value: f64,
    pub grad: Vec<f64>,
    pub trace_terms: Vec<f64>,
    pub quadratic_terms: Vec<f64>,
}

/// Maximum number of jitter escalations after the plain factorization fails.
pub const MAX_JITTER_STEPS: usize = 3;

/// Cholesky factorization, retrying with diagonal jitter `1e-12 * trace / n`,
/// growing 100x per step, when the matrix is not numerically positive definite.
pub(crate) fn cholesky_with_jitter<T>(m: DMatrix<T>, what: &str) -> Result<(Cholesky<T, Dyn>, f64)>
where
    T: ComplexField<RealField = f64>,
{
    let n = m.nrows();
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Ok((ch, 0.0));
    }
    let trace: f64 = (0..n).map(|i| m[(i, i)].clone().real()).sum();
    let mut jitter = 1e-12 * trace.abs().max(f64::MIN_POSITIVE) / n.max(1) as f64;
    for _ in 0..MAX_JITTER_STEPS {
        let mut mj = m.clone();
        for i in 0..n {
            mj[(i, i)] += T::from_real(jitter);
        }
        if let Some(ch) = Cholesky::new(mj) {
            return Ok((ch, jitter));
        }
        jitter *= 100.0;
    }
    Err(GlfError::Conditioning(format!(
        "{what} is not positive definite even with jitter {:.3e}",
        jitter / 100.0
    )))
}

fn check_train_theta(spec: &KernelSpec, theta: &HyperParams) -> Result<()> {
    spec.check_hyper(theta)?;
    if theta.sigma_n2 <= 0.0 {
        return Err(GlfError::invalid("training needs sigma_n^2 > 0"));
    }
    Ok(())
}

/// Solve the feature model at `theta` on the chosen path.
pub fn solve(features: &FeatureModel, theta: &HyperParams, path: SolverPath) -> Result<LowRankSolution> {
    check_train_theta(&features.spec, theta)?;
    let wd = weight_diag(&features.spec, &features.grid, &theta.theta0)?;
    match path {
        SolverPath::NormalEquations => {
            lowrank::solve_normal(&Summary::from(features), &wd, theta.sigma_f2, theta.sigma_n2)
        }
        SolverPath::Qr => {
            let qr = features.qr.as_ref().ok_or_else(|| {
                GlfError::invalid("the QR path needs a feature model built with build_qr")
            })?;
            lowrank::solve_qr(qr, features.yy, features.n, &wd, theta.sigma_f2, theta.sigma_n2)
        }
    }
}

/// A trained low-rank model; predictions use only `W w`.
#[derive(Debug, Clone)]
pub struct GprModel {
    pub spec: KernelSpec,
    pub grid: QuadratureGrid,
    pub center: Vec<f64>,
    pub theta: HyperParams,
    pub path: SolverPath,
    /// `w = Z^* alpha`.
    pub w: DVector<Complex64>,
    /// `W w`.
    pub u: DVector<Complex64>,
    /// Present when the feature model retained `Z` and `y`.
    pub alpha: Option<DVector<f64>>,
    pub tr_f: f64,
    pub log_likelihood: f64,
}

pub fn train(features: &FeatureModel, theta: &HyperParams, path: SolverPath) -> Result<GprModel> {
    let sol = solve(features, theta, path)?;
    let alpha = match (&features.z, &features.y) {
        (Some(z), Some(y)) => {
            let zu = z * &sol.u;
            Some(DVector::from_fn(y.len(), |i, _| {
                (y[i] - theta.sigma_f2 * zu[i].re) / theta.sigma_n2
            }))
        }
        _ => None,
    };
    Ok(GprModel {
        spec: features.spec.clone(),
        grid: features.grid.clone(),
        center: features.center.clone(),
        theta: theta.clone(),
        path,
        w: sol.w,
        u: sol.u,
        alpha,
        tr_f: sol.tr_f,
        log_likelihood: sol.value,
    })
}

impl GprModel {
    /// Posterior mean `sigma_f^2 Re(Z_t W w)` at the rows of `xt`.
    pub fn predict(&self, xt: &DMatrix<f64>) -> Result<DVector<f64>> {
        if xt.ncols() != self.spec.dim {
            return Err(GlfError::invalid(format!(
                "test inputs have {} columns, model expects {}",
                xt.ncols(),
                self.spec.dim
            )));
        }
        if xt.iter().any(|v| !v.is_finite()) {
            return Err(GlfError::invalid("test inputs contain non-finite values"));
        }
        let zt = crate::features::feature_matrix(&self.spec, &self.grid, &self.center, xt);
        let pred = zt * &self.u;
        Ok(pred.map(|z| self.theta.sigma_f2 * z.re))
    }
}

pub fn log_marginal_likelihood(features: &FeatureModel, theta: &HyperParams, path: SolverPath) -> Result<f64> {
    Ok(solve(features, theta, path)?.value)
}

pub fn likelihood_gradient(features: &FeatureModel, theta: &HyperParams, path: SolverPath) -> Result<LikelihoodReport> {
    let sol = solve(features, theta, path)?;
    Ok(sol.report())
}
