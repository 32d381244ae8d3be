//! Approximation certificates: spectral-equivalence bands of kernel matrix
//! pencils, KL divergence between Gaussian priors, and probes for the
//! truncation and quadrature errors of the feature construction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};
use crate::features::approx_kernel_eval;
use crate::integrate::integrate_to_infinity;
use crate::kernels::{HyperDomain, HyperParams, KernelFamily, KernelSpec};
use crate::quadrature::{tensor_grid, DomainKind};

/// Matrices above this order are refused.
pub const MAX_ORDER: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub required_lower: f64,
    pub required_upper: f64,
    pub pass: bool,
    /// `KL(N(0, K~) || N(0, K))`.
    pub kl: f64,
    pub kl_bound: f64,
}

impl EquivalenceReport {
    pub fn key_values(&self) -> Vec<(String, String)> {
        vec![
            ("n".into(), self.n.to_string()),
            ("lambda_min".into(), format!("{:.15e}", self.lambda_min)),
            ("lambda_max".into(), format!("{:.15e}", self.lambda_max)),
            ("required_lower".into(), format!("{:.15e}", self.required_lower)),
            ("required_upper".into(), format!("{:.15e}", self.required_upper)),
            ("pass".into(), self.pass.to_string()),
            ("kl".into(), format!("{:.15e}", self.kl)),
            ("kl_bound".into(), format!("{:.15e}", self.kl_bound)),
        ]
    }
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(GlfError::invalid(format!("{what} must be a non-empty square matrix")));
    }
    if n > MAX_ORDER {
        return Err(GlfError::Capacity(format!("{what} has order {n} > {MAX_ORDER}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GlfError::invalid(format!("{what} has non-finite entries")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(GlfError::invalid(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(())
}

fn spd_factor(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    check_square(m, what)?;
    let sym = (m + m.transpose()) * 0.5;
    Cholesky::new(sym).ok_or_else(|| GlfError::invalid(format!("{what} is not positive definite")))
}

fn ln_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    let l = ch.l_dirty();
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
}

/// Generalized eigenvalues of `K~ v = lambda K v` through `K = L L^T` and the
/// symmetric matrix `L^{-1} K~ L^{-T}`.
pub fn pencil_eigenvalues(k: &DMatrix<f64>, kt: &DMatrix<f64>) -> Result<Vec<f64>> {
    let ch = spd_factor(k, "K")?;
    check_square(kt, "K~")?;
    if kt.nrows() != k.nrows() {
        return Err(GlfError::invalid("K and K~ differ in order"));
    }
    let l = ch.l();
    let a = l
        .solve_lower_triangular(kt)
        .ok_or_else(|| GlfError::Numerical("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| GlfError::Numerical("triangular solve failed".into()))?;
    let m = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Check `(1 - 1/n) K <= K~ <= (1 + 1/n) K`.
pub fn spectral_equivalence_check(k: &DMatrix<f64>, kt: &DMatrix<f64>) -> Result<EquivalenceReport> {
    let ev = pencil_eigenvalues(k, kt)?;
    let n = k.nrows();
    let nf = n as f64;
    let (lo, hi) = (ev[0], ev[n - 1]);
    let (rl, ru) = (1.0 - 1.0 / nf, 1.0 + 1.0 / nf);
    let kl = if lo > 0.0 { kl_divergence(kt, k)? } else { f64::INFINITY };
    Ok(EquivalenceReport {
        n,
        lambda_min: lo,
        lambda_max: hi,
        required_lower: rl,
        required_upper: ru,
        pass: lo >= rl && hi <= ru,
        kl,
        kl_bound: 1.0 + 2.0 / nf,
    })
}

/// `KL(N(0, S0) || N(0, S1))`.
pub fn kl_divergence(s0: &DMatrix<f64>, s1: &DMatrix<f64>) -> Result<f64> {
    kl_divergence_with_means(s0, s1, None)
}

/// `KL(N(mu0, S0) || N(mu1, S1))`; `means` is `(mu0, mu1)`.
pub fn kl_divergence_with_means(
    s0: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    means: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<f64> {
    let c0 = spd_factor(s0, "first covariance")?;
    let c1 = spd_factor(s1, "second covariance")?;
    let n = s0.nrows();
    if s1.nrows() != n {
        return Err(GlfError::invalid("covariances differ in order"));
    }
    // Tr(S1^{-1} S0) = ||L1^{-1} L0||_F^2
    let m = c1
        .l()
        .solve_lower_triangular(&c0.l())
        .ok_or_else(|| GlfError::Numerical("triangular solve failed".into()))?;
    let trace = m.norm_squared();
    let mut quad = 0.0;
    if let Some((mu0, mu1)) = means {
        if mu0.len() != n || mu1.len() != n {
            return Err(GlfError::invalid("mean vectors have the wrong length"));
        }
        let dm = mu1 - mu0;
        let v = c1
            .l()
            .solve_lower_triangular(&dm)
            .ok_or_else(|| GlfError::Numerical("triangular solve failed".into()))?;
        quad = v.norm_squared();
    }
    let kl = 0.5 * (trace + quad) + 0.5 * (ln_det(&c1) - ln_det(&c0)) - 0.5 * n as f64;
    // Mathematically nonnegative; clear rounding residue.
    Ok(kl.max(0.0))
}

/// One-dimensional spectral density of coordinate `k` for families whose
/// density factorizes over dimensions.
fn marginal_density(spec: &KernelSpec, scale: f64) -> Result<impl Fn(f64) -> f64> {
    let one = KernelSpec::isotropic(spec.family, 1, 1.0)?;
    Ok(move |eta: f64| one.spectral_density(&[scale], &[eta]))
}

/// Tail mass `P(eta outside Q_U)` of the spectral density at `theta0`.
pub fn spectral_tail_mass(spec: &KernelSpec, theta0: &[f64], u: &[f64]) -> Result<f64> {
    spec.validate()?;
    spec.check_theta0(theta0)?;
    if u.len() != spec.dim || u.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(GlfError::invalid("U must have one nonnegative entry per dimension"));
    }
    let scales = spec.scales(theta0);
    let symmetric = spec.domain_kind() == DomainKind::SymmetricBox;
    let factorizes = !matches!(spec.family, KernelFamily::Matern { .. }) || spec.dim == 1;
    if !factorizes {
        return Err(GlfError::Unsupported(
            "tail mass of a non-separable density is only computed in one dimension".into(),
        ));
    }
    // prod m_k - prod (m_k - t_k) with per-dimension masses m_k, accumulated
    // as a sum to keep small tails accurate.
    let mut inside = 1.0;
    let mut tail = 0.0;
    for k in 0..spec.dim {
        let t = if spec.dim == 1 && matches!(spec.family, KernelFamily::Matern { .. }) {
            let f = |eta: f64| spec.spectral_density(theta0, &[eta]);
            integrate_to_infinity(f, u[k], 1e-300, 1e-12).0
        } else {
            let f = marginal_density(spec, scales[k])?;
            integrate_to_infinity(f, u[k], 1e-300, 1e-12).0
        };
        let t = if symmetric { 2.0 * t } else { t };
        let m = match spec.family {
            KernelFamily::Cauchy => 2.0 / scales[k],
            _ => 1.0,
        };
        tail = tail * m + inside * t;
        inside *= m - t;
    }
    Ok(tail)
}

/// Truncation term `n sigma_n^{-2} M_R^2 P(eta outside Q_U)` at the corner
/// of `domain` (widest spectrum, smallest noise), with `M_R = 1`.
pub fn truncation_probe(spec: &KernelSpec, domain: &HyperDomain, u: &[f64], n: usize) -> Result<f64> {
    domain.validate(spec)?;
    let corner = domain.corner();
    let mass = spectral_tail_mass(spec, &corner.theta0, u)?;
    Ok(n as f64 / corner.sigma_n2 * mass)
}

/// Budget the truncation term must stay under: `1 / (2 sigma_f0^2 n)`.
pub fn truncation_budget(domain: &HyperDomain, n: usize) -> f64 {
    1.0 / (2.0 * domain.corner().sigma_f2 * n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureProbeRow {
    /// Nodes per dimension.
    pub s: usize,
    /// Largest `|k~(x, x') - k(x, x')|` over the sampled pairs.
    pub max_error: f64,
}

/// Empirical kernel error of the feature approximation for each `s` in the sweep.
pub fn quadrature_probe(
    spec: &KernelSpec,
    theta: &HyperParams,
    u: &[f64],
    s_sweep: &[usize],
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<QuadratureProbeRow>> {
    spec.check_hyper(theta)?;
    s_sweep
        .iter()
        .map(|&s| {
            let grid = tensor_grid(u, &vec![s; spec.dim], spec.domain_kind())?;
            let mut max_error: f64 = 0.0;
            for (x, xp) in pairs {
                let approx = approx_kernel_eval(spec, &grid, theta, x, xp)?;
                let exact = spec.eval_kernel(theta, x, xp)?;
                max_error = max_error.max((approx - exact).abs());
            }
            Ok(QuadratureProbeRow { s, max_error })
        })
        .collect()
}
