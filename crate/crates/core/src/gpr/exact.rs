//! Dense `O(n^3)` Gaussian process regression used as the reference.

use nalgebra::{DMatrix, DVector};

use super::{check_train_theta, cholesky_with_jitter, LikelihoodReport};
use crate::error::{GlfError, Result};
use crate::kernels::{HyperParams, KernelSpec};

/// Largest training set the dense path accepts.
pub const EXACT_MAX_N: usize = 5000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub alpha: DVector<f64>,
    pub predictions: Option<DVector<f64>>,
    pub log_likelihood: f64,
    pub report: LikelihoodReport,
    /// Diagonal jitter that was needed for the factorization.
    pub jitter: f64,
}

fn check_data(spec: &KernelSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    let n = x.nrows();
    if n == 0 {
        return Err(GlfError::invalid("no training rows"));
    }
    if n > EXACT_MAX_N {
        return Err(GlfError::Capacity(format!(
            "the dense baseline is limited to {EXACT_MAX_N} rows, got {n}"
        )));
    }
    if x.ncols() != spec.dim || y.len() != n {
        return Err(GlfError::invalid("training data shapes do not match"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(GlfError::invalid("training data contain non-finite values"));
    }
    Ok(())
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// `k0(x_i, x'_j)` for all pairs.
pub fn cross_kernel(spec: &KernelSpec, theta0: &[f64], a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let ra: Vec<Vec<f64>> = (0..a.nrows()).map(|i| row(a, i)).collect();
    let rb: Vec<Vec<f64>> = (0..b.nrows()).map(|i| row(b, i)).collect();
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| spec.base_kernel(theta0, &ra[i], &rb[j]))
}

/// Training covariance `sigma_f^2 K0 + sigma_n^2 I`.
pub fn training_covariance(spec: &KernelSpec, theta: &HyperParams, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut k = cross_kernel(spec, &theta.theta0, x, x) * theta.sigma_f2;
    for i in 0..x.nrows() {
        k[(i, i)] += theta.sigma_n2;
    }
    k
}

/// Dense likelihood and gradient.
pub fn exact_likelihood(spec: &KernelSpec, theta: &HyperParams, x: &DMatrix<f64>, y: &[f64]) -> Result<LikelihoodReport> {
    Ok(exact_gpr(spec, theta, x, y, None)?.report)
}

/// Dense training, optional prediction at `xt`, likelihood and gradient.
pub fn exact_gpr(
    spec: &KernelSpec,
    theta: &HyperParams,
    x: &DMatrix<f64>,
    y: &[f64],
    xt: Option<&DMatrix<f64>>,
) -> Result<ExactResult> {
    check_train_theta(spec, theta)?;
    check_data(spec, x, y)?;
    let n = x.nrows();
    let p = spec.n_theta0();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let mut k0 = DMatrix::<f64>::zeros(n, n);
    let mut dk: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); p];
    for j in 0..n {
        for i in j..n {
            let (k, g) = spec.base_kernel_grad(&theta.theta0, &rows[i], &rows[j]);
            k0[(i, j)] = k;
            k0[(j, i)] = k;
            for (m, gm) in dk.iter_mut().zip(g) {
                m[(i, j)] = gm;
                m[(j, i)] = gm;
            }
        }
    }
    let mut kt = &k0 * theta.sigma_f2;
    for i in 0..n {
        kt[(i, i)] += theta.sigma_n2;
    }
    let (chol, jitter) = cholesky_with_jitter(kt, "the dense kernel matrix")?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let l = chol.l_dirty();
    let ln_det: f64 = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let value = -0.5 * yv.dot(&alpha) - 0.5 * ln_det - 0.5 * n as f64 * LN_2PI;
    if !value.is_finite() {
        return Err(GlfError::Numerical("dense log likelihood is not finite".into()));
    }
    let k_inv = chol.inverse();
    let frob = |a: &DMatrix<f64>, b: &DMatrix<f64>| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
    let mut trace_terms = Vec::with_capacity(p + 2);
    let mut quadratic_terms = Vec::with_capacity(p + 2);
    for m in &dk {
        trace_terms.push(theta.sigma_f2 * frob(&k_inv, m));
        quadratic_terms.push(theta.sigma_f2 * alpha.dot(&(m * &alpha)));
    }
    trace_terms.push(frob(&k_inv, &k0));
    quadratic_terms.push(alpha.dot(&(&k0 * &alpha)));
    trace_terms.push(k_inv.trace());
    quadratic_terms.push(alpha.norm_squared());
    let grad = trace_terms.iter().zip(&quadratic_terms).map(|(t, q)| -0.5 * t + 0.5 * q).collect();
    let predictions = match xt {
        Some(xt) => {
            if xt.ncols() != spec.dim {
                return Err(GlfError::invalid("test inputs have the wrong dimension"));
            }
            Some(cross_kernel(spec, &theta.theta0, xt, x) * &alpha * theta.sigma_f2)
        }
        None => None,
    };
    Ok(ExactResult {
        alpha,
        predictions,
        log_likelihood: value,
        report: LikelihoodReport { value, grad, trace_terms, quadratic_terms },
        jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    #[test]
    fn single_point() {
        let spec = KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap();
        let th = HyperParams::new(vec![0.5], 2.0, 0.5);
        let x = DMatrix::from_element(1, 1, 0.3);
        let r = exact_gpr(&spec, &th, &x, &[1.5], Some(&x)).unwrap();
        assert!((r.alpha[0] - 1.5 / 2.5).abs() < 1e-15);
        assert!((r.predictions.unwrap()[0] - 2.0 * 1.5 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn guard_rail() {
        let spec = KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap();
        let th = HyperParams::new(vec![0.5], 1.0, 0.5);
        let x = DMatrix::zeros(EXACT_MAX_N + 1, 1);
        let y = vec![0.0; EXACT_MAX_N + 1];
        assert!(matches!(exact_gpr(&spec, &th, &x, &y, None), Err(GlfError::Capacity(_))));
    }
}
