//! Likelihood, gradient and prediction for the random Fourier feature baseline.
//!
//! The covariance is `sigma_f^2 Z(L) Z(L)^* + sigma_n^2 I` with unit weights, so
//! the feature matrix has to be rebuilt whenever `L` changes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{check_train_theta, cholesky_with_jitter, LikelihoodReport};
use crate::error::{GlfError, Result};
use crate::features::rff::RffModel;
use crate::kernels::HyperParams;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct RffFit {
    pub theta: HyperParams,
    /// `c = Z^* alpha`; predictions are `sigma_f^2 Re(Z_t c)`.
    pub c: DVector<Complex64>,
    pub report: LikelihoodReport,
}

/// Solve at `theta`; the gradient is filled only when `with_grad` is set.
pub fn rff_fit(model: &RffModel, theta: &HyperParams, y: &[f64], with_grad: bool) -> Result<RffFit> {
    let spec = &model.spec;
    check_train_theta(spec, theta)?;
    let n = model.x.nrows();
    if y.len() != n {
        return Err(GlfError::invalid("target length does not match the RFF inputs"));
    }
    let s = model.s();
    let (sf2, sn2) = (theta.sigma_f2, theta.sigma_n2);
    let l = spec.scales(&theta.theta0);
    let z = model.features(&l)?;
    let yv = DVector::from_iterator(n, y.iter().map(|&v| Complex64::new(v, 0.0)));
    let g = z.ad_mul(&z);
    let b = z.ad_mul(&yv);
    let mut bm = g.map(|v| v * sf2);
    for j in 0..s {
        bm[(j, j)] += sn2;
    }
    let (chol, _) = cholesky_with_jitter(bm, "RFF inner system")?;
    let c = chol.solve(&b);
    let lf = chol.l_dirty();
    let ln_det_b: f64 = (0..s).map(|j| 2.0 * lf[(j, j)].re.ln()).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let y_alpha = (yy - sf2 * b.dotc(&c).re) / sn2;
    let ln_det = (n as f64 - s as f64) * sn2.ln() + ln_det_b;
    let value = -0.5 * y_alpha - 0.5 * ln_det - 0.5 * n as f64 * LN_2PI;
    if !value.is_finite() {
        return Err(GlfError::Numerical("RFF likelihood is not finite".into()));
    }
    let p = spec.n_theta0();
    let mut report = LikelihoodReport {
        value,
        grad: vec![0.0; p + 2],
        trace_terms: vec![0.0; p + 2],
        quadratic_terms: vec![0.0; p + 2],
    };
    if with_grad {
        let binv = chol.inverse();
        let tr_gb: f64 = (0..s).flat_map(|i| (0..s).map(move |j| (i, j))).map(|(i, j)| (g[(i, j)] * binv[(j, i)]).re).sum();
        let zc = &z * &c;
        let alpha = DVector::from_fn(n, |i, _| Complex64::new((y[i] - sf2 * zc[i].re) / sn2, 0.0));
        let alpha_norm2: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
        let mut tr_l = vec![0.0; spec.dim];
        let mut quad_l = vec![0.0; spec.dim];
        for k in 0..spec.dim {
            let dz = model.grad_from(&z, &l, k);
            let m: DMatrix<Complex64> = z.ad_mul(&dz);
            let tr: f64 = (0..s).flat_map(|i| (0..s).map(move |j| (i, j))).map(|(i, j)| (binv[(i, j)] * m[(j, i)]).re).sum();
            let da = dz.ad_mul(&alpha);
            tr_l[k] = 2.0 * sf2 * tr;
            quad_l[k] = 2.0 * sf2 * da.dotc(&c).re;
        }
        if spec.anisotropic {
            report.trace_terms[..p].copy_from_slice(&tr_l);
            report.quadratic_terms[..p].copy_from_slice(&quad_l);
        } else {
            report.trace_terms[0] = tr_l.iter().sum();
            report.quadratic_terms[0] = quad_l.iter().sum();
        }
        report.trace_terms[p] = tr_gb;
        report.quadratic_terms[p] = c.norm_squared();
        report.trace_terms[p + 1] = (n as f64 - sf2 * tr_gb) / sn2;
        report.quadratic_terms[p + 1] = alpha_norm2;
        for i in 0..p + 2 {
            report.grad[i] = -0.5 * report.trace_terms[i] + 0.5 * report.quadratic_terms[i];
        }
    }
    Ok(RffFit { theta: theta.clone(), c, report })
}

impl RffFit {
    pub fn predict(&self, model: &RffModel, xt: &DMatrix<f64>) -> Result<DVector<f64>> {
        let l = model.spec.scales(&self.theta.theta0);
        let zt = model.features_at(xt, &l)?;
        Ok((zt * &self.c).map(|v| self.theta.sigma_f2 * v.re))
    }
}
