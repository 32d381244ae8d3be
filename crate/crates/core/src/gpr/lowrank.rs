//! Likelihood, gradient and weights of `K = sigma_f^2 Z W Z^* + sigma_n^2 I` in `O(s^3)`
//! from `Z^* Z` (normal equations) or from the triangular factor of `Z` (QR).
//!
//! The normal-equations path works with the symmetrically scaled matrix
//! `B = sigma_f^2 W^{1/2} Z^* Z W^{1/2} + sigma_n^2 I`, which stays well
//! conditioned when entries of `W` underflow.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{cholesky_with_jitter, LikelihoodReport};
use crate::error::{GlfError, Result};
use crate::features::{FeatureModel, QrSummary, WeightDiagonal};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Weights below this are clamped on the QR path.
pub const H_FLOOR: f64 = 1e-300;

/// Gram-side data summary: `Z^* Z`, `Z^* y`, `|y|^2` and `n`.
#[derive(Debug, Clone, Copy)]
pub struct Summary<'a> {
    pub n: usize,
    pub gram: &'a DMatrix<Complex64>,
    pub zy: &'a DVector<Complex64>,
    pub yy: f64,
}

impl<'a> From<&'a FeatureModel> for Summary<'a> {
    fn from(fm: &'a FeatureModel) -> Self {
        Summary { n: fm.n, gram: &fm.gram, zy: &fm.zy, yy: fm.yy }
    }
}

#[derive(Debug, Clone)]
pub struct LowRankSolution {
    pub value: f64,
    /// `w = Z^* alpha`.
    pub w: DVector<Complex64>,
    /// `W w`.
    pub u: DVector<Complex64>,
    /// `Tr F(theta)`.
    pub tr_f: f64,
    pub ln_det: f64,
    /// `y^T alpha`.
    pub y_alpha: f64,
    /// `|alpha|^2`.
    pub alpha_norm2: f64,
    /// Order `[theta0..., sigma_f2, sigma_n2]`.
    pub trace_terms: Vec<f64>,
    pub quadratic_terms: Vec<f64>,
    /// Nodes whose weight was clamped to the floor.
    pub clamped: Vec<usize>,
}

impl LowRankSolution {
    pub fn grad(&self) -> Vec<f64> {
        self.trace_terms
            .iter()
            .zip(&self.quadratic_terms)
            .map(|(t, q)| -0.5 * t + 0.5 * q)
            .collect()
    }

    pub fn report(&self) -> LikelihoodReport {
        LikelihoodReport {
            value: self.value,
            grad: self.grad(),
            trace_terms: self.trace_terms.clone(),
            quadratic_terms: self.quadratic_terms.clone(),
        }
    }
}

fn check_inputs(s: usize, wd: &WeightDiagonal, sigma_f2: f64, sigma_n2: f64) -> Result<()> {
    if wd.h.len() != s {
        return Err(GlfError::invalid(format!("{} weights for {s} features", wd.h.len())));
    }
    if wd.h.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(GlfError::invalid("weights must be finite and nonnegative"));
    }
    if !(sigma_n2 > 0.0 && sigma_n2.is_finite()) || !(sigma_f2 >= 0.0 && sigma_f2.is_finite()) {
        return Err(GlfError::invalid("need sigma_n^2 > 0 and sigma_f^2 >= 0"));
    }
    Ok(())
}

fn finish(
    n: usize,
    s: usize,
    sigma_f2: f64,
    sigma_n2: f64,
    wd: &WeightDiagonal,
    parts: Parts,
) -> Result<LowRankSolution> {
    let Parts { w, u, tr_f, trace_sf, ln_det, y_alpha, alpha_norm2, d_diag, c_abs2, clamped } = parts;
    let value = -0.5 * y_alpha - 0.5 * ln_det - 0.5 * n as f64 * LN_2PI;
    if !value.is_finite() {
        return Err(GlfError::Numerical(format!("log likelihood is not finite ({value})")));
    }
    let p = wd.dlnh.len();
    let mut trace_terms = Vec::with_capacity(p + 2);
    let mut quadratic_terms = Vec::with_capacity(p + 2);
    for g in &wd.dlnh {
        let mut t = 0.0;
        let mut q = 0.0;
        for j in 0..s {
            // Nodes with h_j = 0 contribute nothing; guard 0 * inf.
            if wd.h[j] > 0.0 {
                t += g[j] * d_diag[j];
                q += g[j] * c_abs2[j];
            }
        }
        trace_terms.push(t);
        quadratic_terms.push(sigma_f2 * q);
    }
    trace_terms.push(trace_sf);
    quadratic_terms.push(c_abs2.iter().sum());
    trace_terms.push((n as f64 - tr_f) / sigma_n2);
    quadratic_terms.push(alpha_norm2);
    Ok(LowRankSolution {
        value,
        w,
        u,
        tr_f,
        ln_det,
        y_alpha,
        alpha_norm2,
        trace_terms,
        quadratic_terms,
        clamped,
    })
}

struct Parts {
    w: DVector<Complex64>,
    u: DVector<Complex64>,
    tr_f: f64,
    /// `Tr(K^{-1} Z W Z^*)`
    trace_sf: f64,
    ln_det: f64,
    y_alpha: f64,
    alpha_norm2: f64,
    /// `1 - sigma_n^2 (B^{-1})_jj`
    d_diag: Vec<f64>,
    /// `h_j |w_j|^2`
    c_abs2: Vec<f64>,
    clamped: Vec<usize>,
}

/// Normal-equations path on the symmetrically scaled system.
pub fn solve_normal(sum: &Summary<'_>, wd: &WeightDiagonal, sigma_f2: f64, sigma_n2: f64) -> Result<LowRankSolution> {
    let s = sum.gram.nrows();
    check_inputs(s, wd, sigma_f2, sigma_n2)?;
    let sq: Vec<f64> = wd.h.iter().map(|h| h.sqrt()).collect();
    let a = DMatrix::from_fn(s, s, |i, j| sum.gram[(i, j)] * (sq[i] * sq[j]));
    let mut b = a.clone() * Complex64::new(sigma_f2, 0.0);
    for i in 0..s {
        b[(i, i)] += sigma_n2;
    }
    let (chol, _jitter) = cholesky_with_jitter(b, "the scaled inner system")?;
    let bs = DVector::from_fn(s, |j, _| sum.zy[j] * sq[j]);
    let c = chol.solve(&bs);
    let u = DVector::from_fn(s, |j, _| c[j] * sq[j]);
    let gu = sum.gram * &u;
    let w = DVector::from_fn(s, |j, _| {
        if wd.h[j] > 1e-200 {
            c[j] / sq[j]
        } else {
            (sum.zy[j] - gu[j] * sigma_f2) / sigma_n2
        }
    });
    let l = chol.l_dirty();
    let ln_det_b: f64 = (0..s).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    let ln_det = (sum.n as f64 - s as f64) * sigma_n2.ln() + ln_det_b;
    let b_u: f64 = sum.zy.iter().zip(u.iter()).map(|(b, u)| (b.conj() * u).re).sum();
    let y_alpha = (sum.yy - sigma_f2 * b_u) / sigma_n2;
    let c_abs2: Vec<f64> = c.iter().map(|v| v.norm_sqr()).collect();
    let c_norm2: f64 = c_abs2.iter().sum();
    let alpha_norm2 = (y_alpha - sigma_f2 * c_norm2) / sigma_n2;
    let b_inv = chol.inverse();
    let d_diag: Vec<f64> = (0..s).map(|j| 1.0 - sigma_n2 * b_inv[(j, j)].re).collect();
    let tr_f: f64 = d_diag.iter().sum();
    // Tr(B^{-1} A) directly, so sigma_f^2 = 0 is allowed.
    let trace_sf: f64 = (0..s)
        .map(|i| (0..s).map(|j| (b_inv[(i, j)] * a[(j, i)]).re).sum::<f64>())
        .sum();
    finish(
        sum.n,
        s,
        sigma_f2,
        sigma_n2,
        wd,
        Parts { w, u, tr_f, trace_sf, ln_det, y_alpha, alpha_norm2, d_diag, c_abs2, clamped: Vec::new() },
    )
}

/// QR path: factor `[R_Z; (sigma_n / sigma_f) W^{-1/2}]` and read everything off the factors.
pub fn solve_qr(qr: &QrSummary, yy: f64, n: usize, wd: &WeightDiagonal, sigma_f2: f64, sigma_n2: f64) -> Result<LowRankSolution> {
    let s = qr.r.nrows();
    check_inputs(s, wd, sigma_f2, sigma_n2)?;
    if sigma_f2 <= 0.0 {
        return Err(GlfError::invalid("the QR path needs sigma_f^2 > 0"));
    }
    let clamped: Vec<usize> = (0..s).filter(|&j| wd.h[j] < H_FLOOR).collect();
    let hc: Vec<f64> = wd.h.iter().map(|h| h.max(H_FLOOR)).collect();
    let ratio = (sigma_n2 / sigma_f2).sqrt();
    let mut stack = DMatrix::<Complex64>::zeros(2 * s, s);
    stack.view_mut((0, 0), (s, s)).copy_from(&qr.r);
    for j in 0..s {
        stack[(s + j, j)] = Complex64::new(ratio / hc[j].sqrt(), 0.0);
    }
    let fact = stack.qr();
    let q_full = fact.q();
    let r_a = fact.r();
    let bad: Vec<usize> = (0..s).filter(|&j| !(r_a[(j, j)].norm() > 0.0)).collect();
    if !bad.is_empty() {
        return Err(GlfError::Conditioning(format!("zero pivots at feature nodes {bad:?}")));
    }
    let q1 = q_full.rows(0, s).into_owned();
    let t = q1.adjoint() * &qr.q;
    let x = r_a
        .solve_upper_triangular(&t)
        .ok_or_else(|| GlfError::Conditioning("triangular solve failed".into()))?;
    let u = x / Complex64::new(sigma_f2, 0.0);
    let w = DVector::from_fn(s, |j, _| u[j] / hc[j]);
    let tr_f = q1.norm_squared();
    let m = q1.adjoint() * &qr.r;
    let d_diag: Vec<f64> = (0..s)
        .map(|j| {
            let g_jj = qr.r.column(j).norm_squared();
            let gf_jj = m.column(j).norm_squared();
            sigma_f2 * wd.h[j] / sigma_n2 * (g_jj - gf_jj)
        })
        .collect();
    let ln_det = n as f64 * sigma_n2.ln() + s as f64 * sigma_f2.ln() + hc.iter().map(|h| h.ln()).sum::<f64>()
        - s as f64 * sigma_n2.ln()
        + (0..s).map(|j| 2.0 * r_a[(j, j)].norm().ln()).sum::<f64>();
    let resid = &qr.q - &qr.r * &u * Complex64::new(sigma_f2, 0.0);
    let alpha_norm2 = (qr.rho2 + resid.norm_squared()) / (sigma_n2 * sigma_n2);
    let c_abs2: Vec<f64> = (0..s).map(|j| wd.h[j] * w[j].norm_sqr()).collect();
    let c_norm2: f64 = c_abs2.iter().sum();
    let y_alpha = sigma_n2 * alpha_norm2 + sigma_f2 * c_norm2;
    let _ = yy;
    finish(
        n,
        s,
        sigma_f2,
        sigma_n2,
        wd,
        Parts { w, u, tr_f, trace_sf: tr_f / sigma_f2, ln_det, y_alpha, alpha_norm2, d_diag, c_abs2, clamped },
    )
}
