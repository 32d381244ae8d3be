//! Truncation box and quadrature sizes that make the feature kernel
//! `n`-spectrally equivalent to the exact kernel over a hyperparameter box.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};
use crate::integrate::integrate_to_infinity;
use crate::kernels::{DecayClass, DecayClassInfo, FeatureKind, HyperDomain, KernelFamily, KernelSpec};
use crate::special::ln_gamma;

/// Largest `s_tot` a plan will use without an explicit override.
pub const DEFAULT_FEATURE_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyellipseParams {
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub m_r: f64,
    pub m_ub: f64,
    pub c_ub: f64,
}

/// Bernstein parameter of an ellipse with foci `+-u` and semi-minor axis `beta / 2`.
pub fn bernstein_rho(beta: f64, u: f64) -> f64 {
    let a = beta / (2.0 * u);
    a + (a * a + 1.0).sqrt()
}

/// `int_{a}^{inf} t^{d/2 - 1} (1 + t)^{-r} dt` for `a > 0`, via `t = a e^v`.
pub fn poly_r_tail(a: f64, d: usize, r: f64) -> f64 {
    let half_d = d as f64 / 2.0;
    let ln_a = a.ln();
    let f = |v: f64| {
        let lt = ln_a + v;
        (half_d * lt - r * lt.exp().ln_1p()).exp()
    };
    integrate_to_infinity(f, 0.0, 1e-300, 1e-14).0
}

fn check_budget(domain: &HyperDomain, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(GlfError::invalid("n must be positive"));
    }
    let corner = domain.corner();
    if corner.sigma_n2 <= 0.0 {
        return Err(GlfError::invalid("a positive noise variance is required for the bounds"));
    }
    Ok((corner.sigma_f2, corner.sigma_n2))
}

/// Left-hand side of the polynomial-power truncation equation at `x = min_k L_k U_k`.
fn poly_r_lhs(dc: &DecayClassInfo, r: f64, d: usize, n: f64, sigma_n2: f64, x: f64) -> f64 {
    let df = d as f64;
    let prod_l: f64 = dc.l.iter().product();
    let ln_k = 0.5 * df * PI.ln() + dc.c.ln() + n.ln()
        - (df - 1.0) * std::f64::consts::LN_2
        - ln_gamma(0.5 * df)
        - sigma_n2.ln()
        - prod_l.ln();
    ln_k.exp() * poly_r_tail(x * x, d, r)
}

/// Smallest truncation box half-widths for which the spectral tail costs at
/// most `1 / (2 sigma_f0^2 n)`, with `M_R = 1`.
pub fn compute_umin(spec: &KernelSpec, domain: &HyperDomain, n: usize) -> Result<Vec<f64>> {
    let dc = spec.decay_class(domain)?;
    let (sigma_f2, sigma_n2) = check_budget(domain, n)?;
    let d = spec.dim;
    let df = d as f64;
    let nf = n as f64;
    let m_r = 1.0;
    let x_ratio = m_r * m_r * sigma_f2 * nf * nf / sigma_n2;
    let c = dc.c;
    let u: Vec<f64> = match dc.class {
        DecayClass::Poly => {
            let base = (4.0 * c * x_ratio).powf(-1.0 / df);
            dc.l
                .iter()
                .map(|&l| {
                    let arg = l * base;
                    if arg >= PI / 2.0 {
                        Err(GlfError::BoundFailure(format!(
                            "cot argument {arg} is not below pi/2; the budget is too loose for this class"
                        )))
                    } else {
                        Ok(1.0 / (l * arg.tan()))
                    }
                })
                .collect::<Result<_>>()?
        }
        DecayClass::Exp1 => {
            let factor = match spec.feature_kind() {
                FeatureKind::Fourier => 4.0,
                FeatureKind::ExponentialDecay => 2.0,
            };
            let base = (factor * c * x_ratio).powf(1.0 / df);
            dc.l.iter().map(|&l| (base / l).ln() / l).collect()
        }
        DecayClass::Exp2 => {
            let base = (2f64.powf(2.0 - df) * c * x_ratio).powf(1.0 / df);
            dc.l
                .iter()
                .map(|&l| (PI.sqrt() / l * base).ln().sqrt() / l)
                .collect()
        }
        DecayClass::PolyR { r } => {
            let x = if d == 2 {
                let prod_l: f64 = dc.l.iter().product();
                let inner = (PI * c * x_ratio / ((r - 1.0) * prod_l)).powf(1.0 / (r - 1.0)) - 1.0;
                inner.sqrt()
            } else {
                solve_poly_r(&dc, r, d, nf, sigma_f2, sigma_n2)?
            };
            dc.l.iter().map(|&l| x / l).collect()
        }
    };
    if u.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(GlfError::BoundFailure(format!(
            "truncation bound is not positive ({u:?}); increase n or sigma_f^2 / sigma_n^2"
        )));
    }
    Ok(u)
}

/// Explicit upper bound on the root of the polynomial-power truncation equation,
/// from `int_{x^2}^inf t^{d/2-1} (1+t)^{-r} dt <= 2 x^{d-2r} / (2r - d)`.
pub fn poly_r_upper_bound(dc: &DecayClassInfo, r: f64, d: usize, n: f64, sigma_f2: f64, sigma_n2: f64) -> f64 {
    let df = d as f64;
    let prod_l: f64 = dc.l.iter().product();
    let ln_k = 0.5 * df * PI.ln() + dc.c.ln() + n.ln()
        - (df - 1.0) * std::f64::consts::LN_2
        - ln_gamma(0.5 * df)
        - sigma_n2.ln()
        - prod_l.ln();
    let ln_rhs = std::f64::consts::LN_2 + ln_k + (2.0 * sigma_f2 * n).ln() - (2.0 * r - df).ln();
    (ln_rhs / (2.0 * r - df)).exp()
}

fn solve_poly_r(dc: &DecayClassInfo, r: f64, d: usize, n: f64, sigma_f2: f64, sigma_n2: f64) -> Result<f64> {
    let target = 1.0 / (2.0 * sigma_f2 * n);
    let g = |x: f64| poly_r_lhs(dc, r, d, n, sigma_n2, x) - target;
    let mut hi = poly_r_upper_bound(dc, r, d, n, sigma_f2, sigma_n2);
    if !(hi.is_finite() && hi > 0.0) {
        return Err(GlfError::BoundFailure(format!("invalid root bracket upper end {hi}")));
    }
    // The bound is rigorous, but guard against rounding at the endpoint.
    let mut tries = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(GlfError::BoundFailure("no sign change above the root".into()));
        }
    }
    let mut lo = hi / 2.0;
    tries = 0;
    while g(lo) < 0.0 {
        lo /= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(GlfError::BoundFailure(format!(
                "tail equation has no positive root below {hi}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(hi)
}

/// Polyellipse parameters and analytic-extension bounds at the domain corner.
pub fn polyellipse_params(spec: &KernelSpec, domain: &HyperDomain, u: &[f64]) -> Result<PolyellipseParams> {
    spec.validate()?;
    domain.validate(spec)?;
    if u.len() != spec.dim || u.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(GlfError::invalid("U must have one positive entry per dimension"));
    }
    let corner = domain.corner();
    let l = spec.scales(&corner.theta0);
    let d = spec.dim;
    let df = d as f64;
    let r_box = &spec.bounding_box;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let prod_l: f64 = l.iter().product();
    match spec.family {
        KernelFamily::Gaussian => {
            let beta: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
            let rho = vec![1.0 + SQRT_2; d];
            let lu2: f64 = l.iter().zip(u).map(|(l, u)| (l * u).powi(2)).sum();
            let ln_c = prod_l.ln() - 0.5 * df * (2.0 * PI).ln() + 0.5 * lu2;
            Ok(PolyellipseParams {
                beta,
                rho,
                m_r: 1.0,
                m_ub: (0.5 * norm(u) * norm(r_box)).exp(),
                c_ub: ln_c.exp(),
            })
        }
        KernelFamily::Matern { nu } => {
            let beta: Vec<f64> = l.iter().map(|l| (2.0 * nu).sqrt() / (l * df.sqrt())).collect();
            let rho: Vec<f64> = beta.iter().zip(u).map(|(b, u)| bernstein_rho(*b, *u)).collect();
            let r = nu + 0.5 * df;
            let ln_c = ln_gamma(r) + prod_l.ln()
                - ln_gamma(nu)
                - 0.5 * df * (2.0 * nu * PI).ln()
                - r * (0.75f64).ln();
            Ok(PolyellipseParams {
                m_ub: (0.25 * norm(&beta) * norm(r_box)).exp(),
                beta,
                rho,
                m_r: 1.0,
                c_ub: ln_c.exp(),
            })
        }
        KernelFamily::ReciprocalSemigroup => {
            let lam = corner.theta0[0];
            let beta: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
            let rho = vec![1.0 + SQRT_2; d];
            let u1: f64 = u.iter().sum();
            let ur: f64 = u.iter().zip(r_box).map(|(a, b)| a * b).sum();
            Ok(PolyellipseParams {
                beta,
                rho,
                m_r: 1.0,
                m_ub: ((SQRT_2 - 1.0) / 2.0 * ur).exp(),
                c_ub: (df * lam.ln() + lam * (SQRT_2 - 1.0) * u1 / 2.0).exp(),
            })
        }
        KernelFamily::Laplacian | KernelFamily::Cauchy => Err(GlfError::Unsupported(format!(
            "the {} density has no analytic extension constants for the quadrature bound; \
             pass explicit feature counts instead",
            spec.family.name()
        ))),
    }
}

/// The quadrature-size lower bound per dimension, before rounding up.
pub fn s_bound_raw(spec: &KernelSpec, domain: &HyperDomain, n: usize, u: &[f64], pe: &PolyellipseParams) -> Result<Vec<f64>> {
    let (sigma_f2, sigma_n2) = check_budget(domain, n)?;
    let df = spec.dim as f64;
    let nf = n as f64;
    let ln_inner = (2.0 * df + 2.0) * std::f64::consts::LN_2 + 2.0 * pe.m_ub.ln() + pe.c_ub.ln()
        - sigma_n2.ln()
        + sigma_f2.ln()
        + 2.0 * nf.ln();
    Ok(u
        .iter()
        .zip(&pe.rho)
        .map(|(&uk, &rho)| (ln_inner / df + uk.ln() - (rho - 1.0).ln()) / (2.0 * rho.ln()) + 1.0)
        .collect())
}

/// Quadrature sizes per dimension: the rounded-up bound, at least 1.
pub fn compute_s(spec: &KernelSpec, domain: &HyperDomain, n: usize, u: &[f64], pe: &PolyellipseParams) -> Result<Vec<usize>> {
    Ok(s_bound_raw(spec, domain, n, u, pe)?
        .into_iter()
        .map(|v| (v.ceil().max(1.0)) as usize)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Largest `s_tot` accepted without an override.
    pub feature_cap: usize,
    /// Per-dimension sizes to use instead of the theoretical ones.
    pub s_override: Option<Vec<usize>>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions { feature_cap: DEFAULT_FEATURE_CAP, s_override: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsPlan {
    pub n: usize,
    pub decay: DecayClassInfo,
    pub u: Vec<f64>,
    pub polyellipse: Option<PolyellipseParams>,
    /// Sizes from the bound; `None` when the family has no polyellipse constants.
    pub s_theoretical: Option<Vec<usize>>,
    /// Sizes to use: the override if given, otherwise the theoretical ones.
    pub s: Vec<usize>,
    pub s_tot: usize,
    pub s_tot_theoretical: Option<usize>,
    /// The theoretical feature count is at least `n`.
    pub exceeds_n: bool,
    /// The theoretical feature count is above the cap.
    pub exceeds_cap: bool,
    pub overridden: bool,
}

fn product(s: &[usize]) -> usize {
    s.iter().fold(1usize, |a, &b| a.saturating_mul(b))
}

/// Compose the truncation bound, the polyellipse constants and the size bound.
pub fn plan(spec: &KernelSpec, domain: &HyperDomain, n: usize, opts: &PlanOptions) -> Result<BoundsPlan> {
    let decay = spec.decay_class(domain)?;
    let u = compute_umin(spec, domain, n)?;
    let (polyellipse, s_theoretical) = match polyellipse_params(spec, domain, &u) {
        Ok(pe) => {
            let s = compute_s(spec, domain, n, &u, &pe)?;
            (Some(pe), Some(s))
        }
        Err(GlfError::Unsupported(msg)) => {
            if opts.s_override.is_none() {
                return Err(GlfError::Unsupported(msg));
            }
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let s_tot_theoretical = s_theoretical.as_deref().map(product);
    if let Some(ov) = &opts.s_override {
        if ov.len() != spec.dim || ov.contains(&0) {
            return Err(GlfError::invalid("feature override needs one positive size per dimension"));
        }
    }
    let s = opts
        .s_override
        .clone()
        .or_else(|| s_theoretical.clone())
        .expect("one of override or theoretical sizes is present");
    let s_tot = product(&s);
    Ok(BoundsPlan {
        n,
        decay,
        u,
        polyellipse,
        exceeds_n: s_tot_theoretical.is_some_and(|t| t >= n),
        exceeds_cap: s_tot_theoretical.is_some_and(|t| t > opts.feature_cap),
        overridden: opts.s_override.is_some(),
        s_theoretical,
        s_tot_theoretical,
        s,
        s_tot,
    })
}

impl BoundsPlan {
    /// Structured `key=value` lines, one quantity per line.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        let join_f = |v: &[f64]| v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(",");
        let join_u = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        kv.push(("n".into(), self.n.to_string()));
        kv.push(("decay_class".into(), format!("{:?}", self.decay.class)));
        kv.push(("decay_c".into(), format!("{:.10e}", self.decay.c)));
        kv.push(("decay_l".into(), join_f(&self.decay.l)));
        kv.push(("u".into(), join_f(&self.u)));
        if let Some(pe) = &self.polyellipse {
            kv.push(("beta".into(), join_f(&pe.beta)));
            kv.push(("rho".into(), join_f(&pe.rho)));
            kv.push(("m_r".into(), format!("{:.10e}", pe.m_r)));
            kv.push(("m_ub".into(), format!("{:.10e}", pe.m_ub)));
            kv.push(("c_ub".into(), format!("{:.10e}", pe.c_ub)));
        }
        if let Some(s) = &self.s_theoretical {
            kv.push(("s_theoretical".into(), join_u(s)));
        }
        if let Some(t) = self.s_tot_theoretical {
            kv.push(("s_tot_theoretical".into(), t.to_string()));
        }
        kv.push(("s".into(), join_u(&self.s)));
        kv.push(("s_tot".into(), self.s_tot.to_string()));
        kv.push(("exceeds_n".into(), self.exceeds_n.to_string()));
        kv.push(("exceeds_cap".into(), self.exceeds_cap.to_string()));
        kv.push(("overridden".into(), self.overridden.to_string()));
        kv
    }

    /// Human-readable table with one row per dimension.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "decay class {:?}, C = {:.6e}, n = {}", self.decay.class, self.decay.c, self.n);
        let _ = writeln!(out, "{:>4} {:>14} {:>12} {:>12} {:>8}", "k", "U_k", "beta_k", "rho_k", "s_k");
        for k in 0..self.u.len() {
            let (b, r) = match &self.polyellipse {
                Some(pe) => (format!("{:.6}", pe.beta[k]), format!("{:.6}", pe.rho[k])),
                None => ("-".into(), "-".into()),
            };
            let sk = self.s_theoretical.as_ref().map_or("-".to_string(), |s| s[k].to_string());
            let _ = writeln!(out, "{:>4} {:>14.6} {:>12} {:>12} {:>8}", k + 1, self.u[k], b, r, sk);
        }
        if let Some(pe) = &self.polyellipse {
            let _ = writeln!(out, "M_R = {:.6}, M_U,beta = {:.6e}, C_U,beta = {:.6e}", pe.m_r, pe.m_ub, pe.c_ub);
        }
        if let Some(t) = self.s_tot_theoretical {
            let _ = writeln!(out, "s_tot (bound) = {t}");
        }
        let _ = writeln!(out, "s_tot (used) = {}{}", self.s_tot, if self.overridden { " (override)" } else { "" });
        if self.exceeds_n {
            let _ = writeln!(out, "note: the bound asks for at least as many features as data points");
        }
        if self.exceeds_cap {
            let _ = writeln!(out, "note: the bound exceeds the feature cap; pass an explicit size to proceed");
        }
        out
    }
}
