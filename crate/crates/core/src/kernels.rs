//! Kernel families, their spectral densities and decay-class metadata.
//!
//! Fourier families use the convention `k0(x - x') = int p(eta) e^{-i (x-x')^T eta} d eta`
//! with `p` a probability density. The reciprocal semigroup kernel uses
//! `k0(x, x') = int_{eta >= 0} p(eta) e^{-eta^T (x + x')} d eta`.
//!
//! The Cauchy pair keeps its unnormalized scaling: `k0(r) = 2^d prod l_k / (l_k^2 + r_k^2)`
//! with `p(eta) = e^{-|L eta|_1}`, `L = diag(l)`. These are exact transforms of each
//! other, so `p` has total mass `prod 2 / l_k = k0(0)` rather than one, and
//! `sigma_f^2` is not the marginal variance for this family.

use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};
use crate::quadrature::DomainKind;
use crate::special::{ln_bessel_k, ln_gamma};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Matern { nu: f64 },
    Laplacian,
    Cauchy,
    ReciprocalSemigroup,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern { .. } => "matern",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Cauchy => "cauchy",
            KernelFamily::ReciprocalSemigroup => "semigroup",
        }
    }

    /// Parse a family name; `nu` is required for Matérn.
    pub fn parse(name: &str, nu: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" | "se" => Ok(KernelFamily::Gaussian),
            "matern" => {
                let nu = nu.ok_or_else(|| GlfError::invalid("matern kernel needs nu"))?;
                Ok(KernelFamily::Matern { nu })
            }
            "laplacian" => Ok(KernelFamily::Laplacian),
            "cauchy" => Ok(KernelFamily::Cauchy),
            "semigroup" | "reciprocal_semigroup" => Ok(KernelFamily::ReciprocalSemigroup),
            other => Err(GlfError::invalid(format!("unknown kernel family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// `phi(x, eta) = e^{-i x^T eta}`
    Fourier,
    /// `phi(x, eta) = e^{-eta^T x}`
    ExponentialDecay,
}

/// A kernel family on `R^d` together with the data bounding box widths `R`.
///
/// The data are assumed to lie in `prod [-R_k/2, R_k/2]` (after centering) for
/// Fourier families and in `prod [0, R_k]` for the semigroup family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub dim: usize,
    pub anisotropic: bool,
    pub bounding_box: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Lengthscales (one, or one per dimension), or the semigroup `lambda`.
    pub theta0: Vec<f64>,
    pub sigma_f2: f64,
    pub sigma_n2: f64,
}

impl HyperParams {
    pub fn new(theta0: Vec<f64>, sigma_f2: f64, sigma_n2: f64) -> Self {
        HyperParams { theta0, sigma_f2, sigma_n2 }
    }

    /// Flat layout `[theta0..., sigma_f2, sigma_n2]` shared by gradients and the optimizer.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.theta0.clone();
        v.push(self.sigma_f2);
        v.push(self.sigma_n2);
        v
    }

    pub fn from_vec(v: &[f64]) -> Self {
        let p = v.len();
        assert!(p >= 3, "hyperparameter vector too short");
        HyperParams {
            theta0: v[..p - 2].to_vec(),
            sigma_f2: v[p - 2],
            sigma_n2: v[p - 1],
        }
    }
}

/// Box constraints on the hyperparameters.
///
/// The worst-case corner used by the bounds (and as the optimizer start) is
/// the smallest `theta0`, the largest `sigma_f2` and the smallest `sigma_n2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperDomain {
    pub theta0_lower: Vec<f64>,
    pub theta0_upper: Vec<f64>,
    pub sigma_f2_lower: f64,
    pub sigma_f2_upper: f64,
    pub sigma_n2_lower: f64,
    pub sigma_n2_upper: f64,
}

impl HyperDomain {
    /// A domain around the corner `(theta0, sigma_f0^2, sigma_n0^2)` with default widths:
    /// `theta0` up to 100x, `sigma_f^2` down to 1e-4x, `sigma_n^2` up to 1e4x.
    pub fn from_corner(theta0: Vec<f64>, sigma_f2: f64, sigma_n2: f64) -> Self {
        HyperDomain {
            theta0_upper: theta0.iter().map(|t| t * 100.0).collect(),
            theta0_lower: theta0,
            sigma_f2_lower: sigma_f2 * 1e-4,
            sigma_f2_upper: sigma_f2,
            sigma_n2_lower: sigma_n2,
            sigma_n2_upper: sigma_n2 * 1e4,
        }
    }

    pub fn corner(&self) -> HyperParams {
        HyperParams {
            theta0: self.theta0_lower.clone(),
            sigma_f2: self.sigma_f2_upper,
            sigma_n2: self.sigma_n2_lower,
        }
    }

    pub fn lower(&self) -> Vec<f64> {
        let mut v = self.theta0_lower.clone();
        v.push(self.sigma_f2_lower);
        v.push(self.sigma_n2_lower);
        v
    }

    pub fn upper(&self) -> Vec<f64> {
        let mut v = self.theta0_upper.clone();
        v.push(self.sigma_f2_upper);
        v.push(self.sigma_n2_upper);
        v
    }

    pub fn validate(&self, spec: &KernelSpec) -> Result<()> {
        if self.theta0_lower.len() != spec.n_theta0() || self.theta0_upper.len() != spec.n_theta0() {
            return Err(GlfError::invalid(format!(
                "domain has {} kernel parameters, kernel expects {}",
                self.theta0_lower.len(),
                spec.n_theta0()
            )));
        }
        for (lo, hi) in self.lower().iter().zip(self.upper()) {
            if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && *lo <= hi) {
                return Err(GlfError::invalid(format!(
                    "hyperparameter bounds must satisfy 0 < lower <= upper (got {lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &HyperParams) -> bool {
        let v = theta.to_vec();
        let (lo, hi) = (self.lower(), self.upper());
        v.len() == lo.len() && v.iter().zip(lo.iter().zip(&hi)).all(|(x, (a, b))| a <= x && x <= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    /// `p <= C prod 1 / (1 + L_k^2 eta_k^2)`
    Poly,
    /// `p <= C (1 + |L eta|^2)^{-r}`
    PolyR { r: f64 },
    /// `p <= C e^{-|L eta|_1}`
    Exp1,
    /// `p <= C e^{-|L eta|^2}`
    Exp2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayClassInfo {
    pub class: DecayClass,
    pub c: f64,
    pub l: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize, anisotropic: bool, bounding_box: Vec<f64>) -> Result<Self> {
        let spec = KernelSpec { family, dim, anisotropic, bounding_box };
        spec.validate()?;
        Ok(spec)
    }

    /// Isotropic kernel on `dim` dimensions with the same box width in every dimension.
    pub fn isotropic(family: KernelFamily, dim: usize, box_width: f64) -> Result<Self> {
        Self::new(family, dim, false, vec![box_width; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(GlfError::invalid("kernel dimension must be positive"));
        }
        if self.bounding_box.len() != self.dim {
            return Err(GlfError::invalid(format!(
                "bounding box has {} entries for dimension {}",
                self.bounding_box.len(),
                self.dim
            )));
        }
        if self.bounding_box.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(GlfError::invalid("bounding box widths must be positive"));
        }
        if let KernelFamily::Matern { nu } = self.family {
            if !(nu.is_finite() && nu > 0.0) {
                return Err(GlfError::invalid(format!("matern nu must be positive, got {nu}")));
            }
        }
        if self.anisotropic && self.family == KernelFamily::ReciprocalSemigroup {
            return Err(GlfError::invalid("the semigroup kernel has a single scale parameter"));
        }
        Ok(())
    }

    pub fn feature_kind(&self) -> FeatureKind {
        match self.family {
            KernelFamily::ReciprocalSemigroup => FeatureKind::ExponentialDecay,
            _ => FeatureKind::Fourier,
        }
    }

    pub fn domain_kind(&self) -> DomainKind {
        match self.feature_kind() {
            FeatureKind::Fourier => DomainKind::SymmetricBox,
            FeatureKind::ExponentialDecay => DomainKind::PositiveBox,
        }
    }

    /// Number of kernel-shape parameters in `theta0`.
    pub fn n_theta0(&self) -> usize {
        if self.anisotropic {
            self.dim
        } else {
            1
        }
    }

    /// Per-dimension scales (the isotropic value repeated `dim` times).
    pub fn scales(&self, theta0: &[f64]) -> Vec<f64> {
        if self.anisotropic {
            theta0.to_vec()
        } else {
            vec![theta0[0]; self.dim]
        }
    }

    /// Sum per-dimension partials into the `theta0` layout.
    fn fold_grad(&self, per_dim: Vec<f64>) -> Vec<f64> {
        if self.anisotropic {
            per_dim
        } else {
            vec![per_dim.iter().sum()]
        }
    }

    pub fn check_theta0(&self, theta0: &[f64]) -> Result<()> {
        if theta0.len() != self.n_theta0() {
            return Err(GlfError::invalid(format!(
                "expected {} kernel parameters, got {}",
                self.n_theta0(),
                theta0.len()
            )));
        }
        if theta0.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(GlfError::invalid("kernel parameters must be positive and finite"));
        }
        Ok(())
    }

    /// Validate hyperparameters; `sigma_f2` and `sigma_n2` may be zero here.
    pub fn check_hyper(&self, theta: &HyperParams) -> Result<()> {
        self.check_theta0(&theta.theta0)?;
        if !(theta.sigma_f2.is_finite() && theta.sigma_f2 >= 0.0) {
            return Err(GlfError::invalid("sigma_f^2 must be nonnegative"));
        }
        if !(theta.sigma_n2.is_finite() && theta.sigma_n2 >= 0.0) {
            return Err(GlfError::invalid("sigma_n^2 must be nonnegative"));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(GlfError::invalid(format!(
                "point has dimension {}, kernel expects {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GlfError::invalid("points must be finite"));
        }
        Ok(())
    }

    /// Full kernel `sigma_f^2 k0(x, x') + sigma_n^2 [x == x']`.
    pub fn eval_kernel(&self, theta: &HyperParams, x: &[f64], xp: &[f64]) -> Result<f64> {
        self.check_hyper(theta)?;
        self.check_point(x)?;
        self.check_point(xp)?;
        if self.family == KernelFamily::ReciprocalSemigroup
            && x.iter().chain(xp).any(|v| *v < 0.0)
        {
            return Err(GlfError::invalid("semigroup kernel needs nonnegative inputs"));
        }
        let ridge = if x == xp { theta.sigma_n2 } else { 0.0 };
        Ok(theta.sigma_f2 * self.base_kernel(&theta.theta0, x, xp) + ridge)
    }

    /// The unit-variance kernel `k0(x, x')` without the ridge. No validation.
    pub fn base_kernel(&self, theta0: &[f64], x: &[f64], xp: &[f64]) -> f64 {
        let l = self.scales(theta0);
        match self.family {
            KernelFamily::Gaussian => {
                let q: f64 = x.iter().zip(xp).zip(&l).map(|((a, b), l)| ((a - b) / l).powi(2)).sum();
                (-0.5 * q).exp()
            }
            KernelFamily::Matern { nu } => {
                let q: f64 = x.iter().zip(xp).zip(&l).map(|((a, b), l)| ((a - b) / l).powi(2)).sum();
                matern_profile(nu, (2.0 * nu * q).sqrt()).0
            }
            KernelFamily::Laplacian => {
                let q: f64 = x.iter().zip(xp).zip(&l).map(|((a, b), l)| (a - b).abs() / l).sum();
                (-q).exp()
            }
            KernelFamily::Cauchy => x
                .iter()
                .zip(xp)
                .zip(&l)
                .map(|((a, b), l)| 2.0 * l / (l * l + (a - b).powi(2)))
                .product(),
            KernelFamily::ReciprocalSemigroup => {
                let lam = theta0[0];
                x.iter().zip(xp).map(|(a, b)| lam / (a + b + lam)).product()
            }
        }
    }

    /// `k0(x, x')` and its partial derivatives with respect to `theta0`.
    pub fn base_kernel_grad(&self, theta0: &[f64], x: &[f64], xp: &[f64]) -> (f64, Vec<f64>) {
        let l = self.scales(theta0);
        let d = self.dim;
        match self.family {
            KernelFamily::Gaussian => {
                let k = self.base_kernel(theta0, x, xp);
                let per: Vec<f64> = (0..d).map(|i| k * (x[i] - xp[i]).powi(2) / l[i].powi(3)).collect();
                (k, self.fold_grad(per))
            }
            KernelFamily::Matern { nu } => {
                let q: f64 = (0..d).map(|i| ((x[i] - xp[i]) / l[i]).powi(2)).sum();
                let u = (2.0 * nu * q).sqrt();
                let (k, dk_du) = matern_profile(nu, u);
                let per: Vec<f64> = (0..d)
                    .map(|i| {
                        if u == 0.0 {
                            0.0
                        } else {
                            dk_du * (-2.0 * nu * (x[i] - xp[i]).powi(2) / (l[i].powi(3) * u))
                        }
                    })
                    .collect();
                (k, self.fold_grad(per))
            }
            KernelFamily::Laplacian => {
                let k = self.base_kernel(theta0, x, xp);
                let per: Vec<f64> = (0..d).map(|i| k * (x[i] - xp[i]).abs() / (l[i] * l[i])).collect();
                (k, self.fold_grad(per))
            }
            KernelFamily::Cauchy => {
                let k = self.base_kernel(theta0, x, xp);
                let per: Vec<f64> = (0..d)
                    .map(|i| {
                        let r2 = (x[i] - xp[i]).powi(2);
                        k * (r2 - l[i] * l[i]) / (l[i] * (l[i] * l[i] + r2))
                    })
                    .collect();
                (k, self.fold_grad(per))
            }
            KernelFamily::ReciprocalSemigroup => {
                let lam = theta0[0];
                let k = self.base_kernel(theta0, x, xp);
                let dlog: f64 = (0..d)
                    .map(|i| {
                        let s = x[i] + xp[i];
                        s / (lam * (s + lam))
                    })
                    .sum();
                (k, vec![k * dlog])
            }
        }
    }

    /// `ln p(eta; theta0)` and `d ln p / d theta0`. Returns `-inf` outside the support.
    pub fn ln_density_grad(&self, theta0: &[f64], eta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim;
        let df = d as f64;
        let l = self.scales(theta0);
        match self.family {
            KernelFamily::Gaussian => {
                let mut lp = -0.5 * df * LN_2PI;
                let mut per = vec![0.0; d];
                for i in 0..d {
                    let le = l[i] * eta[i];
                    lp += l[i].ln() - 0.5 * le * le;
                    per[i] = 1.0 / l[i] - l[i] * eta[i] * eta[i];
                }
                (lp, self.fold_grad(per))
            }
            KernelFamily::Matern { nu } => {
                let r = nu + 0.5 * df;
                let q: f64 = (0..d).map(|i| (l[i] * eta[i]).powi(2)).sum::<f64>() / (2.0 * nu);
                let lp = ln_gamma(r) - 0.5 * df * std::f64::consts::PI.ln() - ln_gamma(nu)
                    - 0.5 * df * (2.0 * nu).ln()
                    + l.iter().map(|v| v.ln()).sum::<f64>()
                    - r * q.ln_1p();
                let per: Vec<f64> = (0..d)
                    .map(|i| 1.0 / l[i] - r * l[i] * eta[i] * eta[i] / (nu * (1.0 + q)))
                    .collect();
                (lp, self.fold_grad(per))
            }
            KernelFamily::Laplacian => {
                let mut lp = -df * std::f64::consts::PI.ln();
                let mut per = vec![0.0; d];
                for i in 0..d {
                    let le2 = (l[i] * eta[i]).powi(2);
                    lp += l[i].ln() - le2.ln_1p();
                    per[i] = 1.0 / l[i] - 2.0 * l[i] * eta[i] * eta[i] / (1.0 + le2);
                }
                (lp, self.fold_grad(per))
            }
            KernelFamily::Cauchy => {
                let mut lp = 0.0;
                let mut per = vec![0.0; d];
                for i in 0..d {
                    lp -= l[i] * eta[i].abs();
                    per[i] = -eta[i].abs();
                }
                (lp, self.fold_grad(per))
            }
            KernelFamily::ReciprocalSemigroup => {
                let lam = theta0[0];
                if eta.iter().any(|e| *e < 0.0) {
                    return (f64::NEG_INFINITY, vec![0.0]);
                }
                let s: f64 = eta.iter().sum();
                (df * lam.ln() - lam * s, vec![df / lam - s])
            }
        }
    }

    /// Spectral density `p(eta; theta0)`.
    pub fn spectral_density(&self, theta0: &[f64], eta: &[f64]) -> f64 {
        self.ln_density_grad(theta0, eta).0.exp()
    }

    /// `d p / d theta0` at `eta`.
    pub fn density_grad(&self, theta0: &[f64], eta: &[f64]) -> Vec<f64> {
        let (lp, g) = self.ln_density_grad(theta0, eta);
        let p = lp.exp();
        g.into_iter().map(|v| p * v).collect()
    }

    /// Decay-class constants at the worst-case corner of `domain`.
    pub fn decay_class(&self, domain: &HyperDomain) -> Result<DecayClassInfo> {
        self.validate()?;
        domain.validate(self)?;
        let corner = domain.corner();
        let l = self.scales(&corner.theta0);
        let df = self.dim as f64;
        let prod_l: f64 = l.iter().product();
        Ok(match self.family {
            KernelFamily::Gaussian => DecayClassInfo {
                class: DecayClass::Exp2,
                c: (-0.5 * df * LN_2PI).exp() * prod_l,
                l: l.iter().map(|v| v / 2f64.sqrt()).collect(),
            },
            KernelFamily::Matern { nu } => DecayClassInfo {
                class: DecayClass::PolyR { r: nu + 0.5 * df },
                c: (ln_gamma(nu + 0.5 * df) - ln_gamma(nu)
                    - 0.5 * df * (2.0 * std::f64::consts::PI * nu).ln())
                .exp()
                    * prod_l,
                l: l.iter().map(|v| v / (2.0 * nu).sqrt()).collect(),
            },
            KernelFamily::Laplacian => DecayClassInfo {
                class: DecayClass::Poly,
                c: std::f64::consts::PI.powf(-df) * prod_l,
                l,
            },
            KernelFamily::Cauchy => DecayClassInfo {
                class: DecayClass::Exp1,
                c: 1.0,
                l,
            },
            KernelFamily::ReciprocalSemigroup => DecayClassInfo {
                class: DecayClass::Exp1,
                c: prod_l,
                l,
            },
        })
    }
}

/// Matérn radial profile `k(u) = 2^{1-nu}/Gamma(nu) u^nu K_nu(u)` and `dk/du`.
pub fn matern_profile(nu: f64, u: f64) -> (f64, f64) {
    let e = (-u).exp();
    if nu == 0.5 {
        return (e, -e);
    }
    if nu == 1.5 {
        return ((1.0 + u) * e, -u * e);
    }
    if nu == 2.5 {
        return ((1.0 + u + u * u / 3.0) * e, -u * (1.0 + u) / 3.0 * e);
    }
    if nu == 3.5 {
        return (
            (1.0 + u + 0.4 * u * u + u * u * u / 15.0) * e,
            -(u / 15.0) * (3.0 + 3.0 * u + u * u) * e,
        );
    }
    if u == 0.0 {
        // k'(0) = 0 for nu > 1/2; the cusp case nu <= 1/2 has no finite slope.
        let slope = if nu > 0.5 { 0.0 } else { f64::NEG_INFINITY };
        return (1.0, slope);
    }
    let ln_c = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu);
    let ln_u = u.ln();
    let k = (ln_c + nu * ln_u + ln_bessel_k(nu, u)).exp();
    // d/du [u^nu K_nu(u)] = -u^nu K_{nu-1}(u)
    let dk = -(ln_c + nu * ln_u + ln_bessel_k(nu - 1.0, u)).exp();
    (k.min(1.0), dk)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss1() -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap()
    }

    #[test]
    fn gaussian_values() {
        let s = gauss1();
        let th = HyperParams::new(vec![1.0], 1.0, 0.0);
        let v = s.eval_kernel(&th, &[0.3], &[1.3]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        let th = HyperParams::new(vec![0.7], 2.0, 0.5);
        assert_eq!(s.eval_kernel(&th, &[0.3], &[0.3]).unwrap(), 2.5);
        let p0 = s.spectral_density(&[1.0], &[0.0]);
        assert!((p0 - 0.398_942_280_401_432_7).abs() < 1e-15);
        let g = s.density_grad(&[1.0], &[0.0]);
        assert!((g[0] - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn matern_half_is_exponential() {
        let s = KernelSpec::isotropic(KernelFamily::Matern { nu: 0.5 }, 1, 2.0).unwrap();
        let th = HyperParams::new(vec![1.0], 1.0, 0.0);
        let v = s.eval_kernel(&th, &[0.0], &[2.0]).unwrap();
        assert!((v - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn matern_general_matches_closed_forms() {
        // The Bessel path evaluated at orders that have closed forms.
        for &nu in &[0.5, 1.5, 2.5, 3.5] {
            for &u in &[1e-3, 0.2, 1.0, 4.0, 20.0] {
                let (k, dk) = matern_profile(nu, u);
                let ln_c = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu);
                let kb = (ln_c + nu * u.ln() + ln_bessel_k(nu, u)).exp();
                let dkb = -(ln_c + nu * u.ln() + ln_bessel_k(nu - 1.0, u)).exp();
                assert!((k - kb).abs() < 1e-12 * k.max(1e-300), "nu={nu} u={u}");
                assert!((dk - dkb).abs() < 1e-12 * dk.abs().max(1e-300), "nu={nu} u={u}");
            }
        }
    }

    #[test]
    fn laplacian_density_at_zero() {
        let s = KernelSpec::isotropic(KernelFamily::Laplacian, 1, 2.0).unwrap();
        assert!((s.spectral_density(&[1.0], &[0.0]) - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
    }

    #[test]
    fn semigroup_density() {
        let s = KernelSpec::isotropic(KernelFamily::ReciprocalSemigroup, 1, 1.0).unwrap();
        assert_eq!(s.density_grad(&[1.0], &[0.0]), vec![1.0]);
        assert_eq!(s.spectral_density(&[1.0], &[-0.1]), 0.0);
        let th = HyperParams::new(vec![2.0], 1.0, 0.0);
        assert!(s.eval_kernel(&th, &[-1.0], &[0.0]).is_err());
        let v = s.eval_kernel(&th, &[0.5], &[1.5]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decay_class_corners() {
        let g = gauss1();
        let dc = g.decay_class(&HyperDomain::from_corner(vec![1.0], 1.0, 1.0)).unwrap();
        assert_eq!(dc.class, DecayClass::Exp2);
        assert!((dc.c - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((dc.l[0] - 0.5f64.sqrt()).abs() < 1e-15);

        let m = KernelSpec::isotropic(KernelFamily::Matern { nu: 2.5 }, 1, 2.0).unwrap();
        let dc = m.decay_class(&HyperDomain::from_corner(vec![1.0], 1.0, 1.0)).unwrap();
        assert_eq!(dc.class, DecayClass::PolyR { r: 3.0 });
        assert!((dc.l[0] - 0.2f64.sqrt()).abs() < 1e-15);

        let sg = KernelSpec::isotropic(KernelFamily::ReciprocalSemigroup, 1, 1.0).unwrap();
        let dc = sg.decay_class(&HyperDomain::from_corner(vec![2.0], 1.0, 1.0)).unwrap();
        assert_eq!(dc.class, DecayClass::Exp1);
        assert_eq!(dc.c, 2.0);
        assert_eq!(dc.l, vec![2.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(KernelSpec::isotropic(KernelFamily::Matern { nu: 0.0 }, 1, 1.0).is_err());
        let s = gauss1();
        assert!(s.eval_kernel(&HyperParams::new(vec![-1.0], 1.0, 0.1), &[0.0], &[0.0]).is_err());
        assert!(s.eval_kernel(&HyperParams::new(vec![1.0], -1.0, 0.1), &[0.0], &[0.0]).is_err());
    }
}
