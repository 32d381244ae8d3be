//! Random Fourier features with frequencies drawn once and rescaled smoothly by `L`.
//!
//! `Z(L) = s^{-1/2} exp(-i X L^{-1} Omega)` where the columns of `Omega` are
//! drawn from the unit-scale spectral density. The Cauchy family carries the
//! extra amplitude `prod (2 / L_k)^{1/2}` because its density is not normalized.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, Exp1, StandardNormal};

use crate::error::{GlfError, Result};
use crate::kernels::{HyperParams, KernelFamily, KernelSpec};

#[derive(Debug)]
pub struct RffModel {
    pub spec: KernelSpec,
    /// `d x s` frozen base frequencies.
    pub omega: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub seed: u64,
    builds: AtomicUsize,
}

impl Clone for RffModel {
    fn clone(&self) -> Self {
        RffModel {
            spec: self.spec.clone(),
            omega: self.omega.clone(),
            x: self.x.clone(),
            seed: self.seed,
            builds: AtomicUsize::new(self.builds.load(Ordering::Relaxed)),
        }
    }
}

/// Draw the base frequencies and keep the training inputs.
pub fn rff_build(x: &DMatrix<f64>, spec: &KernelSpec, s: usize, seed: u64) -> Result<RffModel> {
    spec.validate()?;
    if s == 0 {
        return Err(GlfError::invalid("RFF needs at least one feature"));
    }
    if x.ncols() != spec.dim {
        return Err(GlfError::invalid("data dimension does not match the kernel"));
    }
    let d = spec.dim;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut omega = DMatrix::zeros(d, s);
    match spec.family {
        KernelFamily::Gaussian => {
            for j in 0..s {
                for k in 0..d {
                    omega[(k, j)] = rng.sample(StandardNormal);
                }
            }
        }
        KernelFamily::Matern { nu } => {
            // Multivariate Student t with 2 nu degrees of freedom.
            let chi = ChiSquared::new(2.0 * nu).map_err(|e| GlfError::invalid(e.to_string()))?;
            for j in 0..s {
                let v: f64 = chi.sample(&mut rng);
                let scale = (2.0 * nu / v).sqrt();
                for k in 0..d {
                    let g: f64 = rng.sample(StandardNormal);
                    omega[(k, j)] = g * scale;
                }
            }
        }
        KernelFamily::Laplacian => {
            let cauchy = Cauchy::new(0.0, 1.0).expect("valid Cauchy parameters");
            for j in 0..s {
                for k in 0..d {
                    omega[(k, j)] = cauchy.sample(&mut rng);
                }
            }
        }
        KernelFamily::Cauchy => {
            // Standard Laplace: exponential magnitude with a random sign.
            for j in 0..s {
                for k in 0..d {
                    let e: f64 = rng.sample(Exp1);
                    omega[(k, j)] = if rng.random::<bool>() { e } else { -e };
                }
            }
        }
        KernelFamily::ReciprocalSemigroup => {
            return Err(GlfError::Unsupported(
                "random Fourier features need a shift-invariant kernel".into(),
            ))
        }
    }
    Ok(RffModel { spec: spec.clone(), omega, x: x.clone(), seed, builds: AtomicUsize::new(0) })
}

impl RffModel {
    pub fn s(&self) -> usize {
        self.omega.ncols()
    }

    /// Number of times the training feature matrix has been built.
    pub fn feature_builds(&self) -> usize {
        self.builds.load(Ordering::Relaxed)
    }

    fn check_l(&self, l: &[f64]) -> Result<()> {
        if l.len() != self.spec.dim || l.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GlfError::invalid("L must have one positive entry per dimension"));
        }
        Ok(())
    }

    /// `Z(L)` for arbitrary inputs.
    pub fn features_at(&self, x: &DMatrix<f64>, l: &[f64]) -> Result<DMatrix<Complex64>> {
        self.check_l(l)?;
        if x.ncols() != self.spec.dim {
            return Err(GlfError::invalid("input dimension does not match the kernel"));
        }
        let s = self.s();
        let d = self.spec.dim;
        let inv_sqrt_s = self.amplitude(l) / (s as f64).sqrt();
        // Scaled frequencies L^{-1} Omega, then phases X L^{-1} Omega.
        let scaled = DMatrix::from_fn(d, s, |k, j| self.omega[(k, j)] / l[k]);
        let phase = x * scaled;
        Ok(phase.map(|p| Complex64::new(p.cos() * inv_sqrt_s, -p.sin() * inv_sqrt_s)))
    }

    fn amplitude(&self, l: &[f64]) -> f64 {
        match self.spec.family {
            KernelFamily::Cauchy => l.iter().map(|v| (2.0 / v).sqrt()).product(),
            _ => 1.0,
        }
    }

    /// `Z(L)` for the training inputs; counts as one feature build.
    pub fn features(&self, l: &[f64]) -> Result<DMatrix<Complex64>> {
        self.builds.fetch_add(1, Ordering::Relaxed);
        self.features_at(&self.x, l)
    }

    /// `dZ(L)/dL_k` for the training inputs, given `Z(L)`.
    pub fn grad_from(&self, z: &DMatrix<Complex64>, l: &[f64], k: usize) -> DMatrix<Complex64> {
        let lk2 = l[k] * l[k];
        let amp = match self.spec.family {
            KernelFamily::Cauchy => -0.5 / l[k],
            _ => 0.0,
        };
        DMatrix::from_fn(z.nrows(), z.ncols(), |r, j| {
            let f = self.x[(r, k)] * self.omega[(k, j)] / lk2;
            Complex64::new(amp, f) * z[(r, j)]
        })
    }

    /// `dZ(L)/dL_k` for the training inputs.
    pub fn grad(&self, l: &[f64], k: usize) -> Result<DMatrix<Complex64>> {
        if k >= self.spec.dim {
            return Err(GlfError::invalid("dimension index out of range"));
        }
        let z = self.features_at(&self.x, l)?;
        Ok(self.grad_from(&z, l, k))
    }

    /// Feature-kernel value between two points.
    pub fn eval(&self, theta: &HyperParams, x: &[f64], xp: &[f64]) -> Result<f64> {
        self.spec.check_hyper(theta)?;
        let l = self.spec.scales(&theta.theta0);
        let a = self.features_at(&DMatrix::from_row_slice(1, x.len(), x), &l)?;
        let b = self.features_at(&DMatrix::from_row_slice(1, xp.len(), xp), &l)?;
        let k: Complex64 = (0..self.s()).map(|j| a[(0, j)] * b[(0, j)].conj()).sum();
        let ridge = if x == xp { theta.sigma_n2 } else { 0.0 };
        Ok(theta.sigma_f2 * k.re + ridge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(seed: u64) -> RffModel {
        let spec = KernelSpec::isotropic(KernelFamily::Gaussian, 2, 2.0).unwrap();
        let x = DMatrix::from_fn(6, 2, |i, k| (i as f64 * 0.3 - 0.7) * (k as f64 + 1.0) * 0.5);
        rff_build(&x, &spec, 50, seed).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(model(3).omega, model(3).omega);
        assert_ne!(model(3).omega, model(4).omega);
    }

    #[test]
    fn diagonal_is_exact() {
        let m = model(1);
        let th = HyperParams::new(vec![0.4], 1.7, 0.3);
        let v = m.eval(&th, &[0.1, 0.2], &[0.1, 0.2]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_row_has_zero_gradient() {
        let spec = KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 0.5]);
        let m = rff_build(&x, &spec, 8, 0).unwrap();
        let g = m.grad(&[0.7], 0).unwrap();
        assert!(g.row(0).iter().all(|z| z.norm() == 0.0));
        assert!(g.row(1).iter().any(|z| z.norm() > 0.0));
    }

    #[test]
    fn semigroup_unsupported() {
        let spec = KernelSpec::isotropic(KernelFamily::ReciprocalSemigroup, 1, 1.0).unwrap();
        let x = DMatrix::zeros(2, 1);
        assert!(matches!(rff_build(&x, &spec, 4, 0), Err(GlfError::Unsupported(_))));
    }

    #[test]
    fn changing_l_keeps_omega() {
        let m = model(2);
        let before = m.omega.clone();
        let z1 = m.features(&[0.5, 0.5]).unwrap();
        let z2 = m.features(&[0.9, 0.5]).unwrap();
        assert_ne!(z1, z2);
        assert_eq!(before, m.omega);
        assert_eq!(m.feature_builds(), 2);
    }
}
