#![allow(dead_code)]

use glf::features::{FeatureModel, FeatureOptions, WeightDiagonal};
use glf::kernels::{KernelFamily, KernelSpec};
use glf::quadrature::{tensor_grid, QuadratureGrid};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(n, d, |_, _| r.random_range(lo..hi))
}

pub fn noisy_targets(x: &DMatrix<f64>, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..x.nrows())
        .map(|i| {
            let s: f64 = x.row(i).iter().map(|v| (3.0 * v).sin()).sum();
            s + 0.3 * (r.random::<f64>() - 0.5)
        })
        .collect()
}

pub fn model_with(spec: &KernelSpec, grid: &QuadratureGrid, x: &DMatrix<f64>, y: &[f64]) -> FeatureModel {
    let opts = FeatureOptions { retain_z: true, build_qr: true, center: None };
    FeatureModel::build(spec, grid, x, y, &opts).unwrap()
}

pub fn gauss(d: usize) -> KernelSpec {
    KernelSpec::isotropic(KernelFamily::Gaussian, d, 2.0).unwrap()
}

pub fn grid(spec: &KernelSpec, u: f64, s: usize) -> QuadratureGrid {
    tensor_grid(&vec![u; spec.dim], &vec![s; spec.dim], spec.domain_kind()).unwrap()
}

/// Likelihood and gradient of the feature kernel evaluated densely in complex
/// arithmetic, directly from the definitions.
pub fn dense_lowrank(
    z: &DMatrix<Complex64>,
    wd: &WeightDiagonal,
    sigma_f2: f64,
    sigma_n2: f64,
    y: &[f64],
) -> (f64, Vec<f64>, DVector<Complex64>) {
    let n = z.nrows();
    let c = |v: f64| Complex64::new(v, 0.0);
    let w = DMatrix::from_diagonal(&DVector::from_iterator(wd.h.len(), wd.h.iter().map(|h| c(*h))));
    let zwz = z * &w * z.adjoint();
    let mut k = &zwz * c(sigma_f2);
    for i in 0..n {
        k[(i, i)] += c(sigma_n2);
    }
    let lu = k.clone().lu();
    let k_inv = lu.try_inverse().unwrap();
    let det = k.clone().lu().determinant();
    let yv = DVector::from_iterator(n, y.iter().map(|v| c(*v)));
    let alpha = &k_inv * &yv;
    let quad = (yv.adjoint() * &alpha)[(0, 0)].re;
    let value = -0.5 * quad - 0.5 * det.norm().ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let term = |dk: &DMatrix<Complex64>| {
        let q = (alpha.adjoint() * dk * &alpha)[(0, 0)].re;
        let t = (&k_inv * dk).trace().re;
        -0.5 * t + 0.5 * q
    };
    let mut grad = Vec::new();
    for g in &wd.dlnh {
        let dw = DMatrix::from_diagonal(&DVector::from_iterator(
            g.len(),
            g.iter().zip(&wd.h).map(|(g, h)| c(g * h)),
        ));
        grad.push(term(&(z * dw * z.adjoint() * c(sigma_f2))));
    }
    grad.push(term(&zwz));
    grad.push(term(&DMatrix::identity(n, n)));
    let w_vec = z.adjoint() * &alpha;
    (value, grad, w_vec)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

pub fn rel_err_c(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
