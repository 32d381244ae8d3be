//! Gauss-Legendre feature matrices, the hyperparameter-dependent weight
//! diagonal, and the random Fourier feature baseline.

pub mod rff;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};
use crate::kernels::{FeatureKind, HyperParams, KernelSpec};
use crate::quadrature::QuadratureGrid;

pub use rff::{rff_build, RffModel};

/// Rows processed per block while streaming the Gram matrix.
const BLOCK_ROWS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Symmetrically scaled normal equations on `Z^* Z`.
    #[default]
    NormalEquations,
    /// Triangular factor of `Z` stacked with the weight diagonal.
    Qr,
}

#[derive(Debug, Clone, Default)]
pub struct FeatureOptions {
    /// Keep `Z` and `y` (needed for `alpha` and residual checks).
    pub retain_z: bool,
    /// Also build the triangular factor used by the QR path.
    pub build_qr: bool,
    /// Shift Fourier inputs by this center instead of the data midpoint.
    pub center: Option<Vec<f64>>,
}

/// Streaming QR summary of `[Z | y]`: `Z = Q R`, `q = Q^* y`, and the residual `|y - Q q|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrSummary {
    pub r: DMatrix<Complex64>,
    pub q: DVector<Complex64>,
    pub rho2: f64,
}

/// Hyperparameter-independent data summary for one quadrature grid.
#[derive(Debug, Clone)]
pub struct FeatureModel {
    pub spec: KernelSpec,
    pub grid: QuadratureGrid,
    /// Subtracted from inputs before evaluating Fourier features.
    pub center: Vec<f64>,
    pub n: usize,
    pub gram: DMatrix<Complex64>,
    pub zy: DVector<Complex64>,
    pub yy: f64,
    pub qr: Option<QrSummary>,
    pub z: Option<DMatrix<Complex64>>,
    pub y: Option<DVector<f64>>,
    /// Training rows that fall outside the kernel's bounding box.
    pub rows_outside_box: usize,
}

/// Midpoint of the data range in each column.
pub fn data_center(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.ncols())
        .map(|k| {
            let col = x.column(k);
            0.5 * (col.min() + col.max())
        })
        .collect()
}

/// One feature row `phi(x - center, eta_j)`.
pub fn feature_row(spec: &KernelSpec, grid: &QuadratureGrid, center: &[f64], x: &[f64], out: &mut [Complex64]) {
    let d = grid.dim();
    match spec.feature_kind() {
        FeatureKind::Fourier => {
            for (j, o) in out.iter_mut().enumerate() {
                let eta = &grid.nodes[j * d..(j + 1) * d];
                let phase: f64 = (0..d).map(|k| (x[k] - center[k]) * eta[k]).sum();
                *o = Complex64::new(phase.cos(), -phase.sin());
            }
        }
        FeatureKind::ExponentialDecay => {
            for (j, o) in out.iter_mut().enumerate() {
                let eta = &grid.nodes[j * d..(j + 1) * d];
                let e: f64 = (0..d).map(|k| x[k] * eta[k]).sum();
                *o = Complex64::new((-e).exp(), 0.0);
            }
        }
    }
}

/// Feature matrix for the rows of `x`.
pub fn feature_matrix(spec: &KernelSpec, grid: &QuadratureGrid, center: &[f64], x: &DMatrix<f64>) -> DMatrix<Complex64> {
    let s = grid.total();
    let mut z = DMatrix::zeros(x.nrows(), s);
    let mut row = vec![Complex64::default(); s];
    let mut xi = vec![0.0; x.ncols()];
    for l in 0..x.nrows() {
        for (k, v) in xi.iter_mut().enumerate() {
            *v = x[(l, k)];
        }
        feature_row(spec, grid, center, &xi, &mut row);
        for j in 0..s {
            z[(l, j)] = row[j];
        }
    }
    z
}

/// Insert `row` (length `s + 1`) into the upper-triangular `r` with complex Givens rotations.
fn givens_insert(r: &mut DMatrix<Complex64>, row: &mut [Complex64]) {
    let m = row.len();
    for j in 0..m {
        let b = row[j];
        if b == Complex64::default() {
            continue;
        }
        let a = r[(j, j)];
        let (c, sn) = if a == Complex64::default() {
            (0.0, Complex64::new(1.0, 0.0))
        } else {
            let abs_a = a.norm();
            let nrm = abs_a.hypot(b.norm());
            let phase = a / abs_a;
            (abs_a / nrm, phase * b.conj() / nrm)
        };
        for k in j..m {
            let rk = r[(j, k)];
            let vk = row[k];
            r[(j, k)] = rk * c + sn * vk;
            row[k] = -sn.conj() * rk + vk * c;
        }
    }
}

impl FeatureModel {
    /// Stream over the rows of `x` once, accumulating `Z^* Z`, `Z^* y` and optionally `R_Z`.
    pub fn build(spec: &KernelSpec, grid: &QuadratureGrid, x: &DMatrix<f64>, y: &[f64], opts: &FeatureOptions) -> Result<Self> {
        spec.validate()?;
        let n = x.nrows();
        let d = spec.dim;
        if x.ncols() != d || grid.dim() != d {
            return Err(GlfError::invalid(format!(
                "data has {} columns, grid {} and kernel {} dimensions",
                x.ncols(),
                grid.dim(),
                d
            )));
        }
        if y.len() != n {
            return Err(GlfError::invalid(format!("{} targets for {n} rows", y.len())));
        }
        if n == 0 {
            return Err(GlfError::invalid("no training rows"));
        }
        if grid.kind != spec.domain_kind() {
            return Err(GlfError::invalid("grid domain does not match the kernel's feature kind"));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(GlfError::invalid("training data contain non-finite values"));
        }
        let center = match spec.feature_kind() {
            FeatureKind::Fourier => match &opts.center {
                Some(c) if c.len() == d => c.clone(),
                Some(_) => return Err(GlfError::invalid("center has the wrong dimension")),
                None => data_center(x),
            },
            FeatureKind::ExponentialDecay => {
                if x.iter().any(|v| *v < 0.0) {
                    return Err(GlfError::invalid("semigroup features need nonnegative inputs"));
                }
                vec![0.0; d]
            }
        };
        let rows_outside_box = (0..n)
            .filter(|&l| {
                (0..d).any(|k| {
                    let v = x[(l, k)] - center[k];
                    let r = spec.bounding_box[k];
                    match spec.feature_kind() {
                        FeatureKind::Fourier => v.abs() > r / 2.0 * (1.0 + 1e-12),
                        FeatureKind::ExponentialDecay => v > r * (1.0 + 1e-12),
                    }
                })
            })
            .count();

        let s = grid.total();
        let mut gram = DMatrix::<Complex64>::zeros(s, s);
        let mut zy = DVector::<Complex64>::zeros(s);
        let mut r_aug = opts.build_qr.then(|| DMatrix::<Complex64>::zeros(s + 1, s + 1));
        let mut z_keep = opts.retain_z.then(|| DMatrix::<Complex64>::zeros(n, s));
        let one = Complex64::new(1.0, 0.0);
        let mut row = vec![Complex64::default(); s];
        let mut aug = vec![Complex64::default(); s + 1];
        let mut xi = vec![0.0; d];

        let mut start = 0;
        while start < n {
            let b = BLOCK_ROWS.min(n - start);
            let mut block = DMatrix::<Complex64>::zeros(b, s);
            let mut yb = DVector::<Complex64>::zeros(b);
            for i in 0..b {
                let l = start + i;
                for (k, v) in xi.iter_mut().enumerate() {
                    *v = x[(l, k)];
                }
                feature_row(spec, grid, &center, &xi, &mut row);
                for j in 0..s {
                    block[(i, j)] = row[j];
                }
                yb[i] = Complex64::new(y[l], 0.0);
                if let Some(r) = r_aug.as_mut() {
                    aug[..s].copy_from_slice(&row);
                    aug[s] = yb[i];
                    givens_insert(r, &mut aug);
                }
            }
            gram.gemm_ad(one, &block, &block, one);
            zy.gemv_ad(one, &block, &yb, one);
            if let Some(z) = z_keep.as_mut() {
                z.rows_mut(start, b).copy_from(&block);
            }
            start += b;
        }
        // Exact Hermitian symmetry despite rounding in the accumulation.
        for i in 0..s {
            gram[(i, i)].im = 0.0;
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)].conj();
            }
        }
        let qr = r_aug.map(|r| QrSummary {
            r: r.view((0, 0), (s, s)).into_owned(),
            q: r.view((0, s), (s, 1)).column(0).into_owned(),
            rho2: r[(s, s)].norm_sqr(),
        });
        Ok(FeatureModel {
            spec: spec.clone(),
            grid: grid.clone(),
            center,
            n,
            gram,
            zy,
            yy: y.iter().map(|v| v * v).sum(),
            qr,
            z: z_keep,
            y: opts.retain_z.then(|| DVector::from_column_slice(y)),
            rows_outside_box,
        })
    }

    pub fn s(&self) -> usize {
        self.grid.total()
    }

    /// Feature matrix for new inputs, consistent with the training features.
    pub fn features_for(&self, x: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
        if x.ncols() != self.spec.dim {
            return Err(GlfError::invalid(format!(
                "inputs have {} columns, model expects {}",
                x.ncols(),
                self.spec.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GlfError::invalid("inputs contain non-finite values"));
        }
        Ok(feature_matrix(&self.spec, &self.grid, &self.center, x))
    }
}

/// `h_j = w_j p(eta_j; theta0)` and `d ln h_j / d theta0_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDiagonal {
    pub h: Vec<f64>,
    /// `dlnh[i][j] = d ln h_j / d theta0_i`; finite even where `h_j` underflows.
    pub dlnh: Vec<Vec<f64>>,
}

impl WeightDiagonal {
    /// `dh[i][j] = d h_j / d theta0_i`.
    pub fn dh(&self) -> Vec<Vec<f64>> {
        self.dlnh
            .iter()
            .map(|g| g.iter().zip(&self.h).map(|(g, h)| g * h).collect())
            .collect()
    }
}

pub fn weight_diag(spec: &KernelSpec, grid: &QuadratureGrid, theta0: &[f64]) -> Result<WeightDiagonal> {
    spec.check_theta0(theta0)?;
    if grid.dim() != spec.dim {
        return Err(GlfError::invalid("grid and kernel dimensions differ"));
    }
    let s = grid.total();
    let p = spec.n_theta0();
    let mut h = Vec::with_capacity(s);
    let mut dlnh = vec![Vec::with_capacity(s); p];
    for j in 0..s {
        let (lp, g) = spec.ln_density_grad(theta0, grid.node(j));
        h.push(grid.weights[j] * lp.exp());
        for (i, gi) in g.into_iter().enumerate() {
            dlnh[i].push(gi);
        }
    }
    Ok(WeightDiagonal { h, dlnh })
}

/// `sum_j h_j phi(x, eta_j) conj(phi(x', eta_j))` before dropping the imaginary part.
pub fn approx_kernel_complex(spec: &KernelSpec, grid: &QuadratureGrid, theta0: &[f64], x: &[f64], xp: &[f64]) -> Result<Complex64> {
    let wd = weight_diag(spec, grid, theta0)?;
    let s = grid.total();
    let zero = vec![0.0; spec.dim];
    let mut a = vec![Complex64::default(); s];
    let mut b = vec![Complex64::default(); s];
    feature_row(spec, grid, &zero, x, &mut a);
    feature_row(spec, grid, &zero, xp, &mut b);
    Ok((0..s).map(|j| a[j] * b[j].conj() * wd.h[j]).sum())
}

/// Feature-kernel value `sigma_f^2 sum_j h_j phi(x, eta_j) conj(phi(x', eta_j)) + sigma_n^2 [x == x']`.
pub fn approx_kernel_eval(spec: &KernelSpec, grid: &QuadratureGrid, theta: &HyperParams, x: &[f64], xp: &[f64]) -> Result<f64> {
    spec.check_hyper(theta)?;
    if x.len() != spec.dim || xp.len() != spec.dim {
        return Err(GlfError::invalid("point dimension does not match the kernel"));
    }
    let k = approx_kernel_complex(spec, grid, &theta.theta0, x, xp)?;
    let ridge = if x == xp { theta.sigma_n2 } else { 0.0 };
    Ok(theta.sigma_f2 * k.re + ridge)
}
