//! Versioned JSON dumps of feature models and trained models.
//!
//! Complex values are stored as `[re, im]` pairs and matrices in column-major
//! order. Loading checks the `format` tag and `version`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};
use crate::features::{FeatureModel, QrSummary, SolverPath};
use crate::gpr::GprModel;
use crate::kernels::{HyperParams, KernelSpec};
use crate::quadrature::QuadratureGrid;

pub const FORMAT_VERSION: u32 = 1;
const FEATURE_TAG: &str = "glf-features";
const MODEL_TAG: &str = "glf-model";

fn pack(v: impl IntoIterator<Item = Complex64>) -> Vec<[f64; 2]> {
    v.into_iter().map(|z| [z.re, z.im]).collect()
}

fn unpack(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

fn square(v: &[[f64; 2]], s: usize, what: &str) -> Result<DMatrix<Complex64>> {
    if v.len() != s * s {
        return Err(GlfError::invalid(format!("{what} has {} entries, expected {}", v.len(), s * s)));
    }
    Ok(DMatrix::from_column_slice(s, s, &unpack(v)))
}

fn vector(v: &[[f64; 2]], s: usize, what: &str) -> Result<DVector<Complex64>> {
    if v.len() != s {
        return Err(GlfError::invalid(format!("{what} has {} entries, expected {s}", v.len())));
    }
    Ok(DVector::from_vec(unpack(v)))
}

fn check_header(format: &str, version: u32, expect: &str) -> Result<()> {
    if format != expect {
        return Err(GlfError::invalid(format!("expected a '{expect}' dump, found '{format}'")));
    }
    if version != FORMAT_VERSION {
        return Err(GlfError::invalid(format!("unsupported dump version {version} (this build reads {FORMAT_VERSION})")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrDump {
    pub r: Vec<[f64; 2]>,
    pub q: Vec<[f64; 2]>,
    pub rho2: f64,
}

/// Grid, gram matrix and projections; enough to learn and train without the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDump {
    pub format: String,
    pub version: u32,
    pub spec: KernelSpec,
    pub grid: QuadratureGrid,
    pub center: Vec<f64>,
    pub n: usize,
    pub yy: f64,
    pub gram: Vec<[f64; 2]>,
    pub zy: Vec<[f64; 2]>,
    pub qr: Option<QrDump>,
}

impl FeatureDump {
    pub fn from_model(m: &FeatureModel) -> Self {
        FeatureDump {
            format: FEATURE_TAG.into(),
            version: FORMAT_VERSION,
            spec: m.spec.clone(),
            grid: m.grid.clone(),
            center: m.center.clone(),
            n: m.n,
            yy: m.yy,
            gram: pack(m.gram.iter().copied()),
            zy: pack(m.zy.iter().copied()),
            qr: m.qr.as_ref().map(|q| QrDump { r: pack(q.r.iter().copied()), q: pack(q.q.iter().copied()), rho2: q.rho2 }),
        }
    }

    /// Rebuild a feature model; `Z` and `y` are not part of the dump.
    pub fn into_model(self) -> Result<FeatureModel> {
        check_header(&self.format, self.version, FEATURE_TAG)?;
        self.spec.validate()?;
        let s = self.grid.total();
        let qr = match &self.qr {
            Some(q) => Some(QrSummary { r: square(&q.r, s, "R")?, q: vector(&q.q, s, "Q^* y")?, rho2: q.rho2 }),
            None => None,
        };
        Ok(FeatureModel {
            gram: square(&self.gram, s, "gram")?,
            zy: vector(&self.zy, s, "Z^* y")?,
            spec: self.spec,
            grid: self.grid,
            center: self.center,
            n: self.n,
            yy: self.yy,
            qr,
            z: None,
            y: None,
            rows_outside_box: 0,
        })
    }
}

/// A trained model: predictions need only the grid, the center and `W w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub format: String,
    pub version: u32,
    pub spec: KernelSpec,
    pub grid: QuadratureGrid,
    pub center: Vec<f64>,
    pub theta: HyperParams,
    pub path: SolverPath,
    pub w: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
    pub tr_f: f64,
    pub log_likelihood: f64,
    /// Added back to every prediction (training mean when `y` was centered).
    pub y_offset: f64,
}

impl ModelDump {
    pub fn from_model(m: &GprModel, y_offset: f64) -> Self {
        ModelDump {
            format: MODEL_TAG.into(),
            version: FORMAT_VERSION,
            spec: m.spec.clone(),
            grid: m.grid.clone(),
            center: m.center.clone(),
            theta: m.theta.clone(),
            path: m.path,
            w: pack(m.w.iter().copied()),
            u: pack(m.u.iter().copied()),
            tr_f: m.tr_f,
            log_likelihood: m.log_likelihood,
            y_offset,
        }
    }

    pub fn into_model(self) -> Result<(GprModel, f64)> {
        check_header(&self.format, self.version, MODEL_TAG)?;
        self.spec.validate()?;
        let s = self.grid.total();
        let model = GprModel {
            w: vector(&self.w, s, "w")?,
            u: vector(&self.u, s, "u")?,
            spec: self.spec,
            grid: self.grid,
            center: self.center,
            theta: self.theta,
            path: self.path,
            alpha: None,
            tr_f: self.tr_f,
            log_likelihood: self.log_likelihood,
        };
        Ok((model, self.y_offset))
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| GlfError::Numerical(format!("serialization failed: {e}")))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| GlfError::Parse { line: e.line(), message: e.to_string() })
}

pub fn save_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, to_json(v)?)?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}
