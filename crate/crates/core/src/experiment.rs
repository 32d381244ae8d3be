//! Experiment harness: the feature-count sweep with learning, prediction and
//! test error per backend, the approximation audit, and iteration-cost timing.
//!
//! Output files of [`run_experiment`]:
//!
//! - `results.csv`: `backend,s_per_dim,s_tot,mse,log_likelihood,grad_evals,iterations,termination,theta_1..theta_p`
//! - `mse_vs_s.csv`: `backend,s_tot,mse`
//! - `time_vs_s.csv`: `backend,s_tot,learn_seconds,gram_seconds,seconds_per_eval`
//! - `bounds.txt`: the planned truncation box and feature counts
//! - `config.txt`: the effective configuration
//! - `trace_<backend>_<s_tot>.csv`: optimizer iterates
//!
//! Everything except `time_vs_s.csv` is byte-identical for a fixed config.
//! The exact backend has no feature count and reports `s_tot = 0`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::{compute_umin, plan, BoundsPlan, PlanOptions};
use crate::config::{DataSource, ExperimentConfig, SweepPoint};
use crate::data::{ingest_csv, mse, synth_1d, synth_2d, CsvOptions, Dataset};
use crate::diagnostics::{spectral_equivalence_check, EquivalenceReport};
use crate::error::{GlfError, Result};
use crate::features::rff::rff_build;
use crate::features::{data_center, feature_matrix, weight_diag, FeatureModel, FeatureOptions, SolverPath};
use crate::gpr::exact::training_covariance;
use crate::gpr::{exact_gpr, likelihood_gradient, rff_fit, train, EXACT_MAX_N};
use crate::hyperopt::{learn, Backend, ExactObjective, GlfObjective, OptOptions, OptTrace, RffObjective};
use crate::kernels::{FeatureKind, HyperDomain, HyperParams, KernelSpec};
use crate::quadrature::tensor_grid;

/// Load the configured dataset.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        DataSource::Synth1d => synth_1d(cfg.n, cfg.seed),
        DataSource::Synth2d => synth_2d(cfg.n, cfg.seed),
        DataSource::Csv(p) => ingest_csv(
            p,
            &CsvOptions { dim: None, split_fraction: cfg.split, seed: cfg.seed, log_y: cfg.log_y },
        ),
    }
}

/// Kernel for the data: the box width comes from the config or from the
/// range of the training inputs (`max` alone for nonnegative-data kernels).
pub fn kernel_for(cfg: &ExperimentConfig, x: &DMatrix<f64>) -> Result<KernelSpec> {
    let d = x.ncols();
    let probe = KernelSpec::new(cfg.kernel, d, cfg.anisotropic, vec![1.0; d])?;
    let width = match &cfg.box_width {
        Some(b) if b.len() == 1 => vec![b[0]; d],
        Some(b) if b.len() == d => b.clone(),
        Some(b) => return Err(GlfError::invalid(format!("box has {} entries for {d} dimensions", b.len()))),
        None => (0..d)
            .map(|k| {
                let col = x.column(k);
                let w = match probe.feature_kind() {
                    FeatureKind::Fourier => col.max() - col.min(),
                    FeatureKind::ExponentialDecay => col.max(),
                };
                if w > 0.0 {
                    w
                } else {
                    1.0
                }
            })
            .collect(),
    };
    KernelSpec::new(cfg.kernel, d, cfg.anisotropic, width)
}

fn opt_options(cfg: &ExperimentConfig) -> OptOptions {
    OptOptions { max_iter: cfg.max_iter, ..Default::default() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub backend: Backend,
    /// Nodes per dimension; empty for the exact backend.
    pub s_per_dim: Vec<usize>,
    pub s_tot: usize,
    pub planned: bool,
    pub mse: f64,
    pub log_likelihood: f64,
    pub theta: HyperParams,
    pub learn_seconds: f64,
    pub gram_seconds: f64,
    pub trace: OptTrace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub plan: Option<BoundsPlan>,
    pub cells: Vec<CellResult>,
    /// `(file name, contents)` pairs.
    pub files: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_str())
    }
}

struct Prepared<'a> {
    data: &'a Dataset,
    y: Vec<f64>,
    offset: f64,
    xt: &'a DMatrix<f64>,
    yt: &'a [f64],
}

impl Prepared<'_> {
    fn test_mse(&self, pred: &DVector<f64>) -> f64 {
        if self.yt.is_empty() {
            return f64::NAN;
        }
        let p: Vec<f64> = pred.iter().map(|v| v + self.offset).collect();
        mse(&p, self.yt)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

/// Run the sweep of `cfg` on `data`.
pub fn run_experiment(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    let spec = kernel_for(cfg, &data.x)?;
    let domain = cfg.domain(spec.n_theta0())?;
    domain.validate(&spec)?;
    let n = data.n();
    if cfg.backends.contains(&Backend::Exact) && n > EXACT_MAX_N {
        return Err(GlfError::Capacity(format!("the exact backend is limited to {EXACT_MAX_N} rows, got {n}")));
    }
    let planned = match plan(&spec, &domain, n, &PlanOptions { feature_cap: cfg.feature_cap, s_override: None }) {
        Ok(p) => Some(p),
        Err(GlfError::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let u = match &planned {
        Some(p) => p.u.clone(),
        None => compute_umin(&spec, &domain, n)?,
    };
    let mut sweep: Vec<(Vec<usize>, bool)> = Vec::new();
    for p in &cfg.s {
        match p {
            SweepPoint::PerDim(k) => sweep.push((vec![*k; spec.dim], false)),
            SweepPoint::Planned => {
                let pl = planned.as_ref().ok_or_else(|| {
                    GlfError::Unsupported(format!("no planned feature count for the {} kernel", spec.family.name()))
                })?;
                if pl.exceeds_cap {
                    return Err(GlfError::Capacity(format!(
                        "planned feature count {} exceeds the cap {}",
                        pl.s_tot, cfg.feature_cap
                    )));
                }
                sweep.push((pl.s.clone(), true));
            }
        }
    }

    let (y, offset) = if cfg.center_y {
        let m = data.y.iter().sum::<f64>() / n as f64;
        (data.y.iter().map(|v| v - m).collect(), m)
    } else {
        (data.y.clone(), 0.0)
    };
    let empty = DMatrix::zeros(0, spec.dim);
    let prep = Prepared {
        data,
        y,
        offset,
        xt: data.x_test.as_ref().unwrap_or(&empty),
        yt: data.y_test.as_deref().unwrap_or(&[]),
    };
    let opts = opt_options(cfg);
    let mut cells = Vec::new();
    for backend in &cfg.backends {
        match backend {
            Backend::Exact => cells.push(exact_cell(&spec, &domain, &prep, &opts)?),
            Backend::Glf => {
                for (s, is_planned) in &sweep {
                    cells.push(glf_cell(&spec, &domain, &u, s, *is_planned, cfg.path, &prep, &opts)?);
                }
            }
            Backend::Rff => {
                for (s, is_planned) in &sweep {
                    cells.push(rff_cell(&spec, &domain, s, *is_planned, cfg.seed, &prep, &opts)?);
                }
            }
        }
    }
    let files = render(cfg, planned.as_ref(), &cells);
    Ok(ExperimentReport { plan: planned, cells, files })
}

/// Load the configured data and run the sweep.
pub fn run_configured(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment(cfg, &load_dataset(cfg)?)
}

#[allow(clippy::too_many_arguments)]
fn glf_cell(
    spec: &KernelSpec,
    domain: &HyperDomain,
    u: &[f64],
    s: &[usize],
    planned: bool,
    path: SolverPath,
    prep: &Prepared,
    opts: &OptOptions,
) -> Result<CellResult> {
    let grid = tensor_grid(u, s, spec.domain_kind())?;
    let t0 = Instant::now();
    let fopts = FeatureOptions { build_qr: path == SolverPath::Qr, ..Default::default() };
    let fm = FeatureModel::build(spec, &grid, &prep.data.x, &prep.y, &fopts)?;
    let gram_seconds = t0.elapsed().as_secs_f64();
    let (theta, trace) = learn(&mut GlfObjective { features: &fm, path }, domain, opts)?;
    let model = train(&fm, &theta, path)?;
    let pred = model.predict(prep.xt)?;
    Ok(CellResult {
        backend: Backend::Glf,
        s_per_dim: s.to_vec(),
        s_tot: grid.total(),
        planned,
        mse: prep.test_mse(&pred),
        log_likelihood: model.log_likelihood,
        theta,
        learn_seconds: trace.wall_seconds,
        gram_seconds,
        trace,
    })
}

fn rff_cell(
    spec: &KernelSpec,
    domain: &HyperDomain,
    s: &[usize],
    planned: bool,
    seed: u64,
    prep: &Prepared,
    opts: &OptOptions,
) -> Result<CellResult> {
    let s_tot: usize = s.iter().product();
    let model = rff_build(&prep.data.x, spec, s_tot, seed)?;
    let (theta, trace) = learn(&mut RffObjective { model: &model, y: &prep.y }, domain, opts)?;
    let fit = rff_fit(&model, &theta, &prep.y, false)?;
    let pred = fit.predict(&model, prep.xt)?;
    Ok(CellResult {
        backend: Backend::Rff,
        s_per_dim: s.to_vec(),
        s_tot,
        planned,
        mse: prep.test_mse(&pred),
        log_likelihood: fit.report.value,
        theta,
        learn_seconds: trace.wall_seconds,
        gram_seconds: 0.0,
        trace,
    })
}

fn exact_cell(spec: &KernelSpec, domain: &HyperDomain, prep: &Prepared, opts: &OptOptions) -> Result<CellResult> {
    let x = &prep.data.x;
    let (theta, trace) = learn(&mut ExactObjective { spec, x, y: &prep.y }, domain, opts)?;
    let res = exact_gpr(spec, &theta, x, &prep.y, Some(prep.xt))?;
    let pred = res.predictions.expect("test inputs were passed");
    Ok(CellResult {
        backend: Backend::Exact,
        s_per_dim: vec![],
        s_tot: 0,
        planned: false,
        mse: prep.test_mse(&pred),
        log_likelihood: res.log_likelihood,
        theta,
        learn_seconds: trace.wall_seconds,
        gram_seconds: 0.0,
        trace,
    })
}

fn render(cfg: &ExperimentConfig, planned: Option<&BoundsPlan>, cells: &[CellResult]) -> Vec<(String, String)> {
    let p = cells.first().map_or(0, |c| c.theta.to_vec().len());
    let mut results = String::from("backend,s_per_dim,s_tot,mse,log_likelihood,grad_evals,iterations,termination");
    for k in 1..=p {
        let _ = write!(results, ",theta_{k}");
    }
    results.push('\n');
    let mut mse_s = String::from("backend,s_tot,mse\n");
    let mut time_s = String::from("backend,s_tot,learn_seconds,gram_seconds,seconds_per_eval\n");
    let mut files = Vec::new();
    for c in cells {
        let spd: Vec<String> = c.s_per_dim.iter().map(|v| v.to_string()).collect();
        let _ = write!(
            results,
            "{},{},{},{},{},{},{},{}",
            c.backend.name(),
            spd.join("x"),
            c.s_tot,
            fmt(c.mse),
            fmt(c.log_likelihood),
            c.trace.grad_evals,
            c.trace.steps.len() - 1,
            c.trace.termination.name()
        );
        for t in c.theta.to_vec() {
            let _ = write!(results, ",{}", fmt(t));
        }
        results.push('\n');
        let _ = writeln!(mse_s, "{},{},{}", c.backend.name(), c.s_tot, fmt(c.mse));
        let _ = writeln!(
            time_s,
            "{},{},{:.6},{:.6},{:.6e}",
            c.backend.name(),
            c.s_tot,
            c.learn_seconds,
            c.gram_seconds,
            c.trace.seconds_per_eval()
        );
        files.push((format!("trace_{}_{}.csv", c.backend.name(), c.s_tot), c.trace.to_csv()));
    }
    let bounds = match planned {
        Some(pl) => {
            let mut b = pl.report();
            for (k, v) in pl.key_values() {
                let _ = writeln!(b, "{k}={v}");
            }
            b
        }
        None => "no planned feature count for this kernel family\n".to_string(),
    };
    let mut out = vec![
        ("results.csv".to_string(), results),
        ("mse_vs_s.csv".to_string(), mse_s),
        ("time_vs_s.csv".to_string(), time_s),
        ("bounds.txt".to_string(), bounds),
        ("config.txt".to_string(), cfg.to_text()),
    ];
    out.extend(files);
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub plan: BoundsPlan,
    pub equivalence: EquivalenceReport,
    pub rows_outside_box: usize,
}

/// Approximate covariance `sigma_f^2 Z W Z^* + sigma_n^2 I` on the rows of `x`.
pub fn approx_covariance(spec: &KernelSpec, grid: &crate::quadrature::QuadratureGrid, theta: &HyperParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let center = match spec.feature_kind() {
        FeatureKind::Fourier => data_center(x),
        FeatureKind::ExponentialDecay => vec![0.0; spec.dim],
    };
    let z = feature_matrix(spec, grid, &center, x);
    let wd = weight_diag(spec, grid, &theta.theta0)?;
    let mut zw = z.clone();
    for (j, h) in wd.h.iter().enumerate() {
        zw.column_mut(j).scale_mut(*h);
    }
    let k = zw * z.adjoint();
    let n = x.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        theta.sigma_f2 * 0.5 * (k[(i, j)].re + k[(j, i)].re) + if i == j { theta.sigma_n2 } else { 0.0 }
    }))
}

/// Plan the features for `x`, then certify the approximate covariance against
/// the exact one at the domain corner.
pub fn audit(spec: &KernelSpec, domain: &HyperDomain, x: &DMatrix<f64>, opts: &PlanOptions) -> Result<AuditReport> {
    let n = x.nrows();
    if n > crate::diagnostics::MAX_ORDER {
        return Err(GlfError::Capacity(format!("audit is limited to {} rows", crate::diagnostics::MAX_ORDER)));
    }
    let pl = plan(spec, domain, n, opts)?;
    if pl.exceeds_cap && !pl.overridden {
        return Err(GlfError::Capacity(format!("planned feature count {} exceeds the cap", pl.s_tot)));
    }
    let grid = tensor_grid(&pl.u, &pl.s, spec.domain_kind())?;
    let theta = domain.corner();
    let k = training_covariance(spec, &theta, x);
    let kt = approx_covariance(spec, &grid, &theta, x)?;
    let equivalence = spectral_equivalence_check(&k, &kt)?;
    let rows_outside_box = match spec.feature_kind() {
        FeatureKind::Fourier => {
            let c = data_center(x);
            (0..n).filter(|&i| (0..spec.dim).any(|k| (x[(i, k)] - c[k]).abs() > spec.bounding_box[k] / 2.0 * (1.0 + 1e-12))).count()
        }
        FeatureKind::ExponentialDecay => {
            (0..n).filter(|&i| (0..spec.dim).any(|k| x[(i, k)] > spec.bounding_box[k] * (1.0 + 1e-12))).count()
        }
    };
    Ok(AuditReport { plan: pl, equivalence, rows_outside_box })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub backend: Backend,
    pub n: usize,
    pub s: usize,
    /// One-time feature and gram build (zero for the RFF backend).
    pub setup_seconds: f64,
    /// Median time of one likelihood-and-gradient evaluation.
    pub seconds_per_eval: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Time likelihood-gradient evaluations of the GLF and RFF backends on
/// `synth_1d(n)` for each `n`, with `s` total features, at the domain corner.
pub fn bench_iteration_cost(
    spec: &KernelSpec,
    domain: &HyperDomain,
    n_values: &[usize],
    s: usize,
    evals: usize,
    seed: u64,
) -> Result<Vec<CostRow>> {
    if spec.dim != 1 {
        return Err(GlfError::invalid("the iteration-cost benchmark uses one-dimensional data"));
    }
    if s == 0 || evals == 0 {
        return Err(GlfError::invalid("feature count and evaluation count must be positive"));
    }
    let theta = domain.corner();
    let mut rows = Vec::new();
    for &n in n_values {
        let data = synth_1d(n, seed)?;
        let u = compute_umin(spec, domain, n)?;
        let grid = tensor_grid(&u, &[s], spec.domain_kind())?;
        let t0 = Instant::now();
        let fm = FeatureModel::build(spec, &grid, &data.x, &data.y, &FeatureOptions::default())?;
        let setup = t0.elapsed().as_secs_f64();
        let mut times = Vec::with_capacity(evals);
        for _ in 0..evals {
            let t = Instant::now();
            likelihood_gradient(&fm, &theta, SolverPath::NormalEquations)?;
            times.push(t.elapsed().as_secs_f64());
        }
        rows.push(CostRow { backend: Backend::Glf, n, s, setup_seconds: setup, seconds_per_eval: median(times) });
        if spec.feature_kind() == FeatureKind::Fourier {
            let model = rff_build(&data.x, spec, s, seed)?;
            let mut times = Vec::with_capacity(evals);
            for _ in 0..evals {
                let t = Instant::now();
                rff_fit(&model, &theta, &data.y, true)?;
                times.push(t.elapsed().as_secs_f64());
            }
            rows.push(CostRow { backend: Backend::Rff, n, s, setup_seconds: 0.0, seconds_per_eval: median(times) });
        }
    }
    Ok(rows)
}

/// CSV with header `backend,n,s,setup_seconds,seconds_per_eval`.
pub fn cost_csv(rows: &[CostRow]) -> String {
    let mut out = String::from("backend,n,s,setup_seconds,seconds_per_eval\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.6e},{:.6e}", r.backend.name(), r.n, r.s, r.setup_seconds, r.seconds_per_eval);
    }
    out
}
