//! Request and response types for the service, and the blocking handlers
//! behind each endpoint. Matrices travel as row lists.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{plan, BoundsPlan, PlanOptions};
use crate::config::{DataSource, ExperimentConfig, SweepPoint};
use crate::data::{synth_1d, synth_2d, Dataset};
use crate::error::{GlfError, Result};
use crate::experiment::{self, bench_iteration_cost, cost_csv, kernel_for, AuditReport, CostRow, ExperimentReport};
use crate::features::rff::rff_build;
use crate::features::{FeatureModel, FeatureOptions, SolverPath};
use crate::gpr::train;
use crate::hyperopt::{learn as run_learn, Backend, ExactObjective, GlfObjective, OptOptions, OptTrace, RffObjective};
use crate::kernels::{HyperDomain, HyperParams, KernelSpec};
use crate::persist::ModelDump;
use crate::quadrature::tensor_grid;

/// Inputs as rows plus targets. `y` may be empty where targets are not needed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub x: Vec<Vec<f64>>,
    #[serde(default)]
    pub y: Vec<f64>,
}

impl Table {
    pub fn from_matrix(x: &DMatrix<f64>, y: &[f64]) -> Self {
        Table { x: (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect(), y: y.to_vec() }
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        rows_to_matrix(&self.x)
    }

    /// Inputs and targets, checked for matching lengths.
    pub fn xy(&self) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let x = self.matrix()?;
        if self.y.len() != x.nrows() {
            return Err(GlfError::invalid(format!("{} input rows but {} targets", x.nrows(), self.y.len())));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(GlfError::invalid("targets must be finite"));
        }
        Ok((x, self.y.clone()))
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || d == 0 {
        return Err(GlfError::invalid("no input rows"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(GlfError::invalid(format!("row {} has {} columns, expected {d}", i + 1, rows[i].len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GlfError::invalid("inputs must be finite"));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, k| rows[i][k]))
}

/// Error body returned by the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    /// [`GlfError::kind`] tag.
    pub kind: String,
    pub message: String,
}

impl From<&GlfError> for ApiError {
    fn from(e: &GlfError) -> Self {
        ApiError { kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl From<ApiError> for GlfError {
    fn from(e: ApiError) -> Self {
        GlfError::from_kind(&e.kind, e.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRequest {
    /// `synth_1d` or `synth_2d`.
    pub dataset: String,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResponse {
    pub train: Table,
    pub test: Table,
    pub provenance: String,
}

pub fn synth(req: &SynthRequest) -> Result<SynthResponse> {
    let ds = match req.dataset.as_str() {
        "synth_1d" => synth_1d(req.n, req.seed)?,
        "synth_2d" => synth_2d(req.n, req.seed)?,
        other => return Err(GlfError::invalid(format!("unknown synthetic dataset '{other}'"))),
    };
    let test = match (&ds.x_test, &ds.y_test) {
        (Some(x), Some(y)) => Table::from_matrix(x, y),
        _ => Table::default(),
    };
    Ok(SynthResponse { train: Table::from_matrix(&ds.x, &ds.y), test, provenance: ds.provenance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRequest {
    pub config: ExperimentConfig,
    /// Training inputs; when given they fix `n`, the dimension and the default box.
    #[serde(default)]
    pub x: Option<Vec<Vec<f64>>>,
    /// Required without `x`.
    #[serde(default)]
    pub n: Option<usize>,
    /// Required without `x`; the box comes from the config key `box`.
    #[serde(default)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsResponse {
    pub plan: BoundsPlan,
    /// Human-readable summary followed by `key=value` lines.
    pub report: String,
}

/// Per-dimension override from a single integer `s`, `None` for `planned`.
fn single_point(cfg: &ExperimentConfig, dim: usize) -> Result<Option<Vec<usize>>> {
    match cfg.s.as_slice() {
        [SweepPoint::Planned] => Ok(None),
        [SweepPoint::PerDim(k)] => Ok(Some(vec![*k; dim])),
        _ => Err(GlfError::invalid("this operation takes one feature count; sweeps belong to bench")),
    }
}

fn setup(cfg: &ExperimentConfig, x: &DMatrix<f64>) -> Result<(KernelSpec, HyperDomain)> {
    cfg.validate()?;
    let spec = kernel_for(cfg, x)?;
    let domain = cfg.domain(spec.n_theta0())?;
    domain.validate(&spec)?;
    Ok((spec, domain))
}

/// Plan that is usable for training: the cap applies unless `s` was given.
fn usable_plan(cfg: &ExperimentConfig, spec: &KernelSpec, domain: &HyperDomain, n: usize) -> Result<BoundsPlan> {
    let s_override = single_point(cfg, spec.dim)?;
    let pl = plan(spec, domain, n, &PlanOptions { feature_cap: cfg.feature_cap, s_override })?;
    if pl.exceeds_cap && !pl.overridden {
        return Err(GlfError::Capacity(format!(
            "planned feature count {} exceeds the cap {}",
            pl.s_tot, cfg.feature_cap
        )));
    }
    Ok(pl)
}

pub fn bounds(req: &BoundsRequest) -> Result<BoundsResponse> {
    let cfg = &req.config;
    cfg.validate()?;
    let (spec, domain, n) = match &req.x {
        Some(rows) => {
            let x = rows_to_matrix(rows)?;
            let (spec, domain) = setup(cfg, &x)?;
            (spec, domain, req.n.unwrap_or(x.nrows()))
        }
        None => {
            let n = req.n.ok_or_else(|| GlfError::invalid("bounds needs n or training inputs"))?;
            let d = req.dim.ok_or_else(|| GlfError::invalid("bounds needs dim or training inputs"))?;
            let width = match &cfg.box_width {
                Some(b) if b.len() == 1 => vec![b[0]; d],
                Some(b) if b.len() == d => b.clone(),
                Some(b) => return Err(GlfError::invalid(format!("box has {} entries for {d} dimensions", b.len()))),
                None => return Err(GlfError::invalid("bounds without data needs the box width (config key box)")),
            };
            let spec = KernelSpec::new(cfg.kernel, d, cfg.anisotropic, width)?;
            let domain = cfg.domain(spec.n_theta0())?;
            domain.validate(&spec)?;
            (spec, domain, n)
        }
    };
    if n == 0 {
        return Err(GlfError::invalid("n must be positive"));
    }
    let s_override = single_point(cfg, spec.dim)?;
    let pl = plan(&spec, &domain, n, &PlanOptions { feature_cap: cfg.feature_cap, s_override })?;
    let mut report = pl.report();
    for (k, v) in pl.key_values() {
        report.push_str(&format!("{k}={v}\n"));
    }
    Ok(BoundsResponse { plan: pl, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub config: ExperimentConfig,
    pub train: Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResponse {
    pub model: ModelDump,
    pub theta: HyperParams,
    pub trace: OptTrace,
    pub plan: BoundsPlan,
}

fn centered(cfg: &ExperimentConfig, y: Vec<f64>) -> (Vec<f64>, f64) {
    if cfg.center_y {
        let m = y.iter().sum::<f64>() / y.len() as f64;
        (y.into_iter().map(|v| v - m).collect(), m)
    } else {
        (y, 0.0)
    }
}

fn opt_options(cfg: &ExperimentConfig) -> OptOptions {
    OptOptions { max_iter: cfg.max_iter, ..Default::default() }
}

/// Learn the hyperparameters with the quadrature features and train at them.
pub fn fit(req: &FitRequest) -> Result<FitResponse> {
    let cfg = &req.config;
    let (x, y) = req.train.xy()?;
    let (spec, domain) = setup(cfg, &x)?;
    let pl = usable_plan(cfg, &spec, &domain, x.nrows())?;
    let (y, offset) = centered(cfg, y);
    let grid = tensor_grid(&pl.u, &pl.s, spec.domain_kind())?;
    let fopts = FeatureOptions { build_qr: cfg.path == SolverPath::Qr, ..Default::default() };
    let fm = FeatureModel::build(&spec, &grid, &x, &y, &fopts)?;
    let (theta, trace) = run_learn(&mut GlfObjective { features: &fm, path: cfg.path }, &domain, &opt_options(cfg))?;
    let model = train(&fm, &theta, cfg.path)?;
    Ok(FitResponse { model: ModelDump::from_model(&model, offset), theta, trace, plan: pl })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub model: ModelDump,
    pub x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    /// Posterior mean at each row.
    pub y: Vec<f64>,
}

pub fn predict(req: &PredictRequest) -> Result<PredictResponse> {
    let (model, offset) = req.model.clone().into_model()?;
    let xt = rows_to_matrix(&req.x)?;
    let p = model.predict(&xt)?;
    Ok(PredictResponse { y: p.iter().map(|v| v + offset).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnRequest {
    pub config: ExperimentConfig,
    pub backend: Backend,
    pub train: Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnResponse {
    pub theta: HyperParams,
    pub trace: OptTrace,
    /// The trace as CSV.
    pub trace_csv: String,
    /// Total feature count; zero for the exact backend.
    pub s_tot: usize,
}

/// Learn hyperparameters with one backend and report the optimizer trace.
pub fn learn(req: &LearnRequest) -> Result<LearnResponse> {
    let cfg = &req.config;
    let (x, y) = req.train.xy()?;
    let (spec, domain) = setup(cfg, &x)?;
    let (y, _) = centered(cfg, y);
    let opts = opt_options(cfg);
    let (theta, trace, s_tot) = match req.backend {
        Backend::Glf => {
            let pl = usable_plan(cfg, &spec, &domain, x.nrows())?;
            let grid = tensor_grid(&pl.u, &pl.s, spec.domain_kind())?;
            let fopts = FeatureOptions { build_qr: cfg.path == SolverPath::Qr, ..Default::default() };
            let fm = FeatureModel::build(&spec, &grid, &x, &y, &fopts)?;
            let (t, tr) = run_learn(&mut GlfObjective { features: &fm, path: cfg.path }, &domain, &opts)?;
            (t, tr, grid.total())
        }
        Backend::Rff => {
            let s_tot = match single_point(cfg, spec.dim)? {
                Some(s) => s.iter().product(),
                None => usable_plan(cfg, &spec, &domain, x.nrows())?.s_tot,
            };
            let model = rff_build(&x, &spec, s_tot, cfg.seed)?;
            let (t, tr) = run_learn(&mut RffObjective { model: &model, y: &y }, &domain, &opts)?;
            (t, tr, s_tot)
        }
        Backend::Exact => {
            if x.nrows() > crate::gpr::EXACT_MAX_N {
                return Err(GlfError::Capacity(format!(
                    "the exact backend is limited to {} rows, got {}",
                    crate::gpr::EXACT_MAX_N,
                    x.nrows()
                )));
            }
            let (t, tr) = run_learn(&mut ExactObjective { spec: &spec, x: &x, y: &y }, &domain, &opts)?;
            (t, tr, 0)
        }
    };
    let trace_csv = trace.to_csv();
    Ok(LearnResponse { theta, trace, trace_csv, s_tot })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRequest {
    pub config: ExperimentConfig,
    pub x: Vec<Vec<f64>>,
}

/// Certify the planned features against the exact covariance at the domain corner.
pub fn audit(req: &AuditRequest) -> Result<AuditReport> {
    let cfg = &req.config;
    let x = rows_to_matrix(&req.x)?;
    let (spec, domain) = setup(cfg, &x)?;
    let s_override = single_point(cfg, spec.dim)?;
    experiment::audit(&spec, &domain, &x, &PlanOptions { feature_cap: cfg.feature_cap, s_override })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRequest {
    pub config: ExperimentConfig,
    /// Training rows; without them the configured synthetic data is generated.
    #[serde(default)]
    pub train: Option<Table>,
    #[serde(default)]
    pub test: Option<Table>,
    /// Sample sizes for the iteration-cost timing; empty skips it.
    #[serde(default)]
    pub cost_n: Vec<usize>,
    /// Evaluations per timing point.
    #[serde(default = "default_evals")]
    pub cost_evals: usize,
}

fn default_evals() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResponse {
    pub report: ExperimentReport,
    pub cost: Vec<CostRow>,
}

/// Run the configured sweep, plus the iteration-cost timing when requested.
/// Cost rows are also rendered to `cost.csv` in the report files.
pub fn bench(req: &BenchRequest) -> Result<BenchResponse> {
    let cfg = &req.config;
    let data = match &req.train {
        Some(t) => {
            let (x, y) = t.xy()?;
            let (x_test, y_test) = match &req.test {
                Some(tt) if !tt.x.is_empty() => {
                    let (a, b) = tt.xy()?;
                    (Some(a), Some(b))
                }
                _ => (None, None),
            };
            Dataset { x, y, x_test, y_test, provenance: "inline".into() }
        }
        None => match cfg.data {
            DataSource::Csv(_) => return Err(GlfError::invalid("CSV data must be sent inline as rows")),
            _ => experiment::load_dataset(cfg)?,
        },
    };
    let mut report = experiment::run_experiment(cfg, &data)?;
    let mut cost = Vec::new();
    if !req.cost_n.is_empty() {
        let s = match cfg.s.first() {
            Some(SweepPoint::PerDim(k)) => *k,
            _ => return Err(GlfError::invalid("the cost timing needs an integer s")),
        };
        let spec = kernel_for(cfg, &data.x)?;
        let domain = cfg.domain(spec.n_theta0())?;
        cost = bench_iteration_cost(&spec, &domain, &req.cost_n, s, req.cost_evals, cfg.seed)?;
        report.files.push(("cost.csv".into(), cost_csv(&cost)));
    }
    Ok(BenchResponse { report, cost })
}
