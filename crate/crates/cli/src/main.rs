//! `glf`: command-line client of the glf service.
//!
//! Without `--server` (or `GLF_SERVER`) an embedded server is started on a
//! loopback port for the lifetime of the command. Exit codes: 0 on success,
//! 2 on validation errors (bad flags, config, CSV, capacity), 3 on numerical
//! failure, 1 when the service cannot be reached.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glf::api::{
    AuditRequest, BenchRequest, BoundsRequest, FitRequest, LearnRequest, PredictRequest, SynthRequest, Table,
};
use glf::config::{parse_sweep, ExperimentConfig};
use glf::data::{read_x, read_xy, write_xy};
use glf::experiment::load_dataset;
use glf::hyperopt::Backend;
use glf::kernels::KernelFamily;
use glf::persist::{load_json, save_json, ModelDump};
use glf::GlfError;
use glf_client::{Client, ClientError};
use nalgebra::DMatrix;

#[derive(Parser)]
#[command(name = "glf", version, about = "Gaussian process regression with Gauss-Legendre features")]
struct Cli {
    /// Service URL; an embedded server is used when absent.
    #[arg(long, global = true, env = "GLF_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand. They override the config file.
#[derive(Args, Clone, Default)]
struct Common {
    /// Config file in `key = value` form.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian, matern, laplacian, cauchy or semigroup.
    #[arg(long)]
    kernel: Option<String>,
    /// Matérn smoothness.
    #[arg(long)]
    nu: Option<f64>,
    /// Sample count for synthetic data, or the n used by `bounds`.
    #[arg(long)]
    n: Option<usize>,
    /// Nodes per dimension: `planned`, an integer, or a comma sweep (bench).
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file, or directory for `bench`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
        /// 1 or 2.
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Plan the truncation box and feature counts.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Training CSV; fixes n, the dimension and the default box.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Input dimension when no data is given.
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Box width per dimension (comma list).
        #[arg(long = "box")]
        box_width: Option<String>,
    },
    /// Learn hyperparameters and save the trained model as JSON.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Predict with a saved model.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// CSV with header x1..xd (a trailing y column is ignored).
        #[arg(long)]
        data: PathBuf,
    },
    /// Learn hyperparameters with one backend and write the optimizer trace.
    Learn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// glf, rff or exact.
        #[arg(long, default_value = "glf")]
        backend: String,
    },
    /// Check the planned features against the exact covariance.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the configured sweep and write the report files.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Also time one likelihood-gradient evaluation at these sample sizes.
        #[arg(long, value_delimiter = ',')]
        cost_n: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        cost_evals: usize,
    },
}

#[derive(Debug)]
enum Failure {
    Local(GlfError),
    Remote(ClientError),
}

impl From<GlfError> for Failure {
    fn from(e: GlfError) -> Self {
        Failure::Local(e)
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Remote(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Local(GlfError::Io(e))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Local(e) => e.exit_code() as u8,
            Failure::Remote(e) => e.exit_code() as u8,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Local(e) => e.fmt(f),
            Failure::Remote(e) => e.fmt(f),
        }
    }
}

type Out<T> = Result<T, Failure>;

fn config(c: &Common) -> Out<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    match (&c.kernel, c.nu) {
        (Some(k), nu) => {
            let nu = nu.or(match cfg.kernel {
                KernelFamily::Matern { nu } => Some(nu),
                _ => None,
            });
            cfg.kernel = KernelFamily::parse(k, nu.or(Some(2.5)))?;
        }
        (None, Some(nu)) => match cfg.kernel {
            KernelFamily::Matern { .. } => cfg.kernel = KernelFamily::Matern { nu },
            _ => return Err(GlfError::invalid("--nu applies only to the matern kernel").into()),
        },
        (None, None) => {}
    }
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(s) = &c.s {
        cfg.s = parse_sweep(s)?;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Training rows from `--data`, or the training part of the configured data.
fn training(cfg: &ExperimentConfig, data: Option<&Path>) -> Out<Table> {
    match data {
        Some(p) => {
            let (x, y) = read_xy(File::open(p)?, None, cfg.log_y)?;
            Ok(Table::from_matrix(&x, &y))
        }
        None => {
            let ds = load_dataset(cfg)?;
            Ok(Table::from_matrix(&ds.x, &ds.y))
        }
    }
}

/// Write to `--out`, or to stdout when absent.
fn emit(out: Option<&Path>, body: &str) -> Out<()> {
    match out {
        Some(p) => std::fs::write(p, body)?,
        None => io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn csv_text(t: &Table, target: &str) -> Out<String> {
    let x = if t.x.is_empty() { DMatrix::zeros(0, 0) } else { t.matrix()? };
    let mut buf = Vec::new();
    write_xy(&mut buf, &x, &t.y, target)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn theta_line(theta: &[f64]) -> String {
    let p = theta.len();
    theta
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let name = if i + 2 == p {
                "sigma_f2".to_string()
            } else if i + 1 == p {
                "sigma_n2".to_string()
            } else {
                format!("theta0_{}", i + 1)
            };
            format!("{name}={v:.10e}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// `train.csv` becomes `train.test.csv`.
fn test_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = p.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    p.with_file_name(format!("{stem}.test.{ext}"))
}

async fn execute(client: &Client, cmd: Cmd) -> Out<()> {
    match cmd {
        Cmd::Synth { common, dim } => {
            let cfg = config(&common)?;
            let dataset = match dim {
                1 => "synth_1d",
                2 => "synth_2d",
                _ => return Err(GlfError::invalid("--dim must be 1 or 2").into()),
            };
            let r = client.synth(&SynthRequest { dataset: dataset.into(), n: cfg.n, seed: cfg.seed }).await?;
            emit(common.out.as_deref(), &csv_text(&r.train, "y")?)?;
            if let Some(p) = &common.out {
                std::fs::write(test_path(p), csv_text(&r.test, "y")?)?;
            }
        }
        Cmd::Bounds { common, data, dim, box_width } => {
            let mut cfg = config(&common)?;
            if let Some(b) = box_width {
                cfg.box_width = Some(
                    b.split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| GlfError::invalid(format!("bad box width '{v}'"))))
                        .collect::<Result<_, _>>()?,
                );
            }
            let x = match &data {
                Some(p) => Some(training(&cfg, Some(p))?.x),
                None => None,
            };
            let n = if x.is_some() { common.n } else { Some(cfg.n) };
            let r = client.bounds(&BoundsRequest { config: cfg, x, n, dim: Some(dim) }).await?;
            emit(common.out.as_deref(), &r.report)?;
        }
        Cmd::Fit { common, data } => {
            let cfg = config(&common)?;
            let train = training(&cfg, data.as_deref())?;
            let r = client.fit(&FitRequest { config: cfg, train }).await?;
            let out = common.out.unwrap_or_else(|| PathBuf::from("model.json"));
            save_json(&out, &r.model)?;
            println!(
                "{} s_tot={} log_likelihood={:.10e} termination={}",
                theta_line(&r.theta.to_vec()),
                r.plan.s_tot,
                r.model.log_likelihood,
                r.trace.termination.name()
            );
        }
        Cmd::Predict { common, model, data } => {
            let dump: ModelDump = load_json(&model)?;
            let x = read_x(File::open(&data)?)?;
            let t = Table::from_matrix(&x, &[]);
            let r = client.predict(&PredictRequest { model: dump, x: t.x.clone() }).await?;
            emit(common.out.as_deref(), &csv_text(&Table { x: t.x, y: r.y }, "y_pred")?)?;
        }
        Cmd::Learn { common, data, backend } => {
            let cfg = config(&common)?;
            let backend = Backend::parse(&backend)?;
            let train = training(&cfg, data.as_deref())?;
            let r = client.learn(&LearnRequest { config: cfg, backend, train }).await?;
            emit(common.out.as_deref(), &r.trace_csv)?;
            eprintln!("{} s_tot={} termination={}", theta_line(&r.theta.to_vec()), r.s_tot, r.trace.termination.name());
        }
        Cmd::Audit { common, data } => {
            let cfg = config(&common)?;
            let x = training(&cfg, data.as_deref())?.x;
            let r = client.audit(&AuditRequest { config: cfg, x }).await?;
            let e = &r.equivalence;
            let mut body = format!(
                "s_tot={}\nrows_outside_box={}\nlambda_min={:e}\nlambda_max={:e}\nrequired_lower={:e}\nrequired_upper={:e}\nkl={:e}\nkl_bound={:e}\npass={}\n",
                r.plan.s_tot,
                r.rows_outside_box,
                e.lambda_min,
                e.lambda_max,
                e.required_lower,
                e.required_upper,
                e.kl,
                e.kl_bound,
                e.pass
            );
            if !e.pass {
                body.push_str("warning: spectral equivalence check failed\n");
            }
            emit(common.out.as_deref(), &body)?;
        }
        Cmd::Bench { common, cost_n, cost_evals } => {
            let mut cfg = config(&common)?;
            if let Some(o) = &common.out {
                cfg.out = o.clone();
            }
            let ds = load_dataset(&cfg)?;
            let test = match (&ds.x_test, &ds.y_test) {
                (Some(x), Some(y)) => Some(Table::from_matrix(x, y)),
                _ => None,
            };
            let req = BenchRequest {
                train: Some(Table::from_matrix(&ds.x, &ds.y)),
                test,
                cost_n,
                cost_evals,
                config: cfg.clone(),
            };
            let r = client.bench(&req).await?;
            r.report.write_to(&cfg.out)?;
            print!("{}", r.report.file("mse_vs_s.csv").unwrap_or_default());
            eprintln!("wrote {} files to {}", r.report.files.len(), cfg.out.display());
        }
    }
    Ok(())
}

async fn run(cli: Cli) -> Out<()> {
    let (client, _server) = match cli.server {
        Some(url) => (Client::new(url), None),
        None => {
            let (addr, task) = glf_server::spawn_local().await?;
            (Client::new(format!("http://{addr}")), Some(task))
        }
    };
    execute(&client, cli.cmd).await
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start the runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
