//! Experiment configuration in a flat `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown and repeated
//! keys are errors. Keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `kernel` | `gaussian`, `matern`, `laplacian`, `cauchy`, `semigroup` | `gaussian` |
//! | `nu` | Matérn smoothness | `2.5` |
//! | `anisotropic` | one length scale per dimension | `false` |
//! | `lengthscale` | corner `l0` of the domain (comma list when anisotropic) | `0.05` |
//! | `lengthscale_upper` | upper length-scale bound | `100 * lengthscale` |
//! | `sigma_f2` | corner (largest) signal variance | `5` |
//! | `sigma_f2_lower` | smallest signal variance | `1e-4 * sigma_f2` |
//! | `sigma_n2` | corner (smallest) noise variance | `0.01` |
//! | `sigma_n2_upper` | largest noise variance | `1e4 * sigma_n2` |
//! | `data` | `synth_1d`, `synth_2d` or a CSV path | `synth_1d` |
//! | `n` | synthetic sample count | `800` |
//! | `split` | held-out fraction for CSV data | `0.2` |
//! | `log_y` | fit `ln y` (CSV data) | `false` |
//! | `center_y` | subtract the training mean of `y` | `false` |
//! | `box` | data box width `R` (comma list); default from the data range | |
//! | `s` | nodes per dimension: `planned`, an integer, or a comma sweep | `planned` |
//! | `backends` | comma list of `glf`, `rff`, `exact` | `glf,exact` |
//! | `path` | `normal` or `qr` | `normal` |
//! | `seed` | RNG seed | `0` |
//! | `out` | output directory | `results` |
//! | `max_iter` | optimizer iteration cap | `500` |
//! | `feature_cap` | largest planned feature count | `20000` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bounds::DEFAULT_FEATURE_CAP;
use crate::error::{GlfError, Result};
use crate::features::SolverPath;
use crate::hyperopt::Backend;
use crate::kernels::{HyperDomain, KernelFamily};

const KEYS: &[&str] = &[
    "kernel",
    "nu",
    "anisotropic",
    "lengthscale",
    "lengthscale_upper",
    "sigma_f2",
    "sigma_f2_lower",
    "sigma_n2",
    "sigma_n2_upper",
    "data",
    "n",
    "split",
    "log_y",
    "center_y",
    "box",
    "s",
    "backends",
    "path",
    "seed",
    "out",
    "max_iter",
    "feature_cap",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synth1d,
    Synth2d,
    Csv(PathBuf),
}

/// One entry of the feature sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPoint {
    Planned,
    PerDim(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel: KernelFamily,
    pub anisotropic: bool,
    pub lengthscale: Vec<f64>,
    pub lengthscale_upper: Option<Vec<f64>>,
    pub sigma_f2: f64,
    pub sigma_f2_lower: Option<f64>,
    pub sigma_n2: f64,
    pub sigma_n2_upper: Option<f64>,
    pub data: DataSource,
    pub n: usize,
    pub split: f64,
    pub log_y: bool,
    pub center_y: bool,
    pub box_width: Option<Vec<f64>>,
    pub s: Vec<SweepPoint>,
    pub backends: Vec<Backend>,
    pub path: SolverPath,
    pub seed: u64,
    pub out: PathBuf,
    pub max_iter: usize,
    pub feature_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kernel: KernelFamily::Gaussian,
            anisotropic: false,
            lengthscale: vec![0.05],
            lengthscale_upper: None,
            sigma_f2: 5.0,
            sigma_f2_lower: None,
            sigma_n2: 0.01,
            sigma_n2_upper: None,
            data: DataSource::Synth1d,
            n: 800,
            split: 0.2,
            log_y: false,
            center_y: false,
            box_width: None,
            s: vec![SweepPoint::Planned],
            backends: vec![Backend::Glf, Backend::Exact],
            path: SolverPath::NormalEquations,
            seed: 0,
            out: PathBuf::from("results"),
            max_iter: 500,
            feature_cap: DEFAULT_FEATURE_CAP,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> GlfError {
    GlfError::invalid(format!("config key '{key}': cannot parse '{value}' as {what}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "a finite number"))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| parse_f64(key, p.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "a boolean")),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, v, "a nonnegative integer"))
}

pub fn parse_sweep(v: &str) -> Result<Vec<SweepPoint>> {
    v.split(',')
        .map(|p| match p.trim() {
            "planned" => Ok(SweepPoint::Planned),
            t => match t.parse::<usize>() {
                Ok(k) if k > 0 => Ok(SweepPoint::PerDim(k)),
                _ => Err(bad("s", t, "'planned' or a positive integer")),
            },
        })
        .collect()
}

pub fn parse_path(v: &str) -> Result<SolverPath> {
    match v {
        "normal" => Ok(SolverPath::NormalEquations),
        "qr" => Ok(SolverPath::Qr),
        _ => Err(bad("path", v, "'normal' or 'qr'")),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parse the text format; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| GlfError::Parse {
                line: i + 1,
                message: "expected 'key = value'".into(),
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(GlfError::Parse { line: i + 1, message: format!("unknown key '{k}'") });
            }
            if seen.insert(k.clone(), v).is_some() {
                return Err(GlfError::Parse { line: i + 1, message: format!("key '{k}' given twice") });
            }
        }
        let mut c = ExperimentConfig::default();
        let nu = seen.get("nu").map(|v| parse_f64("nu", v)).transpose()?;
        for (k, v) in &seen {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "kernel" => c.kernel = KernelFamily::parse(v, nu.or(Some(2.5)))?,
                "nu" => {}
                "anisotropic" => c.anisotropic = parse_bool(k, v)?,
                "lengthscale" => c.lengthscale = parse_list(k, v)?,
                "lengthscale_upper" => c.lengthscale_upper = Some(parse_list(k, v)?),
                "sigma_f2" => c.sigma_f2 = parse_f64(k, v)?,
                "sigma_f2_lower" => c.sigma_f2_lower = Some(parse_f64(k, v)?),
                "sigma_n2" => c.sigma_n2 = parse_f64(k, v)?,
                "sigma_n2_upper" => c.sigma_n2_upper = Some(parse_f64(k, v)?),
                "data" => {
                    c.data = match v {
                        "synth_1d" => DataSource::Synth1d,
                        "synth_2d" => DataSource::Synth2d,
                        p => DataSource::Csv(PathBuf::from(p)),
                    }
                }
                "n" => c.n = parse_usize(k, v)?,
                "split" => c.split = parse_f64(k, v)?,
                "log_y" => c.log_y = parse_bool(k, v)?,
                "center_y" => c.center_y = parse_bool(k, v)?,
                "box" => c.box_width = Some(parse_list(k, v)?),
                "s" => c.s = parse_sweep(v)?,
                "backends" => {
                    c.backends = v.split(',').map(Backend::parse).collect::<Result<_>>()?;
                }
                "path" => c.path = parse_path(v)?,
                "seed" => c.seed = v.parse().map_err(|_| bad(k, v, "an unsigned integer"))?,
                "out" => c.out = PathBuf::from(v),
                "max_iter" => c.max_iter = parse_usize(k, v)?,
                "feature_cap" => c.feature_cap = parse_usize(k, v)?,
                _ => unreachable!("key list checked above"),
            }
        }
        if nu.is_some() && !matches!(c.kernel, KernelFamily::Matern { .. }) {
            return Err(GlfError::invalid("config key 'nu' only applies to the matern kernel"));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.backends.is_empty() {
            return Err(GlfError::invalid("at least one backend is required"));
        }
        if self.s.is_empty() {
            return Err(GlfError::invalid("the feature sweep is empty"));
        }
        if !(0.0..1.0).contains(&self.split) {
            return Err(GlfError::invalid("split must lie in [0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(GlfError::invalid("max_iter must be positive"));
        }
        if self.lengthscale.is_empty() {
            return Err(GlfError::invalid("lengthscale needs at least one value"));
        }
        Ok(())
    }

    /// Hyperparameter box for a kernel with `n_theta0` shape parameters.
    pub fn domain(&self, n_theta0: usize) -> Result<HyperDomain> {
        let expand = |v: &[f64], what: &str| -> Result<Vec<f64>> {
            match v.len() {
                1 => Ok(vec![v[0]; n_theta0]),
                k if k == n_theta0 => Ok(v.to_vec()),
                k => Err(GlfError::invalid(format!("{what} has {k} entries, expected 1 or {n_theta0}"))),
            }
        };
        let mut d = HyperDomain::from_corner(expand(&self.lengthscale, "lengthscale")?, self.sigma_f2, self.sigma_n2);
        if let Some(u) = &self.lengthscale_upper {
            d.theta0_upper = expand(u, "lengthscale_upper")?;
        }
        if let Some(v) = self.sigma_f2_lower {
            d.sigma_f2_lower = v;
        }
        if let Some(v) = self.sigma_n2_upper {
            d.sigma_n2_upper = v;
        }
        Ok(d)
    }

    /// Render back to the text format; `parse(to_text())` gives the same config.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "kernel = {}", self.kernel.name());
        if let KernelFamily::Matern { nu } = self.kernel {
            let _ = writeln!(o, "nu = {nu}");
        }
        let _ = writeln!(o, "anisotropic = {}", self.anisotropic);
        let _ = writeln!(o, "lengthscale = {}", fmt_list(&self.lengthscale));
        if let Some(u) = &self.lengthscale_upper {
            let _ = writeln!(o, "lengthscale_upper = {}", fmt_list(u));
        }
        let _ = writeln!(o, "sigma_f2 = {}", self.sigma_f2);
        if let Some(v) = self.sigma_f2_lower {
            let _ = writeln!(o, "sigma_f2_lower = {v}");
        }
        let _ = writeln!(o, "sigma_n2 = {}", self.sigma_n2);
        if let Some(v) = self.sigma_n2_upper {
            let _ = writeln!(o, "sigma_n2_upper = {v}");
        }
        let data = match &self.data {
            DataSource::Synth1d => "synth_1d".to_string(),
            DataSource::Synth2d => "synth_2d".to_string(),
            DataSource::Csv(p) => p.display().to_string(),
        };
        let _ = writeln!(o, "data = {data}");
        let _ = writeln!(o, "n = {}", self.n);
        let _ = writeln!(o, "split = {}", self.split);
        let _ = writeln!(o, "log_y = {}", self.log_y);
        let _ = writeln!(o, "center_y = {}", self.center_y);
        if let Some(b) = &self.box_width {
            let _ = writeln!(o, "box = {}", fmt_list(b));
        }
        let s: Vec<String> = self
            .s
            .iter()
            .map(|p| match p {
                SweepPoint::Planned => "planned".to_string(),
                SweepPoint::PerDim(k) => k.to_string(),
            })
            .collect();
        let _ = writeln!(o, "s = {}", s.join(","));
        let b: Vec<&str> = self.backends.iter().map(|b| b.name()).collect();
        let _ = writeln!(o, "backends = {}", b.join(","));
        let path = match self.path {
            SolverPath::NormalEquations => "normal",
            SolverPath::Qr => "qr",
        };
        let _ = writeln!(o, "path = {path}");
        let _ = writeln!(o, "seed = {}", self.seed);
        let _ = writeln!(o, "out = {}", self.out.display());
        let _ = writeln!(o, "max_iter = {}", self.max_iter);
        let _ = writeln!(o, "feature_cap = {}", self.feature_cap);
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let text = "# comment\nkernel = matern\nnu = 1.5\ns = 8,16,planned\nbackends = glf,rff\nseed = 7\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.kernel, KernelFamily::Matern { nu: 1.5 });
        assert_eq!(c.s, vec![SweepPoint::PerDim(8), SweepPoint::PerDim(16), SweepPoint::Planned]);
        assert_eq!(c.seed, 7);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        assert!(matches!(ExperimentConfig::parse("kernal = gaussian"), Err(GlfError::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("n = 3\nn = 4"), Err(GlfError::Parse { line: 2, .. })));
        assert!(ExperimentConfig::parse("n = -3").is_err());
        assert!(ExperimentConfig::parse("s = 0").is_err());
        assert!(ExperimentConfig::parse("nu = 1.5").is_err());
        assert!(ExperimentConfig::parse("just text").is_err());
    }

    #[test]
    fn domain_overrides() {
        let c = ExperimentConfig::parse("lengthscale = 0.5\nsigma_n2_upper = 2\n").unwrap();
        let d = c.domain(2).unwrap();
        assert_eq!(d.theta0_lower, vec![0.5, 0.5]);
        assert_eq!(d.theta0_upper, vec![50.0, 50.0]);
        assert_eq!(d.sigma_n2_upper, 2.0);
    }
}
