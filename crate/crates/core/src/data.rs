//! Datasets: the synthetic benchmark functions and CSV ingestion.
//!
//! CSV files have a header `x1,...,xd,y` followed by one numeric row per
//! sample. Prediction outputs use `x1,...,xd,y_pred`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub x_test: Option<DMatrix<f64>>,
    pub y_test: Option<Vec<f64>>,
    /// Synthetic seed or source path.
    pub provenance: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// `sin(2x) + sin(6 e^x)`
pub fn wiggly_1d(x: f64) -> f64 {
    (2.0 * x).sin() + (6.0 * x.exp()).sin()
}

/// `(sin x1 + sin(10 e^{x1})) (sin x2 + sin(10 e^{x2}))`
pub fn wiggly_2d(x1: f64, x2: f64) -> f64 {
    (x1.sin() + (10.0 * x1.exp()).sin()) * (x2.sin() + (10.0 * x2.exp()).sin())
}

/// Generator for one purpose (training noise, test inputs, ...) of a seed.
fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn test_size(n: usize) -> usize {
    (n / 4).max(1)
}

/// Equidistant samples of the 1-D test function on `[-1, 1]` with noise
/// variance `0.5^2`, plus `max(n/4, 1)` uniformly random held-out points.
pub fn synth_1d(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(GlfError::invalid("synth_1d needs n >= 2"));
    }
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let mut rn = stream(seed, 0);
    let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let y = xs.iter().map(|&x| wiggly_1d(x) + noise.sample(&mut rn)).collect();
    let nt = test_size(n);
    let mut rx = stream(seed, 1);
    let mut rt = stream(seed, 2);
    let mut xt = Vec::with_capacity(nt);
    while xt.len() < nt {
        let v: f64 = rx.random_range(-1.0..=1.0);
        if !xs.contains(&v) {
            xt.push(v);
        }
    }
    let yt = xt.iter().map(|&x| wiggly_1d(x) + noise.sample(&mut rt)).collect();
    Ok(Dataset {
        x: DMatrix::from_column_slice(n, 1, &xs),
        y,
        x_test: Some(DMatrix::from_column_slice(nt, 1, &xt)),
        y_test: Some(yt),
        provenance: format!("synth_1d(n={n}, seed={seed})"),
    })
}

/// Uniform `m x m` grid on `[-1, 1]^2` (`n = m^2`) of the 2-D test function
/// with noise variance `0.3^2`, plus `max(n/4, 1)` random held-out points.
pub fn synth_2d(n: usize, seed: u64) -> Result<Dataset> {
    let m = (n as f64).sqrt().round() as usize;
    if m * m != n || m < 2 {
        return Err(GlfError::invalid(format!("synth_2d needs a perfect square n >= 4, got {n}")));
    }
    let noise = Normal::new(0.0, 0.3).expect("valid normal");
    let mut rn = stream(seed, 0);
    let ticks: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    let mut x = DMatrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for (a, &x1) in ticks.iter().enumerate() {
        for (b, &x2) in ticks.iter().enumerate() {
            let l = a * m + b;
            x[(l, 0)] = x1;
            x[(l, 1)] = x2;
            y.push(wiggly_2d(x1, x2) + noise.sample(&mut rn));
        }
    }
    let nt = test_size(n);
    let mut rx = stream(seed, 1);
    let mut rt = stream(seed, 2);
    let mut xt = DMatrix::zeros(nt, 2);
    let mut yt = Vec::with_capacity(nt);
    for i in 0..nt {
        let (x1, x2) = (rx.random_range(-1.0..=1.0), rx.random_range(-1.0..=1.0));
        xt[(i, 0)] = x1;
        xt[(i, 1)] = x2;
        yt.push(wiggly_2d(x1, x2) + noise.sample(&mut rt));
    }
    Ok(Dataset {
        x,
        y,
        x_test: Some(xt),
        y_test: Some(yt),
        provenance: format!("synth_2d(n={n}, seed={seed})"),
    })
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Expected input dimension; inferred from the header when `None`.
    pub dim: Option<usize>,
    /// Fraction of rows held out, rounded to the nearest integer count.
    pub split_fraction: f64,
    pub seed: u64,
    /// Replace `y` by `ln y` (all targets must be positive).
    pub log_y: bool,
}

fn parse_header(header: &csv::StringRecord, dim: Option<usize>) -> Result<usize> {
    let cols: Vec<&str> = header.iter().map(|c| c.trim()).collect();
    let d = cols.len().saturating_sub(1);
    let ok = d >= 1
        && cols.last() == Some(&"y")
        && cols[..d].iter().enumerate().all(|(k, c)| *c == format!("x{}", k + 1));
    if !ok {
        return Err(GlfError::Parse {
            line: 1,
            message: format!("header must be x1,...,xd,y; got '{}'", cols.join(",")),
        });
    }
    if let Some(expect) = dim {
        if expect != d {
            return Err(GlfError::Parse {
                line: 1,
                message: format!("header has {d} input columns, expected {expect}"),
            });
        }
    }
    Ok(d)
}

/// Read `x1..xd,y` rows from a reader.
pub fn read_xy(reader: impl Read, dim: Option<usize>, log_y: bool) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| GlfError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let d = parse_header(&header, dim)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| GlfError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != d + 1 {
            return Err(GlfError::Parse { line, message: format!("expected {} fields, got {}", d + 1, rec.len()) });
        }
        let mut vals = Vec::with_capacity(d + 1);
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| GlfError::Parse { line, message: format!("column {} is not a number: '{field}'", k + 1) })?;
            if !v.is_finite() {
                return Err(GlfError::Parse { line, message: format!("column {} is not finite", k + 1) });
            }
            vals.push(v);
        }
        let mut yv = vals[d];
        if log_y {
            if yv <= 0.0 {
                return Err(GlfError::Parse { line, message: "log transform needs y > 0".into() });
            }
            yv = yv.ln();
        }
        xs.extend_from_slice(&vals[..d]);
        ys.push(yv);
    }
    if ys.is_empty() {
        return Err(GlfError::Parse { line: 2, message: "no data rows".into() });
    }
    let n = ys.len();
    Ok((DMatrix::from_row_slice(n, d, &xs), ys))
}

/// Read prediction inputs with header `x1..xd`; a trailing `y` column is
/// accepted and ignored.
pub fn read_x(reader: impl Read) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| GlfError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let d = if cols.last() == Some(&"y") { cols.len() - 1 } else { cols.len() };
    if d == 0 || cols[..d].iter().enumerate().any(|(k, c)| *c != format!("x{}", k + 1)) {
        return Err(GlfError::Parse { line: 1, message: format!("header must be x1,...,xd[,y]; got '{}'", cols.join(",")) });
    }
    let width = cols.len();
    let mut xs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| GlfError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(GlfError::Parse { line, message: format!("expected {width} fields, got {}", rec.len()) });
        }
        for (k, field) in rec.iter().take(d).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| GlfError::Parse { line, message: format!("column {} is not a number: '{field}'", k + 1) })?;
            if !v.is_finite() {
                return Err(GlfError::Parse { line, message: format!("column {} is not finite", k + 1) });
            }
            xs.push(v);
        }
    }
    if xs.is_empty() {
        return Err(GlfError::Parse { line: 2, message: "no data rows".into() });
    }
    Ok(DMatrix::from_row_slice(xs.len() / d, d, &xs))
}

/// Load a CSV dataset and hold out `round(split_fraction * n)` rows chosen by
/// a seeded shuffle. Both parts keep the file order.
pub fn ingest_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    if !(0.0..1.0).contains(&opts.split_fraction) {
        return Err(GlfError::invalid("split fraction must lie in [0, 1)"));
    }
    let file = std::fs::File::open(path)?;
    let (x, y) = read_xy(file, opts.dim, opts.log_y)?;
    let n = y.len();
    let n_test = (opts.split_fraction * n as f64).round() as usize;
    if n_test >= n {
        return Err(GlfError::invalid("split leaves no training rows"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(opts.seed, 3));
    let mut test: Vec<usize> = idx[..n_test].to_vec();
    let mut train: Vec<usize> = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    let take = |rows: &[usize]| DMatrix::from_fn(rows.len(), x.ncols(), |i, k| x[(rows[i], k)]);
    Ok(Dataset {
        x: take(&train),
        y: train.iter().map(|&i| y[i]).collect(),
        x_test: (n_test > 0).then(|| take(&test)),
        y_test: (n_test > 0).then(|| test.iter().map(|&i| y[i]).collect()),
        provenance: path.display().to_string(),
    })
}

/// Write rows with header `x1..xd,<target>`.
pub fn write_xy(writer: impl Write, x: &DMatrix<f64>, y: &[f64], target: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=x.ncols()).map(|k| format!("x{k}")).collect();
    header.push(target.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..x.nrows() {
        let mut rec: Vec<String> = x.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        rec.push(format!("{:.17e}", y[i]));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> GlfError {
    GlfError::Io(std::io::Error::other(e.to_string()))
}

/// Mean squared error.
pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_values() {
        assert!((wiggly_1d(0.0) - 6f64.sin()).abs() < 1e-15);
        assert!((wiggly_2d(0.0, 0.0) - 10f64.sin().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn synth_1d_layout() {
        let d = synth_1d(800, 0).unwrap();
        assert_eq!(d.x[(0, 0)], -1.0);
        assert_eq!(d.x[(799, 0)], 1.0);
        assert_eq!(d.x_test.as_ref().unwrap().nrows(), 200);
        assert_eq!(synth_1d(800, 0).unwrap(), d);
        assert!(synth_1d(1, 0).is_err());
    }

    #[test]
    fn synth_2d_layout() {
        let d = synth_2d(16, 1).unwrap();
        assert_eq!((d.x[(0, 0)], d.x[(0, 1)]), (-1.0, -1.0));
        assert_eq!((d.x[(15, 0)], d.x[(15, 1)]), (1.0, 1.0));
        assert!(synth_2d(15, 1).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let y = vec![1.0, 2.0, 3.0];
        let mut buf = Vec::new();
        write_xy(&mut buf, &x, &y, "y").unwrap();
        let (x2, y2) = read_xy(buf.as_slice(), Some(2), false).unwrap();
        assert_eq!(x2, x);
        assert_eq!(y2, y);

        let bad = "x1,y\n0.5,1.0\n0.7,NaN\n";
        match read_xy(bad.as_bytes(), None, false) {
            Err(GlfError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "x1,y\n0.5,abc\n";
        assert!(matches!(read_xy(bad.as_bytes(), None, false), Err(GlfError::Parse { line: 2, .. })));
        assert!(matches!(read_xy("a,b\n1,2\n".as_bytes(), None, false), Err(GlfError::Parse { line: 1, .. })));
    }

    #[test]
    fn inputs_with_or_without_targets() {
        let a = read_x("x1,x2\n1,2\n3,4\n".as_bytes()).unwrap();
        let b = read_x("x1,x2,y\n1,2,9\n3,4,9\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (2, 2));
        assert!(matches!(read_x("x1,x2\n1\n".as_bytes()), Err(GlfError::Parse { line: 2, .. })));
        assert!(matches!(read_x("x2\n1\n".as_bytes()), Err(GlfError::Parse { line: 1, .. })));
    }
}
