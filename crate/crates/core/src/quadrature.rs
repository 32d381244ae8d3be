//! One-dimensional Gauss-Legendre rules and tensorized, box-scaled grids.
//!
//! Grids are flattened in row-major lexicographic order of the per-dimension
//! indices `(j_1, ..., j_d)`: the last dimension varies fastest.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{GlfError, Result};

/// Largest rule size accepted by [`gauss_legendre`].
pub const MAX_RULE_POINTS: usize = 100_000;
/// Largest flattened grid accepted by [`tensor_grid`].
pub const MAX_GRID_POINTS: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendreRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Evaluate `P_m(x)` and `P_m'(x)` by the three-term recurrence.
fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(m: usize) -> GaussLegendreRule {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    // Roots come in +/- pairs; solve for the positive half and mirror.
    for i in 0..m.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    GaussLegendreRule { nodes, weights }
}

fn rule_cache() -> &'static Mutex<HashMap<usize, Arc<GaussLegendreRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendreRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The `m`-point Gauss-Legendre rule on `[-1, 1]`, nodes increasing.
///
/// Rules are computed by Newton iteration on `P_m` and cached per `m`.
pub fn gauss_legendre(m: usize) -> Result<Arc<GaussLegendreRule>> {
    if m == 0 {
        return Err(GlfError::invalid("Gauss-Legendre rule needs at least one point"));
    }
    if m > MAX_RULE_POINTS {
        return Err(GlfError::Capacity(format!(
            "rule with {m} points exceeds the limit of {MAX_RULE_POINTS}"
        )));
    }
    if let Some(rule) = rule_cache().lock().expect("rule cache poisoned").get(&m) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(compute_rule(m));
    rule_cache()
        .lock()
        .expect("rule cache poisoned")
        .insert(m, Arc::clone(&rule));
    Ok(rule)
}

/// Integration domain of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// `prod [-U_k, U_k]`, used by Fourier features.
    SymmetricBox,
    /// `prod [0, U_k]`, used by semigroup features.
    PositiveBox,
}

/// Tensorized Gauss-Legendre grid over a truncation box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub half_widths: Vec<f64>,
    pub sizes: Vec<usize>,
    pub kind: DomainKind,
    /// Flattened nodes, `total()` rows of `dim()` entries.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.weights.len()
    }

    pub fn node(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[j * d..(j + 1) * d]
    }

    /// Volume of the truncation box.
    pub fn volume(&self) -> f64 {
        match self.kind {
            DomainKind::SymmetricBox => self.half_widths.iter().map(|u| 2.0 * u).product(),
            DomainKind::PositiveBox => self.half_widths.iter().product(),
        }
    }

    /// Flat index of a multi-index.
    pub fn flatten(&self, multi: &[usize]) -> usize {
        flatten_index(&self.sizes, multi)
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        unflatten_index(&self.sizes, flat)
    }
}

pub fn flatten_index(sizes: &[usize], multi: &[usize]) -> usize {
    debug_assert_eq!(sizes.len(), multi.len());
    multi
        .iter()
        .zip(sizes)
        .fold(0, |acc, (&j, &s)| acc * s + j)
}

pub fn unflatten_index(sizes: &[usize], mut flat: usize) -> Vec<usize> {
    let mut multi = vec![0; sizes.len()];
    for (k, &s) in sizes.iter().enumerate().rev() {
        multi[k] = flat % s;
        flat /= s;
    }
    multi
}

/// Build the tensor grid for box half-widths `half_widths` and per-dimension sizes.
pub fn tensor_grid(half_widths: &[f64], sizes: &[usize], kind: DomainKind) -> Result<QuadratureGrid> {
    let d = half_widths.len();
    if d == 0 || d != sizes.len() {
        return Err(GlfError::invalid(format!(
            "grid needs matching non-empty U and s (got {} and {})",
            d,
            sizes.len()
        )));
    }
    if half_widths.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
        return Err(GlfError::invalid("truncation half-widths must be positive and finite"));
    }
    if sizes.contains(&0) {
        return Err(GlfError::invalid("quadrature sizes must be positive"));
    }
    let total = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or_else(|| {
            GlfError::Capacity(format!("grid {sizes:?} exceeds {MAX_GRID_POINTS} points"))
        })?;

    let rules = sizes
        .iter()
        .map(|&s| gauss_legendre(s))
        .collect::<Result<Vec<_>>>()?;

    // Per-dimension scaled nodes and weights.
    let scaled: Vec<(Vec<f64>, Vec<f64>)> = rules
        .iter()
        .zip(half_widths)
        .map(|(rule, &u)| match kind {
            DomainKind::SymmetricBox => (
                rule.nodes.iter().map(|x| u * x).collect(),
                rule.weights.iter().map(|w| u * w).collect(),
            ),
            DomainKind::PositiveBox => (
                rule.nodes.iter().map(|x| u * (x + 1.0) / 2.0).collect(),
                rule.weights.iter().map(|w| u * w / 2.0).collect(),
            ),
        })
        .collect();

    let mut nodes = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let multi = unflatten_index(sizes, flat);
        let mut w = 1.0;
        for (k, &j) in multi.iter().enumerate() {
            nodes.push(scaled[k].0[j]);
            w *= scaled[k].1[j];
        }
        weights.push(w);
    }

    Ok(QuadratureGrid {
        half_widths: half_widths.to_vec(),
        sizes: sizes.to_vec(),
        kind,
        nodes,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_points_rejected() {
        assert!(matches!(gauss_legendre(0), Err(GlfError::InvalidArgument(_))));
    }

    #[test]
    fn one_and_two_point_rules() {
        let r1 = gauss_legendre(1).unwrap();
        assert_eq!(r1.nodes, vec![0.0]);
        assert!((r1.weights[0] - 2.0).abs() < 1e-15);

        let r2 = gauss_legendre(2).unwrap();
        let root = 1.0 / 3f64.sqrt();
        assert!((r2.nodes[0] + root).abs() < 1e-15);
        assert!((r2.nodes[1] - root).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-14);
        assert!((r2.weights[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn five_points_integrate_x8() {
        let r = gauss_legendre(5).unwrap();
        let v = r.integrate(-1.0, 1.0, |x| x.powi(8));
        assert!((v - 2.0 / 9.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn rule_invariants() {
        for m in 1..=64 {
            let r = gauss_legendre(m).unwrap();
            for w in r.nodes.windows(2) {
                assert!(w[0] < w[1]);
            }
            for i in 0..m {
                assert!((r.nodes[i] + r.nodes[m - 1 - i]).abs() < 1e-14);
                assert!(r.weights[i] > 0.0);
                assert!((r.weights[i] - r.weights[m - 1 - i]).abs() < 1e-14);
            }
            let total: f64 = r.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "m={m} sum={total}");
        }
    }

    #[test]
    fn large_rule_still_sums_to_two() {
        let r = gauss_legendre(2000).unwrap();
        let total: f64 = r.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_grids() {
        let g = tensor_grid(&[2.0], &[1], DomainKind::SymmetricBox).unwrap();
        assert_eq!(g.nodes, vec![0.0]);
        assert!((g.weights[0] - 4.0).abs() < 1e-15);

        let g = tensor_grid(&[1.0, 1.0], &[1, 1], DomainKind::SymmetricBox).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.0]);
        assert!((g.weights[0] - 4.0).abs() < 1e-15);

        let g = tensor_grid(&[3.0], &[8], DomainKind::SymmetricBox).unwrap();
        let total: f64 = g.weights.iter().sum();
        assert!((total - 6.0).abs() < 1e-12 * 6.0);
    }

    #[test]
    fn positive_box_nodes_and_volume() {
        let g = tensor_grid(&[2.0, 5.0], &[7, 4], DomainKind::PositiveBox).unwrap();
        for j in 0..g.total() {
            let node = g.node(j);
            assert!(node[0] > 0.0 && node[0] < 2.0);
            assert!(node[1] > 0.0 && node[1] < 5.0);
        }
        let total: f64 = g.weights.iter().sum();
        assert!((total - 10.0).abs() < 1e-12 * 10.0);
    }

    #[test]
    fn row_major_order() {
        let g = tensor_grid(&[1.0, 1.0], &[2, 3], DomainKind::SymmetricBox).unwrap();
        let r2 = gauss_legendre(2).unwrap();
        let r3 = gauss_legendre(3).unwrap();
        // flat index 1 is (0, 1): first dimension fixed, last varies.
        assert_eq!(g.node(1), &[r2.nodes[0], r3.nodes[1]]);
        assert_eq!(g.flatten(&[1, 2]), 5);
        assert_eq!(g.unflatten(5), vec![1, 2]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(tensor_grid(&[], &[], DomainKind::SymmetricBox).is_err());
        assert!(tensor_grid(&[1.0], &[1, 2], DomainKind::SymmetricBox).is_err());
        assert!(tensor_grid(&[-1.0], &[2], DomainKind::SymmetricBox).is_err());
        assert!(matches!(
            tensor_grid(&[1.0; 3], &[1000, 1000, 1000], DomainKind::SymmetricBox),
            Err(GlfError::Capacity(_))
        ));
    }
}
