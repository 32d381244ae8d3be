//! Adaptive Gauss-Kronrod (7/15) quadrature for smooth one-dimensional integrands.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Largest number of subintervals kept by the adaptive scheme.
pub const MAX_INTERVALS: usize = 4000;

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrate `f` over the finite interval `[a, b]` to the requested tolerance.
///
/// Global adaptive bisection: the subinterval with the largest error estimate is
/// split until the summed error is below `max(abs_tol, rel_tol * |I|)` or
/// [`MAX_INTERVALS`] pieces exist. Returns the estimate and its error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let (v, e) = gk15(&f, a, b);
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Piece { lo: a, hi: b, value: v, err: e });
    let (mut total, mut total_err) = (v, e);
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_INTERVALS {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.lo, mid);
        let (v2, e2) = gk15(&f, mid, worst.hi);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { lo: worst.lo, hi: mid, value: v1, err: e1 });
        heap.push(Piece { lo: mid, hi: worst.hi, value: v2, err: e2 });
    }
    // Re-sum to drop the drift of the running updates.
    let total = heap.iter().map(|p| p.value).sum();
    let total_err = heap.iter().map(|p| p.err).sum();
    (total, total_err)
}

/// Integrate `f` over `[a, inf)` via `t = a + u / (1 - u)`.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let v = f(a + u / one_minus) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol)
}
