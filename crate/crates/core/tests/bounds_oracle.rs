//! Truncation and quadrature-size bounds against hand-derived values.

use std::f64::consts::{PI, SQRT_2};

use glf::bounds::{compute_s, compute_umin, plan, polyellipse_params, poly_r_upper_bound, s_bound_raw, PlanOptions};
use glf::kernels::{DecayClass, HyperDomain, KernelFamily, KernelSpec};

fn dom(theta: f64, sf: f64, sn: f64) -> HyperDomain {
    HyperDomain::from_corner(vec![theta], sf, sn)
}

fn spec(f: KernelFamily, width: f64) -> KernelSpec {
    KernelSpec::isotropic(f, 1, width).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

/// Composite Simpson on `int_a^inf f` through `eta = a + t / (1 - t)`.
fn tail(f: impl Fn(f64) -> f64, a: f64) -> f64 {
    let m = 200_000;
    let h = 1.0 / m as f64;
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let j = 1.0 / (1.0 - t);
        f(a + t * j) * j * j
    };
    let mut s = g(0.0) + g(1.0);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(i as f64 * h);
    }
    s * h / 3.0
}

/// Hand-coded `(1/d) ln(2^{2d+2} M^2 C sigma_f^2 n^2 / sigma_n^2)`, plus
/// `ln U - ln(rho - 1)` over `2 ln rho`, plus one.
fn s_display(d: f64, m: f64, c: f64, sf: f64, sn: f64, n: f64, u: f64, rho: f64) -> f64 {
    let lead = (2f64.powf(2.0 * d + 2.0) * m * m * c * sf * n * n / sn).ln() / d;
    (lead + u.ln() - (rho - 1.0).ln()) / (2.0 * rho.ln()) + 1.0
}

#[test]
fn gaussian_worked_example() {
    let sp = spec(KernelFamily::Gaussian, 2.0);
    let d = dom(1.0, 1.0, 1.0);
    let u = compute_umin(&sp, &d, 100).unwrap();
    assert!(close(u[0], (2.0 * (2e4f64).ln()).sqrt(), 1e-14));
    assert!(close(u[0], 4.450502792390120, 1e-13));
    let pe = polyellipse_params(&sp, &d, &u).unwrap();
    assert!(close(pe.rho[0], 1.0 + SQRT_2, 1e-15));
    assert!(close(pe.beta[0], 2.0 * u[0], 1e-15));
    assert!((pe.m_ub - 85.68).abs() < 0.01);
    let c = (2.0 * PI).powf(-0.5) * (u[0] * u[0] / 2.0).exp();
    assert!(close(pe.c_ub, c, 1e-12));
    let raw = s_bound_raw(&sp, &d, 100, &u, &pe).unwrap();
    let oracle = s_display(1.0, pe.m_ub, c, 1.0, 1.0, 100.0, u[0], 1.0 + SQRT_2);
    assert!(close(raw[0], oracle, 1e-12));
    assert!(close(raw[0], 18.59465432233876, 1e-12));
    assert_eq!(compute_s(&sp, &d, 100, &u, &pe).unwrap(), vec![19]);
}

#[test]
fn gaussian_sizes_grow_like_log_n() {
    let sp = spec(KernelFamily::Gaussian, 2.0);
    let d = dom(1.0, 1.0, 1.0);
    let s3 = plan(&sp, &d, 1_000, &PlanOptions::default()).unwrap().s[0];
    let s6 = plan(&sp, &d, 1_000_000, &PlanOptions::default()).unwrap().s[0];
    assert_eq!((s3, s6), (25, 44));
    assert!(s6 as f64 / s3 as f64 <= 2.2);
}

#[test]
fn desk_scale_and_sweep_plans() {
    let sp = spec(KernelFamily::Gaussian, 2.0);
    let p50 = plan(&sp, &dom(0.5, 1.0, 0.1), 50, &PlanOptions::default()).unwrap();
    assert!(close(p50.u[0], 9.303667356224763, 1e-12));
    assert_eq!(p50.s, vec![26]);
    let p100 = plan(&sp, &dom(0.5, 1.0, 0.1), 100, &PlanOptions::default()).unwrap();
    assert!(close(p100.u[0], 9.881729664600292, 1e-12));
    assert_eq!(p100.s, vec![28]);
    let p800 = plan(&sp, &dom(0.05, 5.0, 0.01), 800, &PlanOptions::default()).unwrap();
    assert!(close(p800.u[0], 127.36397837479164, 1e-12));
    assert_eq!(p800.s, vec![171]);
    assert_eq!(p800.s_tot, 171);
}

#[test]
fn semigroup_umin_and_class() {
    let sp = spec(KernelFamily::ReciprocalSemigroup, 1.0);
    let u = compute_umin(&sp, &dom(1.0, 1.0, 1.0), 100).unwrap();
    assert!(close(u[0], (2e4f64).ln(), 1e-14));
    assert!((u[0] - 9.90349).abs() < 1e-5);
    let dc = sp.decay_class(&dom(2.0, 1.0, 1.0)).unwrap();
    assert_eq!(dc.class, DecayClass::Exp1);
    assert!(close(dc.c, 2.0, 1e-15) && close(dc.l[0], 2.0, 1e-15));
}

#[test]
fn matern_root_and_upper_bound() {
    let sp = spec(KernelFamily::Matern { nu: 2.5 }, 2.0);
    let d = dom(1.0, 1.0, 1.0);
    let dc = sp.decay_class(&d).unwrap();
    assert_eq!(dc.class, DecayClass::PolyR { r: 3.0 });
    assert!(close(dc.l[0], 1.0 / 5f64.sqrt(), 1e-15));
    let u = compute_umin(&sp, &d, 100).unwrap();
    assert!(close(u[0], 12.89282531555585, 1e-10));
    let x = u[0] * dc.l[0];
    assert!(close(x, 5.765846765522614, 1e-10));
    let hi = poly_r_upper_bound(&dc, 3.0, 1, 100.0, 1.0, 1.0);
    assert!(x <= hi);
    // The residual of the truncation equation, with the tail integral done by hand.
    let c = dc.c;
    let p = |eta: f64| c * (1.0 + (dc.l[0] * eta).powi(2)).powi(-3);
    let lhs = 100.0 * 2.0 * tail(p, u[0]);
    assert!((lhs - 1.0 / 200.0).abs() <= 1e-10, "residual {}", lhs - 1.0 / 200.0);
}

#[test]
fn matern_rho_example() {
    let sp = spec(KernelFamily::Matern { nu: 2.5 }, 2.0);
    let pe = polyellipse_params(&sp, &dom(1.0, 1.0, 1.0), &[10.0]).unwrap();
    assert!((pe.beta[0] - 2.23607).abs() < 1e-5);
    assert!((pe.rho[0] - 1.11803).abs() < 1e-5);
    // C = Gamma(3) / (Gamma(5/2) sqrt(5 pi)) (3/4)^{-3} for l0 = 1.
    let gamma_52 = 0.75 * PI.sqrt();
    let c = 2.0 / (gamma_52 * (5.0 * PI).sqrt()) * (0.75f64).powi(-3);
    assert!(close(pe.c_ub, c, 1e-12));
    assert!(close(pe.m_ub, (5f64.sqrt() * 2.0 / 4.0).exp(), 1e-12));
}

/// Hand-written one-dimensional densities at scale `l`.
fn density(f: KernelFamily, l: f64) -> Box<dyn Fn(f64) -> f64> {
    match f {
        KernelFamily::Gaussian => Box::new(move |e: f64| l / (2.0 * PI).sqrt() * (-0.5 * (l * e).powi(2)).exp()),
        KernelFamily::Laplacian => Box::new(move |e: f64| l / (PI * (1.0 + (l * e).powi(2)))),
        KernelFamily::Cauchy => Box::new(move |e: f64| (-l * e.abs()).exp()),
        KernelFamily::Matern { nu } => {
            assert_eq!(nu, 2.5);
            let c = 2.0 / (0.75 * PI.sqrt() * (5.0 * PI).sqrt()) * l;
            Box::new(move |e: f64| c * (1.0 + (l * e).powi(2) / 5.0).powi(-3))
        }
        KernelFamily::ReciprocalSemigroup => Box::new(move |e: f64| l * (-l * e).exp()),
    }
}

#[test]
fn truncation_tail_meets_budget_for_every_class() {
    let families = [
        KernelFamily::Gaussian,
        KernelFamily::Laplacian,
        KernelFamily::Cauchy,
        KernelFamily::Matern { nu: 2.5 },
        KernelFamily::ReciprocalSemigroup,
    ];
    for (theta, sf, sn, n) in [(1.0, 1.0, 1.0, 100usize), (0.3, 2.0, 0.05, 400)] {
        for f in families {
            let sp = spec(f, 2.0);
            let u = compute_umin(&sp, &dom(theta, sf, sn), n).unwrap();
            let sides = if f == KernelFamily::ReciprocalSemigroup { 1.0 } else { 2.0 };
            let t = sides * tail(density(f, theta), u[0]);
            let budget = 1.0 / (2.0 * sf * n as f64);
            let term = n as f64 / sn * t;
            assert!(term <= 1.05 * budget, "{}: {term} vs {budget}", f.name());
        }
    }
}

#[test]
fn laplacian_cot_formula() {
    // Two-sided tail (2/pi) atan(1 / (l U)) equals sigma_n^2 / (2 sigma_f^2 n^2) exactly.
    let sp = spec(KernelFamily::Laplacian, 2.0);
    let u = compute_umin(&sp, &dom(0.7, 1.0, 1.0), 100).unwrap();
    let t = 2.0 / PI * (1.0 / (0.7 * u[0])).atan();
    assert!(close(t, 1.0 / 2e4, 1e-10));
}

#[test]
fn umin_monotone_in_lengthscale_and_n() {
    for f in [KernelFamily::Gaussian, KernelFamily::Matern { nu: 2.5 }, KernelFamily::Laplacian] {
        let sp = spec(f, 2.0);
        let mut prev = f64::INFINITY;
        for l in [0.1, 0.3, 1.0, 3.0] {
            let u = compute_umin(&sp, &dom(l, 1.0, 0.1), 200).unwrap()[0];
            assert!(u <= prev, "{} not nonincreasing in l", f.name());
            prev = u;
        }
    }
    for f in [
        KernelFamily::Gaussian,
        KernelFamily::Matern { nu: 2.5 },
        KernelFamily::Laplacian,
        KernelFamily::Cauchy,
        KernelFamily::ReciprocalSemigroup,
    ] {
        let sp = spec(f, 2.0);
        let mut prev = 0.0;
        for n in [10, 100, 1000, 10000] {
            let u = compute_umin(&sp, &dom(0.5, 1.0, 0.1), n).unwrap()[0];
            assert!(u >= prev, "{} not nondecreasing in n", f.name());
            prev = u;
        }
    }
}

#[test]
fn size_bound_is_monotone_in_its_inputs() {
    let sp = spec(KernelFamily::Gaussian, 2.0);
    let d = dom(1.0, 1.0, 1.0);
    let u = [4.0];
    let pe = polyellipse_params(&sp, &d, &u).unwrap();
    let base = s_bound_raw(&sp, &d, 100, &u, &pe).unwrap()[0];
    let mut bigger = pe.clone();
    bigger.m_ub *= 2.0;
    assert!(s_bound_raw(&sp, &d, 100, &u, &bigger).unwrap()[0] > base);
    let mut bigger = pe.clone();
    bigger.c_ub *= 2.0;
    assert!(s_bound_raw(&sp, &d, 100, &u, &bigger).unwrap()[0] > base);
    assert!(s_bound_raw(&sp, &d, 100, &[5.0], &pe).unwrap()[0] > base);
    assert!(s_bound_raw(&sp, &d, 101, &u, &pe).unwrap()[0] > base);
}

#[test]
fn report_matches_plan_fields() {
    let sp = spec(KernelFamily::Gaussian, 2.0);
    let p = plan(&sp, &dom(1.0, 1.0, 1.0), 100, &PlanOptions::default()).unwrap();
    let kv = p.key_values();
    let get = |k: &str| kv.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone());
    assert_eq!(get("s_tot").as_deref(), Some("19"));
    assert_eq!(get("n").as_deref(), Some("100"));
    assert!(p.report().contains("s_tot (bound) = 19"));
    assert!(!p.exceeds_n);
    let small = plan(&sp, &dom(1.0, 1.0, 1.0), 10, &PlanOptions::default()).unwrap();
    assert!(small.exceeds_n && small.report().contains("as many features as data points"));
}
