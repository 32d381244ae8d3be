//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the criteria execute sequentially and timings are undisturbed.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use common::{dense_lowrank, model_with, noisy_targets, rel_err, rel_err_c, uniform_points};
use glf::bounds::{compute_umin, PlanOptions};
use glf::config::{DataSource, ExperimentConfig, SweepPoint};
use glf::data::{ingest_csv, synth_1d, CsvOptions};
use glf::diagnostics::{truncation_budget, truncation_probe};
use glf::experiment::{audit, bench_iteration_cost, run_experiment};
use glf::features::rff::rff_build;
use glf::features::{weight_diag, SolverPath, WeightDiagonal};
use glf::gpr::{self, lowrank, Summary};
use glf::hyperopt::Backend;
use glf::kernels::{HyperDomain, HyperParams, KernelFamily, KernelSpec};
use glf::quadrature::{gauss_legendre, tensor_grid};
use nalgebra::DMatrix;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spectral_trials() -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let spec = KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap();
    let domain = HyperDomain::from_corner(vec![0.5], 1.0, 0.1);
    let mut lines = Vec::new();
    let mut all_ok = true;
    let mut kl_ok = true;
    let mut kl_worst = 0.0f64;
    for n in [50usize, 100] {
        let mut passed = 0;
        for trial in 0..20u64 {
            let x = uniform_points(n, 1, -1.0, 1.0, 1000 * n as u64 + trial);
            let rep = audit(&spec, &domain, &x, &PlanOptions::default()).unwrap();
            let eq = &rep.equivalence;
            if eq.pass {
                passed += 1;
                kl_worst = kl_worst.max(eq.kl / eq.kl_bound);
                kl_ok &= eq.kl <= eq.kl_bound;
            }
        }
        all_ok &= passed >= 19;
        lines.push(format!("n={n}: {passed}/20"));
    }
    let secs = t0.elapsed().as_secs_f64();
    all_ok &= secs < 30.0;
    (
        outcome(all_ok, format!("{}, {secs:.1} s", lines.join(", "))),
        outcome(kl_ok, format!("max KL / (1 + 2/n) = {kl_worst:.3e}")),
    )
}

fn truncation() -> Outcome {
    let n = 100;
    let domain = HyperDomain::from_corner(vec![0.5], 1.0, 0.1);
    let budget = truncation_budget(&domain, n);
    let mut ok = true;
    let mut parts = Vec::new();
    for fam in [
        KernelFamily::Laplacian,
        KernelFamily::Matern { nu: 2.5 },
        KernelFamily::Cauchy,
        KernelFamily::ReciprocalSemigroup,
        KernelFamily::Gaussian,
    ] {
        let spec = KernelSpec::isotropic(fam, 1, 2.0).unwrap();
        let u = compute_umin(&spec, &domain, n).unwrap();
        let t = truncation_probe(&spec, &domain, &u, n).unwrap();
        ok &= t <= budget * 1.05;
        parts.push(format!("{}={:.4}", fam.name(), t / budget));
    }
    outcome(ok, format!("tail/budget: {}", parts.join(" ")))
}

fn quadrature_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for m in 1..=64 {
        let rule = gauss_legendre(m).unwrap();
        for k in 0..2 * m {
            let approx = rule.integrate(-1.0, 1.0, |x| x.powi(k as i32));
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            // Odd moments vanish; measure them against the integral of |x|^k.
            let scale = 2.0 / (k as f64 + 1.0);
            worst = worst.max((approx - exact).abs() / scale);
        }
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn finite_difference(fm: &glf::features::FeatureModel, th: &HyperParams) -> Vec<f64> {
    let v = th.to_vec();
    (0..v.len())
        .map(|i| {
            let h = 1e-5 * v[i];
            let mut a = v.clone();
            let mut b = v.clone();
            a[i] += h;
            b[i] -= h;
            let fa = gpr::log_marginal_likelihood(fm, &HyperParams::from_vec(&a), SolverPath::NormalEquations).unwrap();
            let fb = gpr::log_marginal_likelihood(fm, &HyperParams::from_vec(&b), SolverPath::NormalEquations).unwrap();
            (fa - fb) / (2.0 * h)
        })
        .collect()
}

fn gradients() -> Outcome {
    let mut worst_fd = 0.0f64;
    let mut worst_dense = 0.0f64;
    let mut r = common::rng(55);
    for (fam, seed) in [(KernelFamily::Gaussian, 1u64), (KernelFamily::Matern { nu: 2.5 }, 2)] {
        let spec = KernelSpec::isotropic(fam, 1, 2.0).unwrap();
        let g = tensor_grid(&[10.0], &[8], spec.domain_kind()).unwrap();
        let x = uniform_points(40, 1, -1.0, 1.0, seed);
        let y = noisy_targets(&x, seed + 100);
        let fm = model_with(&spec, &g, &x, &y);
        for _ in 0..5 {
            let th = HyperParams::new(
                vec![r.random_range(0.3..1.5)],
                r.random_range(0.5..2.0),
                r.random_range(0.05..0.5),
            );
            let rep = gpr::likelihood_gradient(&fm, &th, SolverPath::NormalEquations).unwrap();
            worst_fd = worst_fd.max(rel_err(&rep.grad, &finite_difference(&fm, &th)));
            let wd = weight_diag(&spec, &g, &th.theta0).unwrap();
            let (_, dense, _) = dense_lowrank(fm.z.as_ref().unwrap(), &wd, th.sigma_f2, th.sigma_n2, &y);
            worst_dense = worst_dense.max(rel_err(&rep.grad, &dense));
        }
    }
    outcome(
        worst_fd <= 1e-5 && worst_dense <= 1e-8,
        format!("finite differences {worst_fd:.2e}, dense oracle {worst_dense:.2e}"),
    )
}

fn path_equivalence() -> Outcome {
    let (n, s) = (200, 40);
    let spec = KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap();
    let g = tensor_grid(&[20.0], &[s], spec.domain_kind()).unwrap();
    let x = uniform_points(n, 1, -1.0, 1.0, 77);
    let y = noisy_targets(&x, 78);
    let fm = model_with(&spec, &g, &x, &y);
    let mut r = common::rng(79);
    let mut worst = 0.0f64;
    for trial in 0..3 {
        let h = (0..s).map(|j| 10f64.powf(-8.0 * j as f64 / (s - 1) as f64)).collect();
        let dlnh = vec![(0..s).map(|_| r.random_range(-3.0..3.0)).collect()];
        let wd = WeightDiagonal { h, dlnh };
        let (sf2, sn2) = (0.5 + trial as f64, 0.02 * (trial + 1) as f64);
        let ne = lowrank::solve_normal(&Summary::from(&fm), &wd, sf2, sn2).unwrap();
        let qr = lowrank::solve_qr(fm.qr.as_ref().unwrap(), fm.yy, n, &wd, sf2, sn2).unwrap();
        worst = worst
            .max(rel_err_c(&qr.w, &ne.w))
            .max((qr.value - ne.value).abs() / ne.value.abs())
            .max(rel_err(&qr.grad(), &ne.grad()));
    }
    outcome(worst <= 1e-8, format!("max relative difference {worst:.2e} (h in 1e-8..1, n=200, s=40)"))
}

/// MSEs in sweep order must not increase, except between points that are
/// both already on the plateau within 5% of the exact backend.
fn nonincreasing_to_plateau(mse: &[f64], exact: f64) -> bool {
    let on_plateau = |m: f64| (m - exact).abs() <= 0.05 * exact;
    mse.windows(2).all(|w| w[1] <= w[0] || (on_plateau(w[0]) && on_plateau(w[1])))
}

fn synthetic_1d() -> Outcome {
    let t0 = Instant::now();
    let cfg = ExperimentConfig {
        kernel: KernelFamily::Gaussian,
        lengthscale: vec![0.05],
        sigma_f2: 5.0,
        sigma_n2: 0.01,
        data: DataSource::Synth1d,
        n: 800,
        box_width: Some(vec![2.0]),
        s: vec![8, 16, 32, 64].into_iter().map(SweepPoint::PerDim).chain([SweepPoint::Planned]).collect(),
        backends: vec![Backend::Glf, Backend::Exact],
        seed: 0,
        ..Default::default()
    };
    let data = synth_1d(800, 0).unwrap();
    let rep = run_experiment(&cfg, &data).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let exact = rep.cells.iter().find(|c| c.backend == Backend::Exact).unwrap().mse;
    let glf: Vec<_> = rep.cells.iter().filter(|c| c.backend == Backend::Glf).collect();
    let mse: Vec<f64> = glf.iter().map(|c| c.mse).collect();
    let planned = glf.iter().find(|c| c.planned).unwrap();
    let close = (planned.mse - exact).abs() <= 0.05 * exact;
    let shape = nonincreasing_to_plateau(&mse, exact);
    let sweep: Vec<String> = glf.iter().map(|c| format!("{}:{:.4}", c.s_tot, c.mse)).collect();
    outcome(
        close && shape && secs < 300.0,
        format!("exact {exact:.4}, glf {}, {secs:.1} s", sweep.join(" ")),
    )
}

fn complexity_shape() -> Outcome {
    let spec = KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap();
    let domain = HyperDomain::from_corner(vec![0.05], 5.0, 0.01);
    let rows = bench_iteration_cost(&spec, &domain, &[800, 8000], 100, 7, 0).unwrap();
    let t = |b: Backend, n: usize| rows.iter().find(|r| r.backend == b && r.n == n).unwrap().seconds_per_eval;
    let glf_ratio = t(Backend::Glf, 8000) / t(Backend::Glf, 800);
    let rff_ratio = t(Backend::Rff, 8000) / t(Backend::Rff, 800);
    outcome(
        glf_ratio <= 4.0 && rff_ratio >= 5.0,
        format!("per-iteration time ratio n=8000/800: glf {glf_ratio:.2} (<= 4), rff {rff_ratio:.2} (>= 5)"),
    )
}

fn rff_sanity() -> Outcome {
    // Frozen-frequency derivative against central differences.
    let spec = KernelSpec::new(KernelFamily::Gaussian, 2, true, vec![2.0, 2.0]).unwrap();
    let x = uniform_points(12, 2, -1.0, 1.0, 5);
    let m = rff_build(&x, &spec, 30, 9).unwrap();
    let l = [0.7, 1.3];
    let mut worst_grad = 0.0f64;
    for k in 0..2 {
        let g = m.grad(&l, k).unwrap();
        let h = 1e-6 * l[k];
        let (mut a, mut b) = (l, l);
        a[k] += h;
        b[k] -= h;
        let fd = (m.features_at(&x, &a).unwrap() - m.features_at(&x, &b).unwrap()) / num_complex::Complex64::new(2.0 * h, 0.0);
        for (gi, fi) in g.iter().zip(fd.iter()) {
            if gi.norm() > 1e-12 {
                worst_grad = worst_grad.max((gi - fi).norm() / gi.norm());
            }
        }
    }
    // Monte Carlo error rate of the seed-averaged absolute kernel error.
    let spec1 = KernelSpec::isotropic(KernelFamily::Gaussian, 1, 2.0).unwrap();
    let th = HyperParams::new(vec![0.5], 1.0, 0.0);
    let pairs: Vec<(f64, f64)> = (0..10).map(|i| (-0.9 + 0.17 * i as f64, 0.8 - 0.13 * i as f64)).collect();
    let xs = DMatrix::from_column_slice(1, 1, &[0.0]);
    let mut scaled = Vec::new();
    for s in [100usize, 1000, 10000] {
        let mut total = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let m = rff_build(&xs, &spec1, s, seed).unwrap();
            for (a, b) in &pairs {
                let approx = m.eval(&th, &[*a], &[*b]).unwrap();
                let exact = spec1.eval_kernel(&th, &[*a], &[*b]).unwrap();
                total += (approx - exact).abs();
            }
        }
        let mean = total / (seeds as usize * pairs.len()) as f64;
        scaled.push(mean * (s as f64).sqrt());
    }
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        worst_grad <= 1e-6 && spread <= 3.0,
        format!("dZ/dL error {worst_grad:.2e}; mean error * sqrt(s) = {scaled:.3?}, spread {spread:.2}"),
    )
}

fn csv_path() -> Outcome {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synth_1k.csv");
    let data = ingest_csv(&path, &CsvOptions { dim: Some(2), split_fraction: 0.12, seed: 3, log_y: false }).unwrap();
    let counts = (data.n(), data.y_test.as_ref().map_or(0, |v| v.len()));
    let cfg = ExperimentConfig {
        kernel: KernelFamily::Gaussian,
        lengthscale: vec![0.2],
        sigma_f2: 1.0,
        sigma_n2: 0.005,
        data: DataSource::Csv(path),
        split: 0.12,
        center_y: true,
        s: vec![SweepPoint::PerDim(16)],
        backends: vec![Backend::Glf],
        seed: 3,
        ..Default::default()
    };
    let rep = run_experiment(&cfg, &data).unwrap();
    let yt = data.y_test.as_ref().unwrap();
    let mean = yt.iter().sum::<f64>() / yt.len() as f64;
    let var = yt.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / yt.len() as f64;
    let mse = rep.cells[0].mse;
    outcome(
        counts == (880, 120) && mse < 0.2 * var,
        format!("train/test {}/{}, glf test MSE {mse:.4} vs target variance {var:.4}", counts.0, counts.1),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    let (c1, c2) = spectral_trials();
    report(1, "spectral equivalence at desk scale", c1);
    report(2, "KL bound on passing trials", c2);
    report(3, "truncation budget for every decay class", truncation());
    report(4, "Gauss-Legendre monomial exactness", quadrature_exactness());
    report(5, "likelihood gradient", gradients());
    report(6, "normal-equations and QR paths agree", path_equivalence());
    report(7, "synthetic 1-D sweep against the exact backend", synthetic_1d());
    report(8, "hyperparameter-learning cost shape", complexity_shape());
    report(9, "random Fourier feature baseline", rff_sanity());
    report(10, "CSV ingestion on the bundled 1k-row file", csv_path());
    if failed == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
