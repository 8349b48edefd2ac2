//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.
//!
//! `ACCEPTANCE_ONLY=3,5` restricts the run to the listed criteria.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use common::*;
use dpi::eval::{projected_energy_distances, reverse_sde_sample, variance_report, ScoreSource};
use dpi::labels::{estimate_labels, generate_dataset, FrozenSolution, LabelMode};
use dpi::net::Network;
use dpi::picard::RunReport;
use dpi::problems::{GmmSpec, HjbGmm};
use dpi::{dpi_solve, DpiConfig, InitialLaw, Problem, Purpose, SdeKind, SdeModel, SeedStream, SolutionFn, SolveOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn minutes(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() / 60.0
}

/// User plus system CPU time of this process, in minutes.
fn cpu_minutes() -> f64 {
    // SAFETY: getrusage only writes into the zeroed struct we pass.
    let usage = unsafe {
        let mut u: libc::rusage = std::mem::zeroed();
        libc::getrusage(libc::RUSAGE_SELF, &mut u);
        u
    };
    let secs = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
    (secs(usage.ru_utime) + secs(usage.ru_stime)) / 60.0
}

// ---------------------------------------------------------------------------
// 1. Derivative engine

const H_PARAM: f64 = 1e-3;

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut worst_g, mut worst_h, mut worst_p) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..50u64 {
        let net = random_network(10, &[32, 32], 100 + n);
        let mut r = rng(200 + n);
        let x = normals(&mut r, 10, 1.0);
        let t = normals(&mut r, 1, 0.5)[0];
        let b = net.derivatives(t, &x, true).unwrap();
        let fg = fd_gradient(&net, t, &x, 1e-5);
        let fh = fd_hess_diag(&net, t, &x, 1e-5);
        for i in 0..10 {
            worst_g = worst_g.max(rel_err(b.grad_x[i], fg[i], 1e-6));
            worst_h = worst_h.max(rel_err(b.hess_diag.as_ref().unwrap()[i], fh[i], 1e-6));
        }
        let batch = random_batch(&net, 4, 300 + n);
        let lambdas = [0.0, 1.0, 100.0];
        let fds = fd_param_grads(&net, &batch, &lambdas, H_PARAM);
        for (lambda, fd) in lambdas.into_iter().zip(&fds) {
            let (_, g) = net.loss_and_param_grad(&batch, lambda).unwrap();
            for (a, b) in g.flatten().iter().zip(fd) {
                worst_p = worst_p.max(rel_err(*a, *b, 1e-6));
            }
        }
    }
    let mins = minutes(start);
    outcome(
        worst_g <= 1e-5 && worst_h <= 1e-4 && worst_p <= 1e-4 && mins < 1.0,
        format!(
            "max rel err grad {worst_g:.2e} (<= 1e-5), hess {worst_h:.2e} (<= 1e-4), params {worst_p:.2e} (<= 1e-4); {mins:.2} min (< 1)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Sampler laws

struct Law {
    mean_x: f64,
    var_x: f64,
    var_i: f64,
    cov: f64,
}

fn closed_form(kind: SdeKind, x: f64, dt: f64) -> Law {
    match kind {
        SdeKind::BrownianMotion { scale } => Law {
            mean_x: x,
            var_x: scale * scale * dt,
            var_i: dt / (scale * scale),
            cov: dt,
        },
        SdeKind::GeometricBrownian => Law {
            mean_x: x,
            var_x: x * x * dt.exp_m1(),
            var_i: dt / (x * x),
            cov: dt,
        },
        SdeKind::OrnsteinUhlenbeck { theta } => {
            let v = -(-2.0 * theta * dt).exp_m1() / (2.0 * theta);
            Law {
                mean_x: x * (-theta * dt).exp(),
                var_x: v,
                var_i: v,
                cov: dt * (-theta * dt).exp(),
            }
        }
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let x0 = [0.8, -1.5, 2.0];
    let (t, s1, s2) = (0.2, 0.7, 1.2);
    let n = 100_000;
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    let kinds = [
        SdeKind::BrownianMotion { scale: 1.0 },
        SdeKind::GeometricBrownian,
        SdeKind::OrnsteinUhlenbeck { theta: 0.5 },
    ];
    for (ki, kind) in kinds.into_iter().enumerate() {
        let model = SdeModel::new(kind, 3).unwrap();
        let mut r = SeedStream::new(77).rng(Purpose::Check, 2, ki as u64);
        let draws: Vec<_> = (0..n).map(|_| model.sample_two_times(t, &x0, s1, s2, &mut r).unwrap()).collect();
        for (which, dt) in [(0usize, s1 - t), (1, s2 - t)] {
            for i in 0..3 {
                let pick = |f: &dyn Fn(&dpi::sde::PathDraw) -> f64| -> Vec<f64> {
                    draws.iter().map(|d| if which == 0 { f(&d.0) } else { f(&d.1) }).collect()
                };
                let xs = pick(&|p| p.x_s[i]);
                let is = pick(&|p| p.bel_integral[i]);
                let law = closed_form(kind, x0[i], dt);
                let (mx, sex) = mean_se(&xs);
                let (mi, sei) = mean_se(&is);
                let dx: Vec<f64> = xs.iter().map(|v| (v - mx).powi(2)).collect();
                let di: Vec<f64> = is.iter().map(|v| (v - mi).powi(2)).collect();
                let (vx, sevx) = mean_se(&dx);
                let (vi, sevi) = mean_se(&di);
                let (c, sec) = cov_se(&xs, &is);
                for (name, got, want, se) in [
                    ("E[X]", mx, law.mean_x, sex),
                    ("E[I]", mi, 0.0, sei),
                    ("Var X", vx, law.var_x, sevx),
                    ("Var I", vi, law.var_i, sevi),
                    ("Cov(X,I)", c, law.cov, sec),
                ] {
                    let z = (got - want).abs() / se;
                    if z > worst {
                        worst = z;
                        where_ = format!("{kind:?} dt={dt} coord {i} {name}");
                    }
                }
            }
            // Independent coordinates.
            let a: Vec<f64> = draws.iter().map(|d| if which == 0 { d.0.x_s[0] } else { d.1.x_s[0] }).collect();
            let b: Vec<f64> = draws.iter().map(|d| if which == 0 { d.0.x_s[1] } else { d.1.x_s[1] }).collect();
            let (c, se) = cov_se(&a, &b);
            if c.abs() / se > worst {
                worst = c.abs() / se;
                where_ = format!("{kind:?} cross-coordinate covariance");
            }
        }
    }
    let mins = minutes(start);
    outcome(
        worst <= 4.0 && mins < 1.0,
        format!("worst deviation {worst:.2} standard errors (<= 4) at {where_}; {mins:.2} min (< 1)"),
    )
}

// ---------------------------------------------------------------------------
// 3. Estimator unbiasedness on the heat oracle

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let d = 10;
    let p = Problem::heat_oracle(d, 1.0).unwrap();
    let ex = p.exact().unwrap();
    let zero = FrozenSolution::Zero { d };
    let law = InitialLaw::Gaussian { mean: vec![0.0; d], variance_scale: 1.0 };
    let seeds = SeedStream::new(3);
    let (mut dy, mut vy) = (0.0, 0.0);
    let mut dz = vec![0.0; d];
    let mut vz = vec![0.0; d];
    let n = 200;
    for i in 0..n {
        let mut r = seeds.rng(Purpose::Check, 3, i);
        let (t, x) = SdeModel::brownian(d).sample_data_point(&law, 1.0, &mut r).unwrap();
        let est = estimate_labels(&p, &p.forward_model(), &zero, t, &x, 4096, &mut r, LabelMode::ControlVariate).unwrap();
        dy += est.y - ex.value(t, &x);
        vy += est.y_std_err.powi(2);
        let g = ex.gradient(t, &x);
        for j in 0..d {
            dz[j] += est.z.as_ref().unwrap()[j] - g[j];
            vz[j] += est.z_std_err.as_ref().unwrap()[j].powi(2);
        }
    }
    let zy = dy.abs() / vy.sqrt();
    let zz = (0..d).map(|j| dz[j].abs() / vz[j].sqrt()).fold(0.0, f64::max);
    let mins = minutes(start);
    outcome(
        zy <= 4.0 && zz <= 4.0 && mins < 2.0,
        format!("pooled y bias {zy:.2} se, worst z component {zz:.2} se (<= 4); {mins:.2} min (< 2)"),
    )
}

// ---------------------------------------------------------------------------
// 4. Variance dichotomy

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let d = 10;
    let model = SdeModel::brownian(d);
    let eps = [1e-1, 1e-2, 1e-3];
    let x = vec![0.0; d];
    let mut r = SeedStream::new(4).rng(Purpose::Variance, 0, 0);
    let naive = variance_report(&model, &|_| 1.0, &|_, _| 0.0, &x, 1.0, &eps, 100_000, &mut r).unwrap();
    let a: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * i as f64).collect();
    let linear = |y: &[f64]| y.iter().zip(&a).map(|(u, v)| u * v).sum::<f64>();
    let cv = variance_report(&model, &linear, &|_, _| 0.0, &x, 1.0, &eps, 100_000, &mut r).unwrap();
    let exponent = naive.naive_exponent.unwrap_or(f64::NAN);
    let mins = minutes(start);
    outcome(
        (0.8..=1.2).contains(&exponent) && cv.cv_ratio <= 2.0 && mins < 2.0,
        format!(
            "naive exponent {exponent:.3} (in [0.8, 1.2]), cv max/min {:.3} (<= 2); {mins:.2} min (< 2)",
            cv.cv_ratio
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Fixed point of the label map on Burgers

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let d = 10;
    let p = Arc::new(Problem::burgers(d, 1.0, 1.0, 1.0).unwrap());
    let ex = p.exact().unwrap();
    let uk = FrozenSolution::Exact(p.clone());
    let seeds = SeedStream::new(5);
    let law = InitialLaw::Point(vec![0.0; d]);
    let (mut dy, mut vy) = (0.0, 0.0);
    let (mut dz, mut vz) = (vec![0.0; d], vec![0.0; d]);
    for i in 0..200 {
        let mut r = seeds.rng(Purpose::Check, 5, i);
        let (t, x) = SdeModel::brownian(d).sample_data_point(&law, 1.0, &mut r).unwrap();
        let est = estimate_labels(&p, &p.forward_model(), &uk, t, &x, 4096, &mut r, LabelMode::ControlVariate).unwrap();
        dy += est.y - ex.value(t, &x);
        vy += est.y_std_err.powi(2);
        let g = ex.gradient(t, &x);
        for j in 0..d {
            dz[j] += est.z.as_ref().unwrap()[j] - g[j];
            vz[j] += est.z_std_err.as_ref().unwrap()[j].powi(2);
        }
    }
    let zy = dy.abs() / vy.sqrt();
    let zz = (0..d).map(|j| dz[j].abs() / vz[j].sqrt()).fold(0.0, f64::max);
    let mins = minutes(start);
    outcome(
        zy <= 4.0 && mins < 2.0,
        format!("pooled y deviation {zy:.2} se (<= 4); gradient labels worst {zz:.2} se (informational); {mins:.2} min (< 2)"),
    )
}

// ---------------------------------------------------------------------------
// 6, 7, 10. Burgers runs

fn burgers_config(lambda: f64, seed: u64) -> DpiConfig {
    DpiConfig {
        k: 10,
        m: 1024,
        n: 4096,
        epochs: 16,
        lambda,
        lr: 1e-3,
        batch_size: 512,
        seed,
        widths: vec![64; 4],
        eval_points: 10_000,
    }
}

struct Run {
    net: Network,
    report: RunReport,
    minutes: f64,
    cpu_minutes: f64,
}

fn burgers_run(lambda: f64, seed: u64) -> Run {
    let d = 10;
    let p = Problem::burgers(d, 1.0, 1.0, 1.0).unwrap();
    let start = Instant::now();
    let cpu = cpu_minutes();
    let (net, report) = dpi_solve(
        &burgers_config(lambda, seed),
        &p,
        &SdeModel::brownian(d),
        &InitialLaw::Point(vec![0.0; d]),
        SolveOptions::default(),
    )
    .unwrap();
    Run {
        net,
        report,
        minutes: minutes(start),
        cpu_minutes: cpu_minutes() - cpu,
    }
}

fn last(r: &Run) -> (f64, f64) {
    let rec = r.report.records.last().unwrap();
    (rec.rmae, rec.g_rmae)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_6(runs: &[&Run]) -> Outcome {
    let rm = median(runs.iter().map(|r| last(r).0).collect());
    let gm = median(runs.iter().map(|r| last(r).1).collect());
    let mins: f64 = runs.iter().map(|r| r.minutes).sum();
    let cpu: f64 = runs.iter().map(|r| r.cpu_minutes).sum();
    let per_seed: Vec<String> = runs.iter().map(|r| format!("{:.4}/{:.4}", last(r).0, last(r).1)).collect();
    let first = runs[0].report.records[0].rmae;
    outcome(
        rm <= 0.05 && gm <= 0.15 && cpu <= 30.0,
        format!(
            "median rmae {rm:.4} (<= 0.05), median g_rmae {gm:.4} (<= 0.15); per seed rmae/g_rmae {}; seed 0 rmae iteration 1 -> 10: {first:.4} -> {:.4}; {cpu:.1} CPU min (<= 30), {mins:.1} wall min",
            per_seed.join(", "),
            last(runs[0]).0
        ),
    )
}

fn criterion_7(runs: &[(f64, &Run)]) -> Outcome {
    let mins: f64 = runs.iter().map(|(_, r)| r.minutes).sum();
    let ok = runs.iter().all(|(_, r)| last(r).0 <= 0.08);
    let detail: Vec<String> = runs.iter().map(|(l, r)| format!("lambda {l}: rmae {:.4}", last(r).0)).collect();
    outcome(ok && mins <= 90.0, format!("{} (each <= 0.08); {mins:.1} min (<= 90)", detail.join(", ")))
}

fn criterion_10(net: &Network) -> Outcome {
    let d = 10;
    let p = Problem::burgers(d, 1.0, 1.0, 1.0).unwrap();
    let uk = FrozenSolution::Network(Arc::new(net.clone()));
    let law = InitialLaw::Point(vec![0.0; d]);
    let seeds = SeedStream::new(10);
    let time = |mode| {
        let start = Instant::now();
        generate_dataset(&p, &SdeModel::brownian(d), &law, &uk, 4096, 1024, &seeds, 1, mode).unwrap();
        start.elapsed().as_secs_f64()
    };
    let without = time(LabelMode::ValueOnly);
    let with = time(LabelMode::ControlVariate);
    let rel = (with - without).abs() / without;
    outcome(
        rel <= 0.6,
        format!("label time with z {with:.1}s, without {without:.1}s, relative difference {:.1}% (<= 60%)", 100.0 * rel),
    )
}

// ---------------------------------------------------------------------------
// 8. HJB

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let d = 4;
    let spec = GmmSpec::random(d, 3, 1.0, 2.0, 8);
    let hjb = HjbGmm {
        d,
        horizon: 0.5,
        spec: spec.clone(),
    };
    let p = Problem::hjb_gmm(d, 0.5, spec).unwrap();
    let cfg = DpiConfig {
        lambda: 100.0,
        ..burgers_config(100.0, 8)
    };
    let law = InitialLaw::Gaussian { mean: vec![0.0; d], variance_scale: 4.0 };
    let (net, report) = dpi_solve(&cfg, &p, &SdeModel::brownian(d), &law, SolveOptions::default()).unwrap();
    let rmae = report.records.last().unwrap().rmae;

    let (n, steps, seed) = (10_000, 100, 88);
    let learned = reverse_sde_sample(ScoreSource::Network(&net), &hjb, n, steps, seed).unwrap();
    let exact = reverse_sde_sample(ScoreSource::Exact, &hjb, n, steps, seed).unwrap();
    let (mut dmean, mut dvar) = (0.0f64, 0.0f64);
    for j in 0..d {
        let (ml, vl) = mean_var(&learned.column(j).to_vec());
        let (me, ve) = mean_var(&exact.column(j).to_vec());
        dmean = dmean.max((ml - me).abs());
        dvar = dvar.max((vl - ve).abs() / ve);
    }
    let energy = projected_energy_distances(learned.view(), exact.view()).unwrap();
    let emax = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mins = minutes(start);
    outcome(
        rmae <= 0.05 && dmean <= 0.15 && dvar <= 0.15 && mins <= 40.0,
        format!(
            "rmae {rmae:.4} (<= 0.05); learned vs exact score samples: max mean gap {dmean:.3} (<= 0.15), max relative variance gap {:.1}% (<= 15%), max marginal energy distance {emax:.2e}; {mins:.1} min (<= 40)",
            100.0 * dvar
        ),
    )
}

// ---------------------------------------------------------------------------
// 9, 11. Fully nonlinear

fn g_brownian_run() -> (RunReport, f64) {
    let d = 10;
    let p = Problem::g_brownian(d, 2, 1.0, 9).unwrap();
    let cfg = DpiConfig {
        k: 20,
        m: 128,
        n: 1024,
        epochs: 16,
        lambda: 100.0,
        lr: 1e-3,
        batch_size: 512,
        seed: 9,
        widths: vec![64; 4],
        eval_points: 10_000,
    };
    let start = Instant::now();
    let (_, report) = dpi_solve(&cfg, &p, &SdeModel::brownian(d), &InitialLaw::Point(vec![0.0; d]), SolveOptions::default())
        .unwrap();
    (report, minutes(start))
}

fn criterion_9(report: &RunReport, mins: f64) -> Outcome {
    let rmae = report.records.last().unwrap().rmae;
    outcome(rmae <= 0.10 && mins <= 40.0, format!("rmae {rmae:.4} (<= 0.10); {mins:.1} min (<= 40)"))
}

/// Deterministic columns of the metrics file.
fn metric_rows(report: &RunReport) -> String {
    report
        .records
        .iter()
        .map(|r| format!("{},{},{},{}\n", r.k, r.loss, r.rmae, r.g_rmae))
        .collect()
}

fn criterion_11(first: &RunReport) -> Outcome {
    // Repeat on a two-worker pool to also vary the scheduling.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    let (again, _) = pool.install(g_brownian_run);
    let (a, b) = (metric_rows(first), metric_rows(&again));
    outcome(
        a == b,
        format!(
            "criterion 9 rerun with the same seed on 2 workers: metrics {} ({} bytes)",
            if a == b { "byte-identical" } else { "differ" },
            a.len()
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let want = |c: u32| only.as_ref().is_none_or(|s| s.contains(&c));
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |c: u32, name: &'static str, o: Outcome| {
        println!("criterion {c:>2} [{name}]: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((c, name, o));
    };

    if want(1) {
        report(1, "derivative engine", criterion_1());
    }
    if want(2) {
        report(2, "sampler laws", criterion_2());
    }
    if want(3) {
        report(3, "estimator unbiasedness", criterion_3());
    }
    if want(4) {
        report(4, "variance dichotomy", criterion_4());
    }
    if want(5) {
        report(5, "fixed-point consistency", criterion_5());
    }
    if want(6) || want(7) || want(10) {
        let base = burgers_run(1.0, 0);
        if want(6) {
            let s1 = burgers_run(1.0, 1);
            let s2 = burgers_run(1.0, 2);
            report(6, "burgers end-to-end", criterion_6(&[&base, &s1, &s2]));
        }
        if want(7) {
            let l0 = burgers_run(0.0, 0);
            let l100 = burgers_run(100.0, 0);
            report(7, "lambda robustness", criterion_7(&[(0.0, &l0), (1.0, &base), (100.0, &l100)]));
        }
        if want(10) {
            report(10, "gradient label cost", criterion_10(&base.net));
        }
    }
    if want(8) {
        report(8, "hjb and reverse sampling", criterion_8());
    }
    if want(9) || want(11) {
        let (first, mins) = g_brownian_run();
        if want(9) {
            report(9, "fully nonlinear", criterion_9(&first, mins));
        }
        if want(11) {
            report(11, "determinism", criterion_11(&first));
        }
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
