//! Subcommand bodies. Each writes its artifacts atomically into the output
//! directory, with the resolved configuration echoed inside.

use std::fs;
use std::path::{Path, PathBuf};

use dpi::eval::{metrics, projected_energy_distances, reverse_sde_sample, variance_report, ScoreSource};
use dpi::io::{write_atomic, Table};
use dpi::labels::{estimate_labels, FrozenSolution, LabelMode};
use dpi::net::{load_checkpoint, save_checkpoint};
use dpi::picard::sample_eval_set;
use dpi::problems::HjbGmm;
use dpi::{dpi_solve, Problem, Purpose, SeedStream, SolutionFn, SolveOptions};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig, ScoreName, SweepTerminal};

/// Why a command stopped. The exit code tells the categories apart.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Run(String),
    /// The command ran but its check did not pass.
    Check(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Run(_) => 1,
            Failure::Config(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Run(m) => write!(f, "{m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn run_err(phase: &str) -> impl Fn(dpi::DpiError) -> Failure + '_ {
    move |e| Failure::Run(format!("{phase}: {e}"))
}

/// Creates the output directory before any computation, so a bad path
/// fails fast and leaves nothing behind.
fn prepare_output(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("output directory {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, text.as_bytes()).map_err(|e| Failure::Run(format!("writing {}: {e}", path.display())))
}

fn write_table(path: &Path, table: &Table, cfg: &RunConfig, notes: &[String]) -> Result<(), Failure> {
    let mut comments = vec![cfg.echo()];
    comments.extend_from_slice(notes);
    let text = table.to_csv(&comments).map_err(run_err("formatting table"))?;
    write_text(path, &text)
}

fn write_json<T: Serialize>(path: &Path, cfg: &RunConfig, body: &T) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        config: &'a RunConfig,
        #[serde(flatten)]
        body: &'a T,
    }
    let text = serde_json::to_string_pretty(&Doc { config: cfg, body })
        .map_err(|e| Failure::Run(format!("formatting {}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

/// Files written by `solve`.
pub struct SolveOutputs {
    pub metrics: PathBuf,
    pub timings: PathBuf,
    pub report: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn solve(cfg: &RunConfig) -> Result<SolveOutputs, Failure> {
    let problem = cfg.build_problem()?;
    let model = cfg.data_model()?;
    let dir = &cfg.output_dir;
    prepare_output(dir)?;
    let (net, mut report) =
        dpi_solve(&cfg.dpi, &problem, &model, &cfg.law(), SolveOptions::default()).map_err(run_err("solve"))?;

    let out = SolveOutputs {
        metrics: dir.join("metrics.csv"),
        timings: dir.join("timings.csv"),
        report: dir.join("report.json"),
        checkpoint: dir.join("checkpoint.json"),
    };
    save_checkpoint(&net, &out.checkpoint).map_err(run_err("writing checkpoint"))?;
    report.checkpoint = Some(out.checkpoint.display().to_string());

    // Wall-clock columns live apart so the metrics file is reproducible
    // byte for byte.
    let mut m = Table::new(["k", "loss", "rmae", "g_rmae"]);
    let mut t = Table::new(["k", "label_gen_seconds", "train_seconds"]);
    for r in &report.records {
        m.push(vec![r.k as f64, r.loss, r.rmae, r.g_rmae]);
        t.push(vec![r.k as f64, r.label_gen_seconds, r.train_seconds]);
    }
    write_table(&out.metrics, &m, cfg, &[])?;
    write_table(&out.timings, &t, cfg, &[])?;

    #[derive(Serialize)]
    struct Body<'a> {
        report: &'a dpi::RunReport,
    }
    write_json(&out.report, cfg, &Body { report: &report })?;
    if let Some(last) = report.records.last() {
        println!(
            "{}: {} iterations, final rmae {:.4e}, g_rmae {:.4e}; artifacts in {}",
            problem.name(),
            report.records.len(),
            last.rmae,
            last.g_rmae,
            dir.display()
        );
    }
    Ok(out)
}

pub fn variance(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let problem = cfg.build_problem()?;
    let model = cfg.data_model()?;
    prepare_output(&cfg.output_dir)?;
    let v = &cfg.variance;
    let d = cfg.problem.d;
    let norm = (d as f64).sqrt();
    let terminal: Terminal = match v.terminal {
        SweepTerminal::Problem => Box::new(|x: &[f64]| problem.terminal(x)),
        SweepTerminal::Constant => Box::new(|_: &[f64]| 1.0),
        SweepTerminal::Linear => Box::new(move |x: &[f64]| x.iter().sum::<f64>() / norm),
    };
    let mut rng = SeedStream::new(cfg.dpi.seed).rng(Purpose::Variance, 0, 0);
    let report = variance_report(
        &model,
        &*terminal,
        &|_, _| 0.0,
        &v.x,
        cfg.problem.horizon,
        &v.epsilons,
        v.m,
        &mut rng,
    )
    .map_err(run_err("variance"))?;
    let exponent = match report.naive_exponent {
        Some(e) => format!("{e}"),
        None => "undefined".into(),
    };
    let notes = vec![format!("naive_exponent = {exponent}"), format!("cv_ratio = {}", report.cv_ratio)];
    let path = cfg.output_dir.join("variance.csv");
    write_table(&path, &report.to_table(), cfg, &notes)?;
    println!("naive growth exponent {exponent}, cv max/min {:.4}; table in {}", report.cv_ratio, path.display());
    Ok(path)
}

type Terminal<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

/// Standardized deviation beyond which `fk-check` flags a result.
const BAND: f64 = 4.0;

pub fn fk_check(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let d = cfg.problem.d;
    let heat = Problem::heat_oracle(d, cfg.problem.horizon).map_err(run_err("fk-check"))?;
    let exact = heat.exact().expect("heat oracle has a closed form");
    let model = cfg.data_model()?;
    let law = cfg.law();
    prepare_output(&cfg.output_dir)?;
    let zero = FrozenSolution::Zero { d };
    let seeds = SeedStream::new(cfg.dpi.seed);

    let mut table = Table::new(["t", "y_est", "y_exact", "y_std_err", "y_dev", "z_max_dev"]);
    let (mut sum_y, mut var_y) = (0.0, 0.0);
    let (mut sum_z, mut var_z) = (vec![0.0; d], vec![0.0; d]);
    let mut flagged = 0usize;
    for i in 0..cfg.fk_check.points {
        let mut rng = seeds.rng(Purpose::Check, 0, i as u64);
        let (t, x) = model
            .sample_data_point(&law, cfg.problem.horizon, &mut rng)
            .map_err(run_err("fk-check"))?;
        let est = estimate_labels(&heat, &heat.forward_model(), &zero, t, &x, cfg.fk_check.m, &mut rng, LabelMode::ControlVariate)
            .map_err(|e| Failure::Run(format!("fk-check: point {i}: {e}")))?;
        let y = exact.value(t, &x);
        let g = exact.gradient(t, &x);
        let dev = |a: f64, b: f64, se: f64| if se > 0.0 { (a - b) / se } else if a == b { 0.0 } else { f64::INFINITY };
        let y_dev = dev(est.y, y, est.y_std_err);
        let z = est.z.as_ref().expect("control-variate labels carry z");
        let zse = est.z_std_err.as_ref().expect("control-variate labels carry z");
        let mut z_max = 0.0f64;
        for j in 0..d {
            z_max = z_max.max(dev(z[j], g[j], zse[j]).abs());
            sum_z[j] += z[j] - g[j];
            var_z[j] += zse[j] * zse[j];
        }
        sum_y += est.y - y;
        var_y += est.y_std_err * est.y_std_err;
        if y_dev.abs() > BAND || z_max > BAND {
            flagged += 1;
        }
        table.push(vec![t, est.y, y, est.y_std_err, y_dev, z_max]);
    }
    let pooled_y = sum_y.abs() / var_y.sqrt();
    let pooled_z = (0..d).map(|j| sum_z[j].abs() / var_z[j].sqrt()).fold(0.0, f64::max);
    let pass = pooled_y <= BAND && pooled_z <= BAND;
    let summary = format!(
        "pooled y deviation {pooled_y:.3} se, worst pooled z component {pooled_z:.3} se (band {BAND}); {flagged} of {} points outside the band individually",
        cfg.fk_check.points
    );
    let path = cfg.output_dir.join("fk_check.csv");
    write_table(&path, &table, cfg, &[summary.clone(), format!("pass = {pass}")])?;
    println!("{}: {summary}", if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(path)
    } else {
        Err(Failure::Check(summary))
    }
}

fn hjb(problem: &Problem) -> Result<&HjbGmm, Failure> {
    match problem {
        Problem::HjbGmm(h) => Ok(h),
        other => Err(Failure::Config(ConfigError(format!(
            "problem.kind: sampling needs hjb_gmm, got {}",
            other.name()
        )))),
    }
}

pub fn sample(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let problem = cfg.build_problem()?;
    let h = hjb(&problem)?;
    let s = &cfg.sample;
    let net = match (s.score_source, &s.checkpoint) {
        (ScoreName::Checkpoint, Some(p)) => Some(load_checkpoint(p).map_err(run_err("loading checkpoint"))?),
        _ => None,
    };
    prepare_output(&cfg.output_dir)?;
    let source = match &net {
        Some(n) => ScoreSource::Network(n),
        None => ScoreSource::Exact,
    };
    let samples = reverse_sde_sample(source, h, s.n_samples, s.steps, s.seed).map_err(run_err("sample"))?;
    let mut notes = Vec::new();
    if net.is_some() {
        let exact = reverse_sde_sample(ScoreSource::Exact, h, s.n_samples, s.steps, s.seed).map_err(run_err("sample"))?;
        let ed = projected_energy_distances(samples.view(), exact.view()).map_err(run_err("energy distance"))?;
        let list: Vec<String> = ed.iter().map(|v| format!("{v:.4e}")).collect();
        notes.push(format!("energy_distance_vs_exact_score = [{}]", list.join(", ")));
        println!("marginal energy distances against exact-score samples: {}", list.join(" "));
    }
    let mut table = Table::new((1..=h.d).map(|i| format!("x{i}")));
    for row in samples.rows() {
        table.push(row.to_vec());
    }
    let path = cfg.output_dir.join("samples.csv");
    write_table(&path, &table, cfg, &notes)?;
    println!("{} samples of dimension {} in {}", s.n_samples, h.d, path.display());
    Ok(path)
}

pub fn eval_checkpoint(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let problem = cfg.build_problem()?;
    let model = cfg.data_model()?;
    let Some(ckpt) = &cfg.eval.checkpoint else {
        return Err(ConfigError("eval.checkpoint is required".into()).into());
    };
    let net = load_checkpoint(ckpt).map_err(run_err("loading checkpoint"))?;
    prepare_output(&cfg.output_dir)?;
    // Same stream as `solve`, so equal sizes give the same evaluation set.
    let set = sample_eval_set(&model, &cfg.law(), cfg.problem.horizon, cfg.eval.points, &SeedStream::new(cfg.dpi.seed))
        .map_err(run_err("eval"))?;
    let m = metrics(&net, &problem, &set).map_err(run_err("eval"))?;

    #[derive(Serialize)]
    struct Body<'a> {
        checkpoint: String,
        metrics: &'a dpi::eval::MetricsResult,
    }
    let path = cfg.output_dir.join("eval.json");
    write_json(
        &path,
        cfg,
        &Body {
            checkpoint: ckpt.display().to_string(),
            metrics: &m,
        },
    )?;
    println!("rmae {:.4e}, g_rmae {:.4e} over {} points", m.rmae, m.g_rmae, m.n_points);
    Ok(path)
}
