//! Monte Carlo regression labels.
//!
//! For a point `(t, x)` and a frozen iterate `u_k`, each of `M` paths draws
//! one interior time `s ~ U(t, T]` and simulates `t -> s -> T` exactly. With
//! `f_k(s, y) = f(s, y, u_k, grad u_k, diag hess u_k)`:
//!
//! ```text
//! y = mean[ g(X_T) + (T - t) f_k(s, X_s) ]
//! z = mean[ (g(X_T) - g(x)) / (T - t) I_{t,T}
//!           + (T - t) (f_k(s, X_s) - f_k(t, x)) / (s - t) I_{t,s} ]
//! ```
//!
//! The naive gradient estimator drops the `g(x)` and `f_k(t, x)` anchors.
//! Value and gradient labels share the same paths and driver evaluations.

use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DpiError, Result};
use crate::io::write_atomic;
use crate::net::{BatchDerivatives, Network};
use crate::problems::{Problem, SolutionFn};
use crate::rng::{Purpose, Rng, SeedStream};
use crate::sde::{InitialLaw, SdeModel};

/// One regression sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
    /// Absent for value-only labels.
    pub z: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    ControlVariate,
    Naive,
    ValueOnly,
}

/// The iterate `u_k` that labels are computed against.
#[derive(Debug, Clone)]
pub enum FrozenSolution {
    /// `u_0 = 0`.
    Zero { d: usize },
    Network(Arc<Network>),
    /// Closed-form solution of the problem.
    Exact(Arc<Problem>),
}

impl FrozenSolution {
    pub fn dim(&self) -> usize {
        match self {
            FrozenSolution::Zero { d } => *d,
            FrozenSolution::Network(n) => n.dim(),
            FrozenSolution::Exact(p) => p.dim(),
        }
    }

    /// Value, gradient and optionally Hessian diagonal at each row of
    /// `inputs` (`[batch, d + 1]`, time in column 0).
    pub fn evaluate_batch(&self, inputs: ArrayView2<f64>, want_hessian: bool) -> Result<BatchDerivatives> {
        let d = self.dim();
        check_dim(d + 1, inputs.ncols())?;
        let n = inputs.nrows();
        match self {
            FrozenSolution::Zero { .. } => Ok(BatchDerivatives {
                values: Array1::zeros(n),
                grads: Array2::zeros((n, d)),
                hess_diag: want_hessian.then(|| Array2::zeros((n, d))),
            }),
            FrozenSolution::Network(net) => net.derivatives_batch(inputs, want_hessian),
            FrozenSolution::Exact(p) => {
                let ex = p.exact().ok_or_else(|| DpiError::Usage(format!("{} has no exact solution", p.name())))?;
                let mut values = Array1::zeros(n);
                let mut grads = Array2::zeros((n, d));
                let mut hess = want_hessian.then(|| Array2::zeros((n, d)));
                for (i, row) in inputs.rows().into_iter().enumerate() {
                    let t = row[0];
                    let x = row.slice(s![1..]).to_vec();
                    values[i] = ex.value(t, &x);
                    grads.row_mut(i).assign(&Array1::from(ex.gradient(t, &x)));
                    if let Some(h) = hess.as_mut() {
                        let hd = ex
                            .hessian_diag(t, &x)
                            .ok_or_else(|| DpiError::Usage("exact solution lacks a Hessian".into()))?;
                        h.row_mut(i).assign(&Array1::from(hd));
                    }
                }
                Ok(BatchDerivatives {
                    values,
                    grads,
                    hess_diag: hess,
                })
            }
        }
    }
}

fn single_row(t: f64, x: &[f64]) -> Array2<f64> {
    let mut row = Array2::zeros((1, x.len() + 1));
    row[[0, 0]] = t;
    row.slice_mut(s![0, 1..]).assign(&ndarray::ArrayView1::from(x));
    row
}

impl SolutionFn for FrozenSolution {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.evaluate_batch(single_row(t, x).view(), false)
            .map(|b| b.values[0])
            .unwrap_or(f64::NAN)
    }

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.evaluate_batch(single_row(t, x).view(), false)
            .map(|b| b.grads.row(0).to_vec())
            .unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }

    fn hessian_diag(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        self.evaluate_batch(single_row(t, x).view(), true)
            .ok()
            .and_then(|b| b.hess_diag.map(|h| h.row(0).to_vec()))
    }
}

/// `f_{u_k}` at each row of `inputs`.
pub fn driver_batch(problem: &Problem, uk: &FrozenSolution, inputs: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_dim(problem.dim(), uk.dim())?;
    if matches!(problem, Problem::HeatOracle(_)) {
        check_dim(problem.dim() + 1, inputs.ncols())?;
        return Ok(vec![0.0; inputs.nrows()]);
    }
    let ev = uk.evaluate_batch(inputs, problem.needs_hessian())?;
    let mut out = Vec::with_capacity(inputs.nrows());
    let mut x = vec![0.0; problem.dim()];
    for (i, row) in inputs.rows().into_iter().enumerate() {
        for (dst, src) in x.iter_mut().zip(row.iter().skip(1)) {
            *dst = *src;
        }
        let z = ev.grads.row(i);
        let h = ev.hess_diag.as_ref().map(|h| h.row(i));
        out.push(problem.driver(
            row[0],
            &x,
            ev.values[i],
            z.as_slice().expect("row-major gradients"),
            h.as_ref().map(|h| h.as_slice().expect("row-major Hessian")),
        )?);
    }
    Ok(out)
}

/// `f_{u_k}(t, x)`.
pub fn driver_at(problem: &Problem, uk: &FrozenSolution, t: f64, x: &[f64]) -> Result<f64> {
    check_dim(problem.dim(), x.len())?;
    Ok(driver_batch(problem, uk, single_row(t, x).view())?[0])
}

/// Labels at one point together with their Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEstimate {
    pub y: f64,
    pub z: Option<Vec<f64>>,
    pub y_std_err: f64,
    pub z_std_err: Option<Vec<f64>>,
}

/// `M` two-segment paths from `(t, x)`: rows of `inputs` hold `(s, X_s)`.
struct PathBatch {
    inputs: Array2<f64>,
    i_s: Array2<f64>,
    i_t: Array2<f64>,
    g_t: Vec<f64>,
}

fn simulate_paths(
    model: &SdeModel,
    terminal: &dyn Fn(&[f64]) -> f64,
    t: f64,
    x: &[f64],
    horizon: f64,
    m: usize,
    rng: &mut Rng,
) -> Result<PathBatch> {
    model.check_start(x)?;
    let d = x.len();
    let span = horizon - t;
    let floor = 1e-12 * horizon;
    let mut inputs = Array2::zeros((m, d + 1));
    let mut i_s = Array2::zeros((m, d));
    let mut i_t = Array2::zeros((m, d));
    let mut g_t = Vec::with_capacity(m);
    let mut xs = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for j in 0..m {
        let s = loop {
            // 1 - U[0, 1) lies in (0, 1], so s lies in (t, T].
            let s = t + span * (1.0 - rng.random::<f64>());
            if s - t >= floor {
                break s;
            }
        };
        xs.copy_from_slice(x);
        acc.iter_mut().for_each(|v| *v = 0.0);
        model.extend_path(t, x, t, s, &mut xs, &mut acc, rng);
        inputs[[j, 0]] = s;
        for i in 0..d {
            inputs[[j, i + 1]] = xs[i];
            i_s[[j, i]] = acc[i];
        }
        model.extend_path(t, x, s, horizon, &mut xs, &mut acc, rng);
        for i in 0..d {
            i_t[[j, i]] = acc[i];
        }
        g_t.push(terminal(&xs));
    }
    Ok(PathBatch {
        inputs,
        i_s,
        i_t,
        g_t,
    })
}

fn mean_and_std_err(samples: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = samples.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Monte Carlo labels at `(t, x)` for the Picard map applied to `uk`.
///
/// `model` is the forward process the problem's driver was split against,
/// normally `problem.forward_model()`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_labels(
    problem: &Problem,
    model: &SdeModel,
    uk: &FrozenSolution,
    t: f64,
    x: &[f64],
    m: usize,
    rng: &mut Rng,
    mode: LabelMode,
) -> Result<LabelEstimate> {
    let d = problem.dim();
    check_dim(d, x.len())?;
    check_dim(d, model.dim())?;
    if m == 0 {
        return Err(DpiError::Usage("need at least one path per point".into()));
    }
    let horizon = problem.horizon();
    if !(t >= 0.0 && t <= horizon) {
        return Err(DpiError::Usage(format!("label time {t} outside [0, {horizon}]")));
    }
    if t == horizon {
        let z = match mode {
            LabelMode::ValueOnly => None,
            _ => Some(problem.terminal_grad(x).ok_or_else(|| {
                DpiError::Domain("point at t = T without a terminal gradient".into())
            })?),
        };
        return Ok(LabelEstimate {
            y: problem.terminal(x),
            z_std_err: z.as_ref().map(|_| vec![0.0; d]),
            z,
            y_std_err: 0.0,
        });
    }
    let paths = simulate_paths(model, &|v| problem.terminal(v), t, x, horizon, m, rng)?;
    let f_s = driver_batch(problem, uk, paths.inputs.view())?;
    let span = horizon - t;

    let ys: Vec<f64> = paths.g_t.iter().zip(&f_s).map(|(g, f)| g + span * f).collect();
    if let Some(j) = ys.iter().position(|v| !v.is_finite()) {
        return Err(DpiError::Numeric(format!(
            "non-finite value label on path {j} (s = {}, g = {}, f = {})",
            paths.inputs[[j, 0]],
            paths.g_t[j],
            f_s[j]
        )));
    }
    let (y, y_std_err) = mean_and_std_err(ys.iter().copied(), m);

    let (g_anchor, f_anchor) = match mode {
        LabelMode::ValueOnly => {
            return Ok(LabelEstimate {
                y,
                z: None,
                y_std_err,
                z_std_err: None,
            })
        }
        LabelMode::ControlVariate => (problem.terminal(x), driver_at(problem, uk, t, x)?),
        LabelMode::Naive => (0.0, 0.0),
    };
    let mut zs = Array2::zeros((m, d));
    for j in 0..m {
        let s = paths.inputs[[j, 0]];
        let a = (paths.g_t[j] - g_anchor) / span;
        let b = span * (f_s[j] - f_anchor) / (s - t);
        for i in 0..d {
            zs[[j, i]] = a * paths.i_t[[j, i]] + b * paths.i_s[[j, i]];
        }
    }
    if zs.iter().any(|v| !v.is_finite()) {
        return Err(DpiError::Numeric("non-finite gradient label".into()));
    }
    let mut z = Vec::with_capacity(d);
    let mut z_std_err = Vec::with_capacity(d);
    for col in zs.columns() {
        let (mu, se) = mean_and_std_err(col.iter().copied(), m);
        z.push(mu);
        z_std_err.push(se);
    }
    Ok(LabelEstimate {
        y,
        z: Some(z),
        y_std_err,
        z_std_err: Some(z_std_err),
    })
}

/// Draws `n` training points from the data process and labels each with `m`
/// paths of the problem's forward process. Point `i` uses its own stream
/// `(Purpose::Data, iteration, i)`, so the result is independent of the
/// number of workers.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset(
    problem: &Problem,
    data_model: &SdeModel,
    law: &InitialLaw,
    uk: &FrozenSolution,
    n: usize,
    m: usize,
    seeds: &SeedStream,
    iteration: u64,
    mode: LabelMode,
) -> Result<Vec<LabeledPoint>> {
    if n == 0 || m == 0 {
        return Err(DpiError::Usage("dataset needs N >= 1 and M >= 1".into()));
    }
    check_dim(problem.dim(), data_model.dim())?;
    check_dim(problem.dim(), law.dim())?;
    let label_model = problem.forward_model();
    let one = |i: usize| -> Result<LabeledPoint> {
        let mut rng = seeds.rng(Purpose::Data, iteration, i as u64);
        let mut attempts = 0;
        loop {
            let (t, x) = data_model.sample_data_point(law, problem.horizon(), &mut rng)?;
            match estimate_labels(problem, &label_model, uk, t, &x, m, &mut rng, mode) {
                Ok(est) => {
                    return Ok(LabeledPoint {
                        t,
                        x,
                        y: est.y,
                        z: est.z,
                    })
                }
                Err(DpiError::Domain(_)) if attempts < 100 => attempts += 1,
                Err(e) => return Err(e),
            }
        }
    };
    collect_indexed(n, |i| one(i).map_err(|e| e.at_point(i)))
}

#[cfg(feature = "parallel")]
pub(crate) fn collect_indexed<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn collect_indexed<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

/// One row of a second-moment sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub naive_second_moment: f64,
    pub naive_std_error: f64,
    pub cv_second_moment: f64,
    pub cv_std_error: f64,
}

/// Empirical `E|Z|^2` of the single-path gradient estimator, with and
/// without the `g(x)` and `f(t, x)` anchors, at each `t` in `t_grid`.
#[allow(clippy::too_many_arguments)]
pub fn second_moment_sweep(
    model: &SdeModel,
    terminal: &dyn Fn(&[f64]) -> f64,
    source: &dyn Fn(f64, &[f64]) -> f64,
    x: &[f64],
    horizon: f64,
    t_grid: &[f64],
    m: usize,
    rng: &mut Rng,
) -> Result<Vec<MomentRow>> {
    check_dim(model.dim(), x.len())?;
    if m == 0 {
        return Err(DpiError::Usage("need at least one path".into()));
    }
    let d = x.len();
    let g0 = terminal(x);
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t >= 0.0 && t < horizon) {
            return Err(DpiError::Usage(format!("sweep time {t} outside [0, {horizon})")));
        }
        let f0 = source(t, x);
        let span = horizon - t;
        let paths = simulate_paths(model, terminal, t, x, horizon, m, rng)?;
        let mut naive = Vec::with_capacity(m);
        let mut cv = Vec::with_capacity(m);
        for j in 0..m {
            let s = paths.inputs[[j, 0]];
            let xs = paths.inputs.slice(s![j, 1..]).to_vec();
            let fs = source(s, &xs);
            let (mut n2, mut c2) = (0.0, 0.0);
            for i in 0..d {
                let (it, is) = (paths.i_t[[j, i]], paths.i_s[[j, i]]);
                let zn = paths.g_t[j] / span * it + span * fs / (s - t) * is;
                let zc = (paths.g_t[j] - g0) / span * it + span * (fs - f0) / (s - t) * is;
                n2 += zn * zn;
                c2 += zc * zc;
            }
            naive.push(n2);
            cv.push(c2);
        }
        let (nm, ns) = mean_and_std_err(naive.iter().copied(), m);
        let (cm, cs) = mean_and_std_err(cv.iter().copied(), m);
        rows.push(MomentRow {
            t,
            naive_second_moment: nm,
            naive_std_error: ns,
            cv_second_moment: cm,
            cv_std_error: cs,
        });
    }
    Ok(rows)
}

/// Header `t, x_1..x_d, y[, z_1..z_d]`.
fn dataset_header(d: usize, with_z: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=d).map(|i| format!("x_{i}")));
    h.push("y".into());
    if with_z {
        h.extend((1..=d).map(|i| format!("z_{i}")));
    }
    h
}

/// Writes a dataset as comma-separated text. Gradient columns are present
/// only when every point carries a gradient label.
pub fn save_dataset(path: &Path, points: &[LabeledPoint]) -> Result<()> {
    let d = points.first().map_or(0, |p| p.x.len());
    let with_z = !points.is_empty() && points.iter().all(|p| p.z.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(dataset_header(d, with_z))?;
    for p in points {
        check_dim(d, p.x.len())?;
        let mut rec = vec![p.t.to_string()];
        rec.extend(p.x.iter().map(|v| v.to_string()));
        rec.push(p.y.to_string());
        if with_z {
            let z = p.z.as_ref().expect("checked above");
            check_dim(d, z.len())?;
            rec.extend(z.iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| DpiError::Format(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn load_dataset(path: &Path) -> Result<Vec<LabeledPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let d = header.iter().filter(|h| h.starts_with("x_")).count();
    let with_z = header.iter().any(|h| h.starts_with("z_"));
    if header != dataset_header(d, with_z) {
        return Err(DpiError::Format(format!("unexpected dataset header {header:?}")));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| DpiError::Format(format!("dataset row {row}: {e}")))?;
        out.push(LabeledPoint {
            t: vals[0],
            x: vals[1..=d].to_vec(),
            y: vals[d + 1],
            z: with_z.then(|| vals[d + 2..].to_vec()),
        });
    }
    Ok(out)
}
