//! Error metrics, the variance study and reverse-time sampling.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DpiError, Result};
use crate::io::Table;
use crate::labels::{collect_indexed, second_moment_sweep, MomentRow};
use crate::net::Network;
use crate::problems::{HjbGmm, Problem, SolutionFn};
use crate::rng::{Purpose, Rng, SeedStream};
use crate::sde::SdeModel;

/// Fixed evaluation points, stored both as a list and as network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    points: Vec<(f64, Vec<f64>)>,
    inputs: Array2<f64>,
}

impl EvalSet {
    pub fn new(points: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let d = points
            .first()
            .map(|p| p.1.len())
            .ok_or_else(|| DpiError::Usage("empty evaluation set".into()))?;
        let mut inputs = Array2::zeros((points.len(), d + 1));
        for (i, (t, x)) in points.iter().enumerate() {
            check_dim(d, x.len())?;
            inputs[[i, 0]] = *t;
            for (j, v) in x.iter().enumerate() {
                inputs[[i, j + 1]] = *v;
            }
        }
        Ok(Self { points, inputs })
    }

    pub fn points(&self) -> &[(f64, Vec<f64>)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResult {
    pub rmae: f64,
    pub g_rmae: f64,
    pub n_points: usize,
    /// Coordinates left out of g-rMAE because `sum_i |d_j u*| < 1e-12`.
    pub excluded_dims: Vec<usize>,
}

/// rMAE and g-rMAE of predicted values and gradients against the exact
/// solution on `set`.
pub fn metrics_from_predictions(
    problem: &Problem,
    set: &EvalSet,
    values: &[f64],
    grads: ArrayView2<f64>,
) -> Result<MetricsResult> {
    let d = problem.dim();
    check_dim(d, set.dim())?;
    check_dim(set.len(), values.len())?;
    check_dim(set.len(), grads.nrows())?;
    check_dim(d, grads.ncols())?;
    let ex = problem
        .exact()
        .ok_or_else(|| DpiError::Metric(format!("{} has no exact solution", problem.name())))?;
    let (mut num, mut den) = (0.0, 0.0);
    let mut gnum = vec![0.0; d];
    let mut gden = vec![0.0; d];
    for (i, (t, x)) in set.points().iter().enumerate() {
        let u = ex.value(*t, x);
        num += (values[i] - u).abs();
        den += u.abs();
        for (j, g) in ex.gradient(*t, x).into_iter().enumerate() {
            gnum[j] += (grads[[i, j]] - g).abs();
            gden[j] += g.abs();
        }
    }
    if den == 0.0 {
        return Err(DpiError::Metric("rMAE denominator sum |u*| is zero".into()));
    }
    let mut excluded_dims = Vec::new();
    let mut acc = 0.0;
    for j in 0..d {
        if gden[j] < 1e-12 {
            log::warn!("g-rMAE: dimension {j} has vanishing exact gradient and is excluded");
            excluded_dims.push(j);
        } else {
            acc += gnum[j] / gden[j];
        }
    }
    if excluded_dims.len() == d {
        return Err(DpiError::Metric("g-rMAE denominator is zero in every dimension".into()));
    }
    Ok(MetricsResult {
        rmae: num / den,
        g_rmae: acc / (d - excluded_dims.len()) as f64,
        n_points: set.len(),
        excluded_dims,
    })
}

pub fn metrics(net: &Network, problem: &Problem, set: &EvalSet) -> Result<MetricsResult> {
    check_dim(problem.dim(), net.dim())?;
    let ev = net.derivatives_batch(set.inputs.view(), false)?;
    metrics_from_predictions(problem, set, ev.values.as_slice().expect("contiguous"), ev.grads.view())
}

/// Second moments of the gradient estimators at `t = T - eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub epsilons: Vec<f64>,
    pub rows: Vec<MomentRow>,
    /// Least-squares slope of `log naive` against `log(1/eps)`; `None` if a
    /// moment vanishes or there are fewer than two epsilons.
    pub naive_exponent: Option<f64>,
    /// `max / min` of the control-variate moments (1 when all vanish).
    pub cv_ratio: f64,
}

impl VarianceReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "epsilon",
            "t",
            "naive_second_moment",
            "naive_std_error",
            "cv_second_moment",
            "cv_std_error",
        ]);
        for (e, r) in self.epsilons.iter().zip(&self.rows) {
            t.push(vec![
                *e,
                r.t,
                r.naive_second_moment,
                r.naive_std_error,
                r.cv_second_moment,
                r.cv_std_error,
            ]);
        }
        t
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[allow(clippy::too_many_arguments)]
pub fn variance_report(
    model: &SdeModel,
    terminal: &dyn Fn(&[f64]) -> f64,
    source: &dyn Fn(f64, &[f64]) -> f64,
    x: &[f64],
    horizon: f64,
    epsilons: &[f64],
    m: usize,
    rng: &mut Rng,
) -> Result<VarianceReport> {
    if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0 && e < horizon)) {
        return Err(DpiError::Usage(format!("epsilon {e} outside (0, {horizon})")));
    }
    let grid: Vec<f64> = epsilons.iter().map(|e| horizon - e).collect();
    let rows = second_moment_sweep(model, terminal, source, x, horizon, &grid, m, rng)?;
    let naive_exponent = (epsilons.len() >= 2 && rows.iter().all(|r| r.naive_second_moment > 0.0)).then(|| {
        let lx: Vec<f64> = epsilons.iter().map(|e| (1.0 / e).ln()).collect();
        let ly: Vec<f64> = rows.iter().map(|r| r.naive_second_moment.ln()).collect();
        slope(&lx, &ly)
    });
    let cv_max = rows.iter().map(|r| r.cv_second_moment).fold(f64::NEG_INFINITY, f64::max);
    let cv_min = rows.iter().map(|r| r.cv_second_moment).fold(f64::INFINITY, f64::min);
    let cv_ratio = if cv_max == 0.0 { 1.0 } else { cv_max / cv_min };
    Ok(VarianceReport {
        epsilons: epsilons.to_vec(),
        rows,
        naive_exponent,
        cv_ratio,
    })
}

/// Where the reverse-time drift takes `grad u` from.
#[derive(Debug, Clone, Copy)]
pub enum ScoreSource<'a> {
    Network(&'a Network),
    Exact,
}

const SAMPLE_BLOCK: usize = 512;

/// Euler-Maruyama for `dX = (X - grad u(t, X)) dt + dW` on `[0, T]`,
/// started from the exact law at the horizon. Samples are simulated in
/// blocks of 512, each with its own stream.
pub fn reverse_sde_sample(
    score: ScoreSource<'_>,
    problem: &HjbGmm,
    n_samples: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if n_samples == 0 || n_steps == 0 {
        return Err(DpiError::Usage("need n_samples >= 1 and n_steps >= 1".into()));
    }
    let d = problem.d;
    if let ScoreSource::Network(net) = score {
        check_dim(d, net.dim())?;
    }
    let seeds = SeedStream::new(seed);
    let n_blocks = n_samples.div_ceil(SAMPLE_BLOCK);
    let h = problem.horizon / n_steps as f64;
    let start = problem.spec.propagate(problem.horizon);
    let blocks = collect_indexed(n_blocks, |b| {
        let rows = SAMPLE_BLOCK.min(n_samples - b * SAMPLE_BLOCK);
        let mut rng = seeds.rng(Purpose::Sample, 0, b as u64);
        let mut inputs = Array2::<f64>::zeros((rows, d + 1));
        for i in 0..rows {
            for (j, v) in start.sample(&mut rng).into_iter().enumerate() {
                inputs[[i, j + 1]] = v;
            }
        }
        for step in 0..n_steps {
            let t = step as f64 * h;
            inputs.column_mut(0).fill(t);
            let grads = match score {
                ScoreSource::Network(net) => net.derivatives_batch(inputs.view(), false)?.grads,
                ScoreSource::Exact => {
                    let g = problem.density_for(t);
                    let mut out = Array2::zeros((rows, d));
                    for i in 0..rows {
                        let x: Vec<f64> = inputs.row(i).iter().skip(1).copied().collect();
                        for (j, s) in g.score(&x).into_iter().enumerate() {
                            out[[i, j]] = -s;
                        }
                    }
                    out
                }
            };
            let sd = h.sqrt();
            for i in 0..rows {
                for j in 0..d {
                    let x = inputs[[i, j + 1]];
                    let noise: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                    inputs[[i, j + 1]] = x + (x - grads[[i, j]]) * h + sd * noise;
                }
            }
            if inputs.iter().any(|v| !v.is_finite()) {
                return Err(DpiError::Numeric(format!("reverse trajectory diverged at step {}", step + 1)));
            }
        }
        Ok(inputs.slice(ndarray::s![.., 1..]).to_owned())
    })?;
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| DpiError::Numeric(e.to_string()))
}

/// `sum_i sum_j |a_i - b_j|` for sorted `b` with prefix sums `pre`.
fn cross_abs_sum(a: &[f64], b: &[f64], pre: &[f64]) -> f64 {
    let total = pre[b.len()];
    a.iter()
        .map(|&x| {
            let k = b.partition_point(|&v| v < x);
            (x * k as f64 - pre[k]) + (total - pre[k] - x * (b.len() - k) as f64)
        })
        .sum()
}

/// `sum_{i != j} |a_i - a_j|` for sorted `a`.
fn within_abs_sum(a: &[f64]) -> f64 {
    let n = a.len() as f64;
    2.0 * a
        .iter()
        .enumerate()
        .map(|(i, v)| v * (2.0 * i as f64 - n + 1.0))
        .sum::<f64>()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Energy distance `2 E|X - Y| - E|X - X'| - E|Y - Y'|` between two 1-d
/// samples, with unbiased within-sample terms.
pub fn energy_distance_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(DpiError::Usage("energy distance needs at least two points per sample".into()));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    let mut pre = Vec::with_capacity(sb.len() + 1);
    pre.push(0.0);
    for v in &sb {
        pre.push(pre.last().unwrap() + v);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let xy = cross_abs_sum(&sa, &sb, &pre) / (na * nb);
    let xx = within_abs_sum(&sa) / (na * (na - 1.0));
    let yy = within_abs_sum(&sb) / (nb * (nb - 1.0));
    Ok(2.0 * xy - xx - yy)
}

/// Energy distance of each coordinate marginal.
pub fn projected_energy_distances(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_dim(a.ncols(), b.ncols())?;
    a.columns()
        .into_iter()
        .zip(b.columns())
        .map(|(ca, cb)| energy_distance_1d(&ca.to_vec(), &cb.to_vec()))
        .collect()
}
