//! Browser bindings for three small demonstrations:
//!
//! * reverse-time sampling of a Gaussian mixture with the exact score,
//! * second moments of the naive and control-variate gradient estimators as
//!   the horizon gap shrinks,
//! * Feynman-Kac labels for Burgers against its closed form.
//!
//! The pure functions return plain vectors and are tested natively; the
//! `#[wasm_bindgen]` wrappers only flatten them for JavaScript.

use std::sync::Arc;

use dpi::eval::{energy_distance_1d, reverse_sde_sample, variance_report, ScoreSource};
use dpi::labels::{estimate_labels, FrozenSolution, LabelMode};
use dpi::problems::{GmmSpec, HjbGmm};
use dpi::{DpiError, Problem, Purpose, SdeKind, SdeModel, SeedStream, SolutionFn};
use wasm_bindgen::prelude::*;

pub type Result<T> = std::result::Result<T, DpiError>;

/// Reverse-SDE samples next to direct draws from the same mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSamples {
    pub d: usize,
    /// Row-major `[n, d]`.
    pub reverse: Vec<f64>,
    pub direct: Vec<f64>,
    /// Energy distance between the two, per coordinate.
    pub energy: Vec<f64>,
}

pub fn sample_mixture(d: usize, components: usize, seed: u64, n: usize, steps: usize) -> Result<MixtureSamples> {
    let spec = GmmSpec::random(d, components, 2.0, 0.3, seed);
    spec.validate(d)?;
    let problem = HjbGmm { d, horizon: 1.0, spec };
    let reverse = reverse_sde_sample(ScoreSource::Exact, &problem, n, steps, seed)?;
    let target = problem.spec.propagate(0.0);
    let mut rng = SeedStream::new(seed).rng(Purpose::Sample, 1, 0);
    let direct: Vec<f64> = (0..n).flat_map(|_| target.sample(&mut rng)).collect();
    let energy = (0..d)
        .map(|j| {
            let a: Vec<f64> = reverse.column(j).to_vec();
            let b: Vec<f64> = direct.iter().skip(j).step_by(d).copied().collect();
            energy_distance_1d(&a, &b)
        })
        .collect::<Result<_>>()?;
    Ok(MixtureSamples {
        d,
        reverse: reverse.iter().copied().collect(),
        direct,
        energy,
    })
}

type Terminal = Box<dyn Fn(&[f64]) -> f64>;

/// One row per horizon gap `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub epsilons: Vec<f64>,
    pub naive: Vec<f64>,
    pub cv: Vec<f64>,
    pub naive_exponent: Option<f64>,
}

/// `model` is `"bm"`, `"ou"` or `"gbm"`; `terminal` is `"constant"` or
/// `"linear"`. Gaps are log-spaced from 1e-1 down to 1e-4.
pub fn moment_sweep(model: &str, terminal: &str, d: usize, m: usize, n_eps: usize, seed: u64) -> Result<Sweep> {
    let kind = match model {
        "bm" => SdeKind::BrownianMotion { scale: 1.0 },
        "ou" => SdeKind::OrnsteinUhlenbeck { theta: 1.0 },
        "gbm" => SdeKind::GeometricBrownian,
        other => return Err(DpiError::Usage(format!("unknown model `{other}`"))),
    };
    let g: Terminal = match terminal {
        "constant" => Box::new(|_: &[f64]| 1.0),
        "linear" => Box::new(|x: &[f64]| x.iter().sum::<f64>() / (x.len() as f64).sqrt()),
        other => return Err(DpiError::Usage(format!("unknown terminal `{other}`"))),
    };
    if n_eps < 2 {
        return Err(DpiError::Usage("need at least two gaps".into()));
    }
    let sde = SdeModel::new(kind, d)?;
    // Geometric Brownian motion lives on the positive orthant.
    let x = vec![if model == "gbm" { 1.0 } else { 0.0 }; d];
    let epsilons: Vec<f64> = (0..n_eps)
        .map(|i| 10f64.powf(-1.0 - 3.0 * i as f64 / (n_eps - 1) as f64))
        .collect();
    let mut rng = SeedStream::new(seed).rng(Purpose::Variance, 0, 0);
    let r = variance_report(&sde, &*g, &|_, _| 0.0, &x, 1.0, &epsilons, m, &mut rng)?;
    Ok(Sweep {
        naive: r.rows.iter().map(|r| r.naive_second_moment).collect(),
        cv: r.rows.iter().map(|r| r.cv_second_moment).collect(),
        naive_exponent: r.naive_exponent,
        epsilons,
    })
}

/// Labels along the diagonal `x = s (1, ..., 1) / sqrt(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub s: Vec<f64>,
    pub exact: Vec<f64>,
    pub estimate: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Monte Carlo labels for Burgers with the exact solution frozen in the
/// driver, so the estimates should scatter around the closed form.
pub fn burgers_labels(d: usize, t: f64, m: usize, points: usize, seed: u64) -> Result<Profile> {
    if points < 2 {
        return Err(DpiError::Usage("need at least two points".into()));
    }
    let problem = Arc::new(Problem::burgers(d, 1.0, 1.0, 1.0)?);
    if !(0.0..1.0).contains(&t) {
        return Err(DpiError::Usage(format!("t must lie in [0, 1), got {t}")));
    }
    let exact = problem.exact().expect("burgers has a closed form");
    let frozen = FrozenSolution::Exact(problem.clone());
    let forward = problem.forward_model();
    let seeds = SeedStream::new(seed);
    let mut out = Profile {
        s: Vec::new(),
        exact: Vec::new(),
        estimate: Vec::new(),
        std_err: Vec::new(),
    };
    for i in 0..points {
        let s = -3.0 + 6.0 * i as f64 / (points - 1) as f64;
        let x = vec![s / (d as f64).sqrt(); d];
        let mut rng = seeds.rng(Purpose::Data, 0, i as u64);
        let est = estimate_labels(&problem, &forward, &frozen, t, &x, m, &mut rng, LabelMode::ValueOnly)?;
        out.s.push(s);
        out.exact.push(exact.value(t, &x));
        out.estimate.push(est.y);
        out.std_err.push(est.y_std_err);
    }
    Ok(out)
}

fn js(e: DpiError) -> JsError {
    JsError::new(&e.to_string())
}

/// `[reverse (n*d), direct (n*d), energy (d)]`, flattened.
#[wasm_bindgen]
pub fn reverse_sde_samples(d: usize, components: usize, seed: u32, n: usize, steps: usize) -> std::result::Result<Vec<f64>, JsError> {
    let r = sample_mixture(d, components, seed as u64, n, steps).map_err(js)?;
    Ok([r.reverse, r.direct, r.energy].concat())
}

/// `[eps, naive, cv]` rows flattened, followed by the fitted naive exponent
/// (NaN when undefined).
#[wasm_bindgen]
pub fn variance_sweep(model: &str, terminal: &str, d: usize, m: usize, n_eps: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    let r = moment_sweep(model, terminal, d, m, n_eps, seed as u64).map_err(js)?;
    let mut flat = Vec::with_capacity(3 * r.epsilons.len() + 1);
    for i in 0..r.epsilons.len() {
        flat.extend([r.epsilons[i], r.naive[i], r.cv[i]]);
    }
    flat.push(r.naive_exponent.unwrap_or(f64::NAN));
    Ok(flat)
}

/// `[s, exact, estimate, std_err]` rows flattened.
#[wasm_bindgen]
pub fn burgers_profile(d: usize, t: f64, m: usize, points: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    let p = burgers_labels(d, t, m, points, seed as u64).map_err(js)?;
    Ok((0..p.s.len()).flat_map(|i| [p.s[i], p.exact[i], p.estimate[i], p.std_err[i]]).collect())
}
