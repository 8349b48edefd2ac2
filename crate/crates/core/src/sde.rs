//! Forward processes with exact joint sampling of the state and of the
//! stochastic weight `I_{t,s} = int_t^s [sigma(r, X_r)^{-1} D_r]^T dW_r`.
//!
//! All three families are time-homogeneous and have closed-form transition
//! laws, so a path can be extended segment by segment without any time
//! stepping. Extending a path keeps `I` consistent: the integral over
//! `[t, s2]` is the integral over `[t, s1]` plus the contribution of the new
//! increments.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DpiError, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SdeKind {
    /// `dX = scale dW`. `scale = 1` is standard Brownian motion.
    BrownianMotion { scale: f64 },
    /// `dX = diag(X) dW`.
    GeometricBrownian,
    /// `dX = -theta X dt + dW`.
    OrnsteinUhlenbeck { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeModel {
    kind: SdeKind,
    d: usize,
}

/// Law of the initial state of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialLaw {
    Point(Vec<f64>),
    /// `N(mean, variance_scale * I)`.
    Gaussian { mean: Vec<f64>, variance_scale: f64 },
}

/// One joint draw of `X_s` and `I_{t,s}` for a path started at `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDraw {
    pub s: f64,
    pub x_s: Vec<f64>,
    pub bel_integral: Vec<f64>,
}

/// Per-coordinate transition constants of the OU process over a step of
/// length `dt`: `sd` is the standard deviation of both Gaussian integrals and
/// `corr` their correlation.
#[derive(Debug, Clone, Copy)]
struct OuStep {
    decay: f64,
    sd: f64,
    corr: f64,
    corr_c: f64,
}

impl OuStep {
    fn new(theta: f64, dt: f64) -> Self {
        let var = -(-2.0 * theta * dt).exp_m1() / (2.0 * theta);
        let z = theta * dt;
        // cov / var = theta dt / sinh(theta dt)
        let corr = if z < 1e-8 { 1.0 } else { z / z.sinh() };
        Self {
            decay: (-theta * dt).exp(),
            sd: var.sqrt(),
            corr,
            corr_c: (1.0 - corr * corr).max(0.0).sqrt(),
        }
    }
}

impl SdeModel {
    pub fn new(kind: SdeKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(DpiError::Config("SDE dimension must be >= 1".into()));
        }
        match kind {
            SdeKind::BrownianMotion { scale } if !(scale > 0.0 && scale.is_finite()) => Err(
                DpiError::Config(format!("Brownian scale must be positive, got {scale}")),
            ),
            SdeKind::OrnsteinUhlenbeck { theta } if !(theta > 0.0 && theta.is_finite()) => Err(
                DpiError::Config(format!("OU theta must be positive, got {theta}")),
            ),
            _ => Ok(Self { kind, d }),
        }
    }

    pub fn brownian(d: usize) -> Self {
        Self {
            kind: SdeKind::BrownianMotion { scale: 1.0 },
            d,
        }
    }

    pub fn kind(&self) -> SdeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Applies the generator `mu . grad + 1/2 tr(sigma sigma^T hess)` to a
    /// function whose gradient and Hessian diagonal at `x` are given. All
    /// three families have diagonal `sigma sigma^T`.
    pub fn generator(&self, x: &[f64], grad: &[f64], hess_diag: &[f64]) -> f64 {
        match self.kind {
            SdeKind::BrownianMotion { scale } => 0.5 * scale * scale * hess_diag.iter().sum::<f64>(),
            SdeKind::GeometricBrownian => x
                .iter()
                .zip(hess_diag)
                .map(|(xi, h)| 0.5 * xi * xi * h)
                .sum(),
            SdeKind::OrnsteinUhlenbeck { theta } => x
                .iter()
                .zip(grad)
                .zip(hess_diag)
                .map(|((xi, g), h)| -theta * xi * g + 0.5 * h)
                .sum(),
        }
    }

    pub(crate) fn check_start(&self, x0: &[f64]) -> Result<()> {
        check_dim(self.d, x0.len())?;
        if matches!(self.kind, SdeKind::GeometricBrownian) {
            if let Some(i) = x0.iter().position(|&v| v == 0.0) {
                return Err(DpiError::Domain(format!(
                    "geometric Brownian motion started at x_{i} = 0 has singular diffusion"
                )));
            }
        }
        Ok(())
    }

    /// Extends a path started at `(t0, x0)` from time `s_from` to `s_to`,
    /// updating the current state `x` and the integral `integral` in place.
    /// No argument checks; callers validate `x0` once per path.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn extend_path(
        &self,
        t0: f64,
        x0: &[f64],
        s_from: f64,
        s_to: f64,
        x: &mut [f64],
        integral: &mut [f64],
        rng: &mut Rng,
    ) {
        let dt = s_to - s_from;
        if dt <= 0.0 {
            return;
        }
        match self.kind {
            SdeKind::BrownianMotion { scale } => {
                let sd = dt.sqrt();
                // I is the scaled displacement, so for unit scale it equals
                // x_s - x bit for bit.
                for ((xi, ii), x0i) in x.iter_mut().zip(integral.iter_mut()).zip(x0) {
                    let dw = sd * rng.sample::<f64, _>(StandardNormal);
                    *xi += scale * dw;
                    *ii = (*xi - x0i) / scale;
                }
            }
            SdeKind::GeometricBrownian => {
                let sd = dt.sqrt();
                for ((xi, ii), x0i) in x.iter_mut().zip(integral.iter_mut()).zip(x0) {
                    let dw = sd * rng.sample::<f64, _>(StandardNormal);
                    *xi *= (-0.5 * dt + dw).exp();
                    *ii += dw / x0i;
                }
            }
            SdeKind::OrnsteinUhlenbeck { theta } => {
                let step = OuStep::new(theta, dt);
                // D_r = e^{-theta (r - t0)} scales the new increments of I.
                let lag = (-theta * (s_from - t0)).exp();
                for (xi, ii) in x.iter_mut().zip(integral.iter_mut()) {
                    let n1: f64 = rng.sample(StandardNormal);
                    let n2: f64 = rng.sample(StandardNormal);
                    let g1 = step.sd * n1;
                    let g2 = step.sd * (step.corr * n1 + step.corr_c * n2);
                    *xi = step.decay * *xi + g1;
                    *ii += lag * g2;
                }
            }
        }
    }

    /// Exact joint draw of `(X_s^{t,x}, I_{t,s})`.
    pub fn sample_state(&self, t: f64, x: &[f64], s: f64, rng: &mut Rng) -> Result<PathDraw> {
        if !(s >= t) {
            return Err(DpiError::Usage(format!("sample time s = {s} precedes t = {t}")));
        }
        self.check_start(x)?;
        let mut x_s = x.to_vec();
        let mut bel_integral = vec![0.0; self.d];
        self.extend_path(t, x, t, s, &mut x_s, &mut bel_integral, rng);
        Ok(PathDraw { s, x_s, bel_integral })
    }

    /// Draws `(X_{s1}, I_{t,s1})` and `(X_{s2}, I_{t,s2})` along one path.
    pub fn sample_two_times(
        &self,
        t: f64,
        x: &[f64],
        s1: f64,
        s2: f64,
        rng: &mut Rng,
    ) -> Result<(PathDraw, PathDraw)> {
        if !(t <= s1 && s1 <= s2) {
            return Err(DpiError::Usage(format!(
                "need t <= s1 <= s2, got {t}, {s1}, {s2}"
            )));
        }
        let first = self.sample_state(t, x, s1, rng)?;
        let mut x2 = first.x_s.clone();
        let mut i2 = first.bel_integral.clone();
        self.extend_path(t, x, s1, s2, &mut x2, &mut i2, rng);
        Ok((
            first,
            PathDraw {
                s: s2,
                x_s: x2,
                bel_integral: i2,
            },
        ))
    }

    /// Training-data point: `t ~ U[0, T]`, then `x ~ X_t` with `X_0 ~ law`.
    pub fn sample_data_point(&self, law: &InitialLaw, horizon: f64, rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
        if !(horizon > 0.0) {
            return Err(DpiError::Usage(format!("horizon must be positive, got {horizon}")));
        }
        let t = rng.random_range(0.0..=horizon);
        let x0 = law.sample(rng);
        let draw = self.sample_state(0.0, &x0, t, rng)?;
        Ok((t, draw.x_s))
    }
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Point(x) => x.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialLaw::Gaussian { variance_scale, .. } if !(*variance_scale >= 0.0) => Err(
                DpiError::Config(format!("xi variance_scale must be >= 0, got {variance_scale}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            InitialLaw::Point(x0) => x0.clone(),
            InitialLaw::Gaussian {
                mean,
                variance_scale,
            } => {
                if *variance_scale == 0.0 {
                    return mean.clone();
                }
                let sd = variance_scale.sqrt();
                mean.iter()
                    .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        }
    }
}
