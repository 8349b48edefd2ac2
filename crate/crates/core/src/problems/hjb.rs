//! HJB equation of score-based sampling with a Gaussian-mixture target.
//!
//! For the OU process `dX = -X dt + dW` started from a mixture `p_0`, each
//! component stays Gaussian with mean `mu e^{-t}` and covariance
//! `s e^{-2t} + (1 - e^{-2t})/2` times the identity. The value function
//! `u(t, x) = -log p(T - t, x)` solves
//!
//! `u_t + 1/2 lap u + x . grad u - 1/2 |grad u|^2 - d = 0`.

use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DpiError, Result};
use crate::rng::Rng;
use crate::sde::SdeModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic covariance `variance_scale * I`.
    pub variance_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub components: Vec<GmmComponent>,
}

impl GmmSpec {
    /// Means uniform in `[-mean_range, mean_range]^d`, weights uniform in
    /// `(0, 1]` then normalized, common covariance `variance_scale * I`.
    pub fn random(d: usize, n_components: usize, mean_range: f64, variance_scale: f64, seed: u64) -> Self {
        let mut rng = Rng::seed_from_u64(seed);
        let mut components: Vec<GmmComponent> = (0..n_components)
            .map(|_| GmmComponent {
                weight: 1.0 - rng.random::<f64>(),
                mean: (0..d)
                    .map(|_| rng.random_range(-mean_range..=mean_range))
                    .collect(),
                variance_scale,
            })
            .collect();
        let total: f64 = components.iter().map(|c| c.weight).sum();
        components.iter_mut().for_each(|c| c.weight /= total);
        Self { components }
    }

    pub fn single(mean: Vec<f64>, variance_scale: f64) -> Self {
        Self {
            components: vec![GmmComponent {
                weight: 1.0,
                mean,
                variance_scale,
            }],
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.components.is_empty() {
            return Err(DpiError::Config("GMM needs at least one component".into()));
        }
        for (k, c) in self.components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(DpiError::Config(format!("gmm component {k}: weight {} not in (0, 1]", c.weight)));
            }
            if !(c.variance_scale > 0.0 && c.variance_scale.is_finite()) {
                return Err(DpiError::Config(format!(
                    "gmm component {k}: variance_scale {} must be positive",
                    c.variance_scale
                )));
            }
            if c.mean.len() != d {
                return Err(DpiError::Config(format!(
                    "gmm component {k}: mean has dimension {}, expected {d}",
                    c.mean.len()
                )));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DpiError::Config(format!("gmm weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// The mixture after running the OU process for time `tau`.
    pub fn propagate(&self, tau: f64) -> Gmm {
        let decay = (-tau).exp();
        let decay2 = (-2.0 * tau).exp();
        Gmm {
            log_weights: self.components.iter().map(|c| c.weight.ln()).collect(),
            means: self
                .components
                .iter()
                .map(|c| c.mean.iter().map(|m| m * decay).collect())
                .collect(),
            variances: self
                .components
                .iter()
                .map(|c| c.variance_scale * decay2 + 0.5 * (1.0 - decay2))
                .collect(),
        }
    }
}

/// Isotropic Gaussian mixture evaluated through log-sum-exp.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

impl Gmm {
    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Per-component log terms `log w_k + log N(x; m_k, v_k I)`.
    fn component_logs(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len() as f64;
        self.log_weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((lw, m), &v)| {
                let r2: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                lw - 0.5 * d * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * r2 / v
            })
            .collect()
    }

    /// Log-density and component responsibilities.
    fn log_density_and_resp(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let logs = self.component_logs(x);
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut resp: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = resp.iter().sum();
        resp.iter_mut().for_each(|r| *r /= total);
        (max + total.ln(), resp)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_density_and_resp(x).0
    }

    /// `grad log p(x)`.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let (_, resp) = self.log_density_and_resp(x);
        let mut g = vec![0.0; x.len()];
        for ((r, m), &v) in resp.iter().zip(&self.means).zip(&self.variances) {
            for ((gi, xi), mi) in g.iter_mut().zip(x).zip(m) {
                *gi -= r * (xi - mi) / v;
            }
        }
        g
    }

    /// Diagonal of the Hessian of `log p` at `x`.
    pub fn log_density_hess_diag(&self, x: &[f64]) -> Vec<f64> {
        let (_, resp) = self.log_density_and_resp(x);
        let d = x.len();
        let mut first = vec![0.0; d];
        let mut second = vec![0.0; d];
        for ((r, m), &v) in resp.iter().zip(&self.means).zip(&self.variances) {
            for i in 0..d {
                let q = (x[i] - m[i]) / v;
                first[i] += r * q;
                second[i] += r * (q * q - 1.0 / v);
            }
        }
        second
            .iter()
            .zip(&first)
            .map(|(s, f)| s - f * f)
            .collect()
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.log_weights.len() - 1;
        for (i, lw) in self.log_weights.iter().enumerate() {
            acc += lw.exp();
            if u < acc {
                k = i;
                break;
            }
        }
        let sd = self.variances[k].sqrt();
        self.means[k]
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjbGmm {
    pub d: usize,
    pub horizon: f64,
    pub spec: GmmSpec,
}

impl HjbGmm {
    pub fn forward_model(&self) -> SdeModel {
        SdeModel::brownian(self.d)
    }

    /// Density of the OU process at time `T - t`, i.e. the law whose
    /// negative log is `u(t, .)`.
    pub fn density_for(&self, t: f64) -> Gmm {
        self.spec.propagate(self.horizon - t)
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        -self.spec.propagate(0.0).log_density(x)
    }

    pub fn terminal_grad(&self, x: &[f64]) -> Vec<f64> {
        self.exact_grad(self.horizon, x)
    }

    pub fn driver(&self, x: &[f64], z: &[f64]) -> f64 {
        let xz: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
        let zz: f64 = z.iter().map(|v| v * v).sum();
        xz - 0.5 * zz - self.d as f64
    }

    pub fn exact_value(&self, t: f64, x: &[f64]) -> f64 {
        -self.density_for(t).log_density(x)
    }

    pub fn exact_grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.density_for(t).score(x).into_iter().map(|g| -g).collect()
    }

    pub fn exact_hess_diag(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.density_for(t)
            .log_density_hess_diag(x)
            .into_iter()
            .map(|h| -h)
            .collect()
    }
}
