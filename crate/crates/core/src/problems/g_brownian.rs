use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;

use crate::rng::Rng;
use crate::sde::SdeModel;

/// Fully nonlinear equation tied to G-Brownian motion,
///
/// `u_t + 1/2 lap u + 1/4 sum_i |u_{x_i x_i}| - h(t, x) = 0`,
///
/// where `h` is manufactured so that
/// `u(t, x) = sum_j v_j sin(t + w^j . x)` is the exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct GBrownian {
    pub d: usize,
    pub horizon: f64,
    /// Output weights `v_j`.
    pub v: Vec<f64>,
    /// Inner weights, `w[j][i]`.
    pub w: Vec<Vec<f64>>,
}

impl GBrownian {
    /// Draws `w_i^j ~ N(0, 1)/sqrt(d)` then `v_j ~ N(0, 1)` for each `j` in turn.
    pub fn random(d: usize, j: usize, horizon: f64, seed: u64) -> Self {
        let mut rng = Rng::seed_from_u64(seed);
        let scale = 1.0 / (d as f64).sqrt();
        let mut v = Vec::with_capacity(j);
        let mut w = Vec::with_capacity(j);
        for _ in 0..j {
            w.push(
                (0..d)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<_>>(),
            );
            v.push(rng.sample(StandardNormal));
        }
        Self { d, horizon, v, w }
    }

    pub fn forward_model(&self) -> SdeModel {
        SdeModel::brownian(self.d)
    }

    fn phases(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .map(|wj| t + wj.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn exact_value(&self, t: f64, x: &[f64]) -> f64 {
        self.phases(t, x)
            .iter()
            .zip(&self.v)
            .map(|(th, vj)| vj * th.sin())
            .sum()
    }

    pub fn exact_grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for ((th, vj), wj) in self.phases(t, x).iter().zip(&self.v).zip(&self.w) {
            let c = vj * th.cos();
            for (gi, wi) in g.iter_mut().zip(wj) {
                *gi += c * wi;
            }
        }
        g
    }

    pub fn exact_hess_diag(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.d];
        for ((th, vj), wj) in self.phases(t, x).iter().zip(&self.v).zip(&self.w) {
            let c = -vj * th.sin();
            for (hi, wi) in h.iter_mut().zip(wj) {
                *hi += c * wi * wi;
            }
        }
        h
    }

    pub fn exact_time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        self.phases(t, x)
            .iter()
            .zip(&self.v)
            .map(|(th, vj)| vj * th.cos())
            .sum()
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        self.exact_value(self.horizon, x)
    }

    pub fn terminal_grad(&self, x: &[f64]) -> Vec<f64> {
        self.exact_grad(self.horizon, x)
    }

    /// Source term `h = u_t + 1/2 lap u + 1/4 sum_i |u_{x_i x_i}|` of the exact solution.
    pub fn source(&self, t: f64, x: &[f64]) -> f64 {
        let hess = self.exact_hess_diag(t, x);
        self.exact_time_derivative(t, x)
            + 0.5 * hess.iter().sum::<f64>()
            + 0.25 * hess.iter().map(|h| h.abs()).sum::<f64>()
    }

    pub fn driver(&self, t: f64, x: &[f64], hess_diag: &[f64]) -> f64 {
        0.25 * hess_diag.iter().map(|h| h.abs()).sum::<f64>() - self.source(t, x)
    }
}
