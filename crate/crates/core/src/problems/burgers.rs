use crate::sde::{SdeKind, SdeModel};

/// Burgers-type semilinear equation
///
/// `u_t + sigma^2/2 lap u + [kappa sigma^2/sqrt(d) (u - 1/2) - 1/(kappa sqrt(d))] sum_i u_{x_i} = 0`
///
/// with the logistic travelling-wave solution
/// `u(t, x) = logistic(t + kappa/sqrt(d) sum_i x_i)`. The forward process is
/// `sigma` times Brownian motion, so the driver carries no second-order
/// remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Burgers {
    pub d: usize,
    pub kappa: f64,
    pub sigma: f64,
    pub horizon: f64,
}

/// `1 / (1 + e^{-a})` without overflow for large `|a|`.
pub(crate) fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `logistic(a) (1 - logistic(a))`, stable in both tails.
fn logistic_slope(a: f64) -> f64 {
    let e = (-a.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

impl Burgers {
    pub fn forward_model(&self) -> SdeModel {
        SdeModel::new(SdeKind::BrownianMotion { scale: self.sigma }, self.d)
            .expect("validated Burgers parameters")
    }

    fn coupling(&self) -> f64 {
        self.kappa / (self.d as f64).sqrt()
    }

    fn arg(&self, t: f64, x: &[f64]) -> f64 {
        t + self.coupling() * x.iter().sum::<f64>()
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        logistic(self.arg(self.horizon, x))
    }

    pub fn terminal_grad(&self, x: &[f64]) -> Vec<f64> {
        self.exact_grad(self.horizon, x)
    }

    pub fn driver(&self, y: f64, z: &[f64]) -> f64 {
        let sqrt_d = (self.d as f64).sqrt();
        let coef = self.kappa * self.sigma * self.sigma / sqrt_d * (y - 0.5) - 1.0 / (self.kappa * sqrt_d);
        coef * z.iter().sum::<f64>()
    }

    pub fn exact_value(&self, t: f64, x: &[f64]) -> f64 {
        logistic(self.arg(t, x))
    }

    pub fn exact_grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        vec![self.coupling() * logistic_slope(self.arg(t, x)); self.d]
    }

    pub fn exact_hess_diag(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let a = self.arg(t, x);
        let c = self.coupling();
        vec![c * c * logistic_slope(a) * (1.0 - 2.0 * logistic(a)); self.d]
    }

    pub fn exact_time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        logistic_slope(self.arg(t, x))
    }
}
