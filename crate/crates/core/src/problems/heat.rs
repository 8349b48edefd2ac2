use crate::sde::SdeModel;

/// `u_t + 1/2 lap u = 0`, `u(T, x) = |x|^2`, solved by `|x|^2 + d (T - t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatOracle {
    pub d: usize,
    pub horizon: f64,
}

impl HeatOracle {
    pub fn forward_model(&self) -> SdeModel {
        SdeModel::brownian(self.d)
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    pub fn terminal_grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }

    pub fn exact_value(&self, t: f64, x: &[f64]) -> f64 {
        self.terminal(x) + self.d as f64 * (self.horizon - t)
    }

    pub fn exact_grad(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        self.terminal_grad(x)
    }

    pub fn exact_hess_diag(&self) -> Vec<f64> {
        vec![2.0; self.d]
    }

    pub fn exact_time_derivative(&self) -> f64 {
        -(self.d as f64)
    }
}
