//! Catalog of parabolic problems `u_t + F(t, x, u, grad u, hess u) = 0`,
//! `u(T, x) = g(x)`, each stored in the split
//! `F = generator of the forward process + driver f`.
//!
//! Drivers see the Hessian only through its diagonal; every problem here
//! depends on second derivatives in that form or not at all.

mod burgers;
mod g_brownian;
mod heat;
mod hjb;

pub use burgers::Burgers;
pub use g_brownian::GBrownian;
pub use heat::HeatOracle;
pub use hjb::{Gmm, GmmComponent, GmmSpec, HjbGmm};

use crate::error::{check_dim, DpiError, Result};
use crate::sde::SdeModel;

/// A function of `(t, x)` with the derivatives needed by drivers and residuals.
pub trait SolutionFn {
    fn value(&self, t: f64, x: &[f64]) -> f64;

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64>;

    /// `None` when second derivatives are unavailable.
    fn hessian_diag(&self, t: f64, x: &[f64]) -> Option<Vec<f64>>;

    /// Central difference in `t` unless overridden.
    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        let h = 1e-5 * t.abs().max(1.0);
        (self.value(t + h, x) - self.value(t - h, x)) / (2.0 * h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Burgers(Burgers),
    HjbGmm(HjbGmm),
    GBrownian(GBrownian),
    HeatOracle(HeatOracle),
}

fn check_common(d: usize, horizon: f64) -> Result<()> {
    if d == 0 {
        return Err(DpiError::Config("problem dimension d must be >= 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DpiError::Config(format!("horizon T must be positive, got {horizon}")));
    }
    Ok(())
}

impl Problem {
    pub fn burgers(d: usize, kappa: f64, sigma: f64, horizon: f64) -> Result<Self> {
        check_common(d, horizon)?;
        if !(kappa > 0.0) || !(sigma > 0.0) {
            return Err(DpiError::Config(format!(
                "burgers needs kappa > 0 and sigma > 0, got {kappa}, {sigma}"
            )));
        }
        Ok(Problem::Burgers(Burgers {
            d,
            kappa,
            sigma,
            horizon,
        }))
    }

    pub fn hjb_gmm(d: usize, horizon: f64, spec: GmmSpec) -> Result<Self> {
        check_common(d, horizon)?;
        spec.validate(d)?;
        Ok(Problem::HjbGmm(HjbGmm { d, horizon, spec }))
    }

    /// Manufactured fully nonlinear problem with `j` sine units drawn from `seed`.
    pub fn g_brownian(d: usize, j: usize, horizon: f64, seed: u64) -> Result<Self> {
        check_common(d, horizon)?;
        if j == 0 {
            return Err(DpiError::Config("g_brownian needs J >= 1".into()));
        }
        Ok(Problem::GBrownian(GBrownian::random(d, j, horizon, seed)))
    }

    pub fn heat_oracle(d: usize, horizon: f64) -> Result<Self> {
        check_common(d, horizon)?;
        Ok(Problem::HeatOracle(HeatOracle { d, horizon }))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Burgers(_) => "burgers",
            Problem::HjbGmm(_) => "hjb_gmm",
            Problem::GBrownian(_) => "g_brownian",
            Problem::HeatOracle(_) => "heat_oracle",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Burgers(p) => p.d,
            Problem::HjbGmm(p) => p.d,
            Problem::GBrownian(p) => p.d,
            Problem::HeatOracle(p) => p.d,
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Problem::Burgers(p) => p.horizon,
            Problem::HjbGmm(p) => p.horizon,
            Problem::GBrownian(p) => p.horizon,
            Problem::HeatOracle(p) => p.horizon,
        }
    }

    pub fn needs_hessian(&self) -> bool {
        matches!(self, Problem::GBrownian(_))
    }

    /// Whether the driver reads `grad u` at all.
    pub fn needs_gradient(&self) -> bool {
        matches!(self, Problem::Burgers(_) | Problem::HjbGmm(_))
    }

    /// The forward process the driver was split against.
    pub fn forward_model(&self) -> SdeModel {
        match self {
            Problem::Burgers(p) => p.forward_model(),
            Problem::HjbGmm(p) => p.forward_model(),
            Problem::GBrownian(p) => p.forward_model(),
            Problem::HeatOracle(p) => p.forward_model(),
        }
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Burgers(p) => p.terminal(x),
            Problem::HjbGmm(p) => p.terminal(x),
            Problem::GBrownian(p) => p.terminal(x),
            Problem::HeatOracle(p) => p.terminal(x),
        }
    }

    pub fn terminal_grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(match self {
            Problem::Burgers(p) => p.terminal_grad(x),
            Problem::HjbGmm(p) => p.terminal_grad(x),
            Problem::GBrownian(p) => p.terminal_grad(x),
            Problem::HeatOracle(p) => p.terminal_grad(x),
        })
    }

    /// `f(t, x, y, z, diag(gamma))`.
    pub fn driver(&self, t: f64, x: &[f64], y: f64, z: &[f64], hess_diag: Option<&[f64]>) -> Result<f64> {
        Ok(match self {
            Problem::Burgers(p) => p.driver(y, z),
            Problem::HjbGmm(p) => p.driver(x, z),
            Problem::GBrownian(p) => {
                let h = hess_diag.ok_or_else(|| {
                    DpiError::Usage("g_brownian driver needs the Hessian diagonal".into())
                })?;
                p.driver(t, x, h)
            }
            Problem::HeatOracle(_) => 0.0,
        })
    }

    /// Closed-form solution, when the problem has one.
    pub fn exact(&self) -> Option<Exact<'_>> {
        Some(Exact(self))
    }
}

/// Closed-form solution of a catalog problem.
#[derive(Debug, Clone, Copy)]
pub struct Exact<'a>(&'a Problem);

impl SolutionFn for Exact<'_> {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        match self.0 {
            Problem::Burgers(p) => p.exact_value(t, x),
            Problem::HjbGmm(p) => p.exact_value(t, x),
            Problem::GBrownian(p) => p.exact_value(t, x),
            Problem::HeatOracle(p) => p.exact_value(t, x),
        }
    }

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match self.0 {
            Problem::Burgers(p) => p.exact_grad(t, x),
            Problem::HjbGmm(p) => p.exact_grad(t, x),
            Problem::GBrownian(p) => p.exact_grad(t, x),
            Problem::HeatOracle(p) => p.exact_grad(t, x),
        }
    }

    fn hessian_diag(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        Some(match self.0 {
            Problem::Burgers(p) => p.exact_hess_diag(t, x),
            Problem::HjbGmm(p) => p.exact_hess_diag(t, x),
            Problem::GBrownian(p) => p.exact_hess_diag(t, x),
            Problem::HeatOracle(p) => p.exact_hess_diag(),
        })
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        match self.0 {
            Problem::Burgers(p) => p.exact_time_derivative(t, x),
            Problem::GBrownian(p) => p.exact_time_derivative(t, x),
            Problem::HeatOracle(p) => p.exact_time_derivative(),
            Problem::HjbGmm(_) => {
                let h = 1e-5 * t.abs().max(1.0);
                (self.value(t + h, x) - self.value(t - h, x)) / (2.0 * h)
            }
        }
    }
}

/// PDE residual `u_t + L u + f(t, x, u, grad u, diag hess u)` of `u` at `(t, x)`,
/// with `L` the generator of the problem's forward process.
pub fn residual(problem: &Problem, u: &dyn SolutionFn, t: f64, x: &[f64]) -> Result<f64> {
    check_dim(problem.dim(), x.len())?;
    let hess = u
        .hessian_diag(t, x)
        .ok_or_else(|| DpiError::Usage("residual needs the Hessian diagonal".into()))?;
    let grad = u.gradient(t, x);
    let value = u.value(t, x);
    let gen = problem.forward_model().generator(x, &grad, &hess);
    let f = problem.driver(t, x, value, &grad, Some(&hess))?;
    Ok(u.time_derivative(t, x) + gen + f)
}
