//! Fully connected tanh approximator `u(t, x)`.
//!
//! The network reads the concatenated input `(t, x_1, ..., x_d)` and returns
//! a scalar. Input derivatives are propagated layer by layer in closed form:
//! the spatial gradient by a reverse sweep, the Hessian diagonal by one
//! second-order forward tangent per coordinate, and the parameter gradient of
//! the gradient-augmented loss by reverse-differentiating the gradient sweep
//! itself.
//!
//! Batched routines take one sample per row.

mod adam;
mod checkpoint;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointRecord};

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DpiError, Result};
use crate::labels::LabeledPoint;
use crate::rng::Rng;
use rand::SeedableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Affine map `h -> W h + b` with `W` stored as `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Per-parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Layer>,
}

impl ParamGrads {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.out_dim(), l.in_dim()))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weight.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

/// Value and input derivatives of the network at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub hess_diag: Option<Vec<f64>>,
}

/// Batched counterpart of [`DerivativeBundle`]: `grads` and `hess_diag` are `[batch, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchDerivatives {
    pub values: Array1<f64>,
    pub grads: Array2<f64>,
    pub hess_diag: Option<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    activation: Activation,
}

/// Cached forward pass: `hidden[0]` is the input, `hidden[l]` the output of
/// hidden layer `l`.
struct Trace {
    hidden: Vec<Array2<f64>>,
    output: Array1<f64>,
}

/// Reverse sweep for the input gradient: `deltas[l] = du/da_l` for hidden
/// layers `l = 1..L-1` (index 0 unused), `gs[l] = du/dh_l` for `l = 0..L-1`.
struct GradSweep {
    deltas: Vec<Array2<f64>>,
    gs: Vec<Array2<f64>>,
}

impl Network {
    /// Builds a `(d + 1) -> widths... -> 1` network. Weights are drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases start at zero.
    pub fn new(d: usize, hidden_widths: &[usize], seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(DpiError::Config("network input dimension d must be >= 1".into()));
        }
        if hidden_widths.contains(&0) {
            return Err(DpiError::Config("hidden widths must be >= 1".into()));
        }
        let mut rng = Rng::seed_from_u64(seed);
        let mut dims = vec![d + 1];
        dims.extend_from_slice(hidden_widths);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.random_range(-bound..bound)
                });
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            input_dim: d + 1,
            layers,
            activation: Activation::Tanh,
        })
    }

    /// Assembles a network from explicit layers, checking the shape chain.
    pub fn from_layers(input_dim: usize, layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if input_dim < 2 {
            return Err(DpiError::Config("input_dim must be d + 1 >= 2".into()));
        }
        if layers.is_empty() {
            return Err(DpiError::Config("network needs at least one layer".into()));
        }
        let mut prev = input_dim;
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim() != prev || l.bias.len() != l.out_dim() || l.out_dim() == 0 {
                return Err(DpiError::Config(format!(
                    "layer {i} has shape {}x{} (bias {}), expected input {prev}",
                    l.out_dim(),
                    l.in_dim(),
                    l.bias.len()
                )));
            }
            prev = l.out_dim();
        }
        if prev != 1 {
            return Err(DpiError::Config(format!("final output dimension is {prev}, expected 1")));
        }
        let net = Self {
            input_dim,
            layers,
            activation,
        };
        if !net.is_finite() {
            return Err(DpiError::Numeric("non-finite network parameter".into()));
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        self.input_dim - 1
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameters in layer order, each layer as row-major weight then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.num_params(), params.len())?;
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn input_row(&self, t: f64, x: &[f64]) -> Result<Array2<f64>> {
        check_dim(self.dim(), x.len())?;
        if !t.is_finite() {
            return Err(DpiError::Usage(format!("time {t} is not finite")));
        }
        let mut row = Array2::zeros((1, self.input_dim));
        row[[0, 0]] = t;
        for (dst, &src) in row.slice_mut(s![0, 1..]).iter_mut().zip(x) {
            *dst = src;
        }
        Ok(row)
    }

    pub fn forward(&self, t: f64, x: &[f64]) -> Result<f64> {
        let row = self.input_row(t, x)?;
        Ok(self.trace(row.view()).output[0])
    }

    pub fn derivatives(&self, t: f64, x: &[f64], want_hessian: bool) -> Result<DerivativeBundle> {
        let row = self.input_row(t, x)?;
        let b = self.derivatives_batch(row.view(), want_hessian)?;
        Ok(DerivativeBundle {
            value: b.values[0],
            grad_x: b.grads.row(0).to_vec(),
            hess_diag: b.hess_diag.map(|h| h.row(0).to_vec()),
        })
    }

    /// Values at each row of `inputs` (`[batch, d + 1]`, time in column 0).
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim, inputs.ncols())?;
        Ok(self.trace(inputs).output)
    }

    pub fn derivatives_batch(
        &self,
        inputs: ArrayView2<f64>,
        want_hessian: bool,
    ) -> Result<BatchDerivatives> {
        check_dim(self.input_dim, inputs.ncols())?;
        let trace = self.trace(inputs);
        let sweep = self.grad_sweep(&trace);
        let grads = sweep.gs[0].slice(s![.., 1..]).to_owned();
        let hess_diag = want_hessian.then(|| self.hessian_diag(&trace));
        Ok(BatchDerivatives {
            values: trace.output,
            grads,
            hess_diag,
        })
    }

    fn trace(&self, inputs: ArrayView2<f64>) -> Trace {
        let n_layers = self.layers.len();
        let mut hidden = Vec::with_capacity(n_layers);
        hidden.push(inputs.to_owned());
        for layer in &self.layers[..n_layers - 1] {
            let mut a = hidden.last().unwrap().dot(&layer.weight.t());
            a += &layer.bias;
            a.mapv_inplace(f64::tanh);
            hidden.push(a);
        }
        let last = &self.layers[n_layers - 1];
        let mut out = hidden.last().unwrap().dot(&last.weight.t());
        out += &last.bias;
        Trace {
            hidden,
            output: out.column(0).to_owned(),
        }
    }

    fn grad_sweep(&self, trace: &Trace) -> GradSweep {
        let n_layers = self.layers.len();
        let batch = trace.output.len();
        let mut deltas: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers];
        let mut gs: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers];
        // du/da_L = 1, so du/dh_{L-1} is the output weight row repeated.
        let w_out = self.layers[n_layers - 1].weight.row(0);
        let mut g = Array2::zeros((batch, w_out.len()));
        g.rows_mut().into_iter().for_each(|mut r| r.assign(&w_out));
        for l in (1..n_layers).rev() {
            let h = &trace.hidden[l];
            let delta = Zip::from(&g).and(h).map_collect(|&gv, &hv| gv * (1.0 - hv * hv));
            gs[l] = g;
            g = delta.dot(&self.layers[l - 1].weight);
            deltas[l] = delta;
        }
        gs[0] = g;
        GradSweep { deltas, gs }
    }

    /// Second-order forward tangents along every spatial input coordinate,
    /// stacked as `[d * batch, width]` so each layer costs one product.
    fn hessian_diag(&self, trace: &Trace) -> Array2<f64> {
        let d = self.dim();
        let batch = trace.output.len();
        let n_layers = self.layers.len();
        if n_layers == 1 {
            return Array2::zeros((batch, d));
        }
        let rows = d * batch;

        // First layer: a' = W[:, 1 + i] for every sample, a'' = 0.
        let w1 = &self.layers[0].weight;
        let h1 = &trace.hidden[1];
        let width = w1.nrows();
        let mut tan1 = Array2::zeros((rows, width));
        let mut tan2 = Array2::zeros((rows, width));
        for i in 0..d {
            let col = w1.column(1 + i);
            for b in 0..batch {
                let r = i * batch + b;
                let h = h1.row(b);
                let mut t1 = tan1.row_mut(r);
                let mut t2 = tan2.row_mut(r);
                for k in 0..width {
                    let hv = h[k];
                    let sv = 1.0 - hv * hv;
                    let ap = col[k];
                    t1[k] = sv * ap;
                    t2[k] = -2.0 * hv * sv * ap * ap;
                }
            }
        }

        for l in 2..=n_layers {
            let w = &self.layers[l - 1].weight;
            let a1 = tan1.dot(&w.t());
            let a2 = tan2.dot(&w.t());
            if l == n_layers {
                tan2 = a2;
                break;
            }
            let h = &trace.hidden[l];
            let width = w.nrows();
            tan1 = Array2::zeros((rows, width));
            tan2 = Array2::zeros((rows, width));
            for r in 0..rows {
                let hb = h.row(r % batch);
                let (p1, p2) = (a1.row(r), a2.row(r));
                let mut t1 = tan1.row_mut(r);
                let mut t2 = tan2.row_mut(r);
                for k in 0..width {
                    let hv = hb[k];
                    let sv = 1.0 - hv * hv;
                    t1[k] = sv * p1[k];
                    t2[k] = sv * p2[k] - 2.0 * hv * sv * p1[k] * p1[k];
                }
            }
        }

        let mut out = Array2::zeros((batch, d));
        for i in 0..d {
            for b in 0..batch {
                out[[b, i]] = tan2[[i * batch + b, 0]];
            }
        }
        out
    }

    /// Gradient-augmented regression loss over `batch` and its exact gradient
    /// with respect to every parameter:
    ///
    /// `(1/n) sum_i |y_i - u(t_i, x_i)|^2 + (lambda/d) |z_i - grad_x u(t_i, x_i)|^2`.
    pub fn loss_and_param_grad(
        &self,
        batch: &[LabeledPoint],
        lambda: f64,
    ) -> Result<(f64, ParamGrads)> {
        if batch.is_empty() {
            return Err(DpiError::Usage("loss over an empty batch".into()));
        }
        if !(lambda >= 0.0) {
            return Err(DpiError::Usage(format!("lambda must be >= 0, got {lambda}")));
        }
        let d = self.dim();
        let n = batch.len();
        let mut inputs = Array2::zeros((n, self.input_dim));
        let mut y = Array1::zeros(n);
        let mut z = if lambda > 0.0 {
            Some(Array2::zeros((n, d)))
        } else {
            None
        };
        for (i, p) in batch.iter().enumerate() {
            check_dim(d, p.x.len())?;
            inputs[[i, 0]] = p.t;
            inputs.slice_mut(s![i, 1..]).assign(&ndarray::aview1(&p.x));
            y[i] = p.y;
            if let Some(z) = z.as_mut() {
                let zi = p.z.as_ref().ok_or_else(|| {
                    DpiError::Usage(format!("point {i} has no gradient label but lambda = {lambda}"))
                })?;
                check_dim(d, zi.len())?;
                z.row_mut(i).assign(&ndarray::aview1(zi));
            }
        }
        Ok(self.loss_and_grad_arrays(inputs.view(), y.view(), z.as_ref().map(|z| z.view()), lambda))
    }

    fn loss_and_grad_arrays(
        &self,
        inputs: ArrayView2<f64>,
        y: ndarray::ArrayView1<f64>,
        z: Option<ArrayView2<f64>>,
        lambda: f64,
    ) -> (f64, ParamGrads) {
        let n = inputs.nrows();
        let d = self.dim();
        let n_layers = self.layers.len();
        let nf = n as f64;
        let trace = self.trace(inputs);
        let resid = &trace.output - &y;
        let mut loss = resid.iter().map(|r| r * r).sum::<f64>() / nf;
        let mut grads = ParamGrads::zeros_like(self);

        // Extra adjoint injected into each hidden activation by the gradient term.
        let mut h_bar: Vec<Option<Array2<f64>>> = vec![None; n_layers];

        if let Some(z) = z {
            let sweep = self.grad_sweep(&trace);
            let gx = sweep.gs[0].slice(s![.., 1..]);
            let gdiff = &gx - &z;
            loss += lambda / d as f64 * gdiff.iter().map(|v| v * v).sum::<f64>() / nf;

            let scale = 2.0 * lambda / (d as f64 * nf);
            let mut g_bar = Array2::zeros((n, self.input_dim));
            g_bar.slice_mut(s![.., 1..]).assign(&(&gdiff * scale));

            // Reverse through g_{l-1} = delta_l W_l and delta_l = g_l * (1 - h_l^2).
            for l in 1..=n_layers {
                let w = &self.layers[l - 1].weight;
                if l == n_layers {
                    // delta_L is the constant 1.
                    let wb = g_bar.sum_axis(Axis(0));
                    grads.layers[l - 1].weight.row_mut(0).scaled_add(1.0, &wb);
                    break;
                }
                let delta = &sweep.deltas[l];
                grads.layers[l - 1]
                    .weight
                    .scaled_add(1.0, &delta.t().dot(&g_bar));
                let delta_bar = g_bar.dot(&w.t());
                let h = &trace.hidden[l];
                let g = &sweep.gs[l];
                let mut next_g_bar = Array2::zeros(delta_bar.raw_dim());
                let mut hb = Array2::zeros(delta_bar.raw_dim());
                Zip::from(&mut next_g_bar)
                    .and(&mut hb)
                    .and(&delta_bar)
                    .and(h)
                    .and(g)
                    .for_each(|ngb, hbv, &db, &hv, &gv| {
                        let sv = 1.0 - hv * hv;
                        *ngb = db * sv;
                        *hbv = -2.0 * hv * db * gv;
                    });
                h_bar[l] = Some(hb);
                g_bar = next_g_bar;
            }
        }

        // Standard reverse pass through the forward computation.
        let mut a_bar = (&resid * (2.0 / nf)).insert_axis(Axis(1));
        for l in (1..=n_layers).rev() {
            let h_prev = &trace.hidden[l - 1];
            let gl = &mut grads.layers[l - 1];
            gl.weight.scaled_add(1.0, &a_bar.t().dot(h_prev));
            gl.bias.scaled_add(1.0, &a_bar.sum_axis(Axis(0)));
            if l == 1 {
                break;
            }
            let mut hb = a_bar.dot(&self.layers[l - 1].weight);
            if let Some(extra) = &h_bar[l - 1] {
                hb += extra;
            }
            Zip::from(&mut hb)
                .and(h_prev)
                .for_each(|v, &hv| *v *= 1.0 - hv * hv);
            a_bar = hb;
        }

        (loss, grads)
    }
}
