//! Oracles shared by the integration targets.
#![allow(dead_code, clippy::needless_range_loop)]

use dpi::net::Network;
use ndarray::{Array2, ArrayView2};
use dpi::LabeledPoint;
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Random network with nonzero biases, so every parameter matters.
pub fn random_network(d: usize, widths: &[usize], seed: u64) -> Network {
    let mut net = Network::new(d, widths, seed).unwrap();
    let mut r = rng(seed ^ 0xA5A5);
    let p: Vec<f64> = net
        .params_flat()
        .iter()
        .map(|w| w + 0.3 * r.sample::<f64, _>(StandardNormal))
        .collect();
    net.set_params_flat(&p).unwrap();
    net
}

/// Straight-line forward pass written independently of the library.
pub fn reference_forward(net: &Network, t: f64, x: &[f64]) -> f64 {
    let mut h: Vec<f64> = std::iter::once(t).chain(x.iter().copied()).collect();
    let n = net.layers().len();
    for (l, layer) in net.layers().iter().enumerate() {
        let mut out = Vec::with_capacity(layer.out_dim());
        for r in 0..layer.out_dim() {
            let mut a = layer.bias[r];
            for c in 0..layer.in_dim() {
                a += layer.weight[[r, c]] * h[c];
            }
            out.push(if l + 1 < n { a.tanh() } else { a });
        }
        h = out;
    }
    h[0]
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Central differences of `u(t, .)` in `x`.
pub fn fd_gradient(net: &Network, t: f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (net.forward(t, &xp).unwrap() - net.forward(t, &xm).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Central differences of the (already verified) analytic gradient.
pub fn fd_hess_diag(net: &Network, t: f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let gp = net.derivatives(t, &xp, false).unwrap().grad_x[i];
            let gm = net.derivatives(t, &xm, false).unwrap().grad_x[i];
            (gp - gm) / (2.0 * h)
        })
        .collect()
}

/// The two terms of the training loss, `(mean |y - u|^2, mean |z - grad u|^2 / d)`,
/// assembled from the (already verified) input derivatives.
pub fn reference_loss_terms(net: &Network, inputs: ArrayView2<f64>, batch: &[LabeledPoint]) -> (f64, f64) {
    let b = net.derivatives_batch(inputs, false).unwrap();
    let n = batch.len() as f64;
    let d = net.dim() as f64;
    let (mut fit, mut slope) = (0.0, 0.0);
    for (i, p) in batch.iter().enumerate() {
        fit += (p.y - b.values[i]).powi(2);
        if let Some(z) = &p.z {
            slope += z.iter().zip(b.grads.row(i)).map(|(a, g)| (a - g).powi(2)).sum::<f64>();
        }
    }
    (fit / n, slope / (n * d))
}

pub fn batch_inputs(batch: &[LabeledPoint]) -> Array2<f64> {
    let d = batch[0].x.len();
    Array2::from_shape_fn((batch.len(), d + 1), |(i, j)| if j == 0 { batch[i].t } else { batch[i].x[j - 1] })
}

/// Richardson-extrapolated central differences of the loss in every
/// parameter, `(4 D(h) - D(2h)) / 3`, for each `lambda`. Fourth order, so a
/// step large enough to keep cancellation small still leaves negligible
/// truncation error.
pub fn fd_param_grads(net: &Network, batch: &[LabeledPoint], lambdas: &[f64], h: f64) -> Vec<Vec<f64>> {
    let inputs = batch_inputs(batch);
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut p = base.clone();
    let mut out = vec![Vec::with_capacity(base.len()); lambdas.len()];
    for k in 0..base.len() {
        let mut terms = [(0.0, 0.0); 4];
        for (slot, off) in [h, -h, 2.0 * h, -2.0 * h].into_iter().enumerate() {
            p[k] = base[k] + off;
            probe.set_params_flat(&p).unwrap();
            terms[slot] = reference_loss_terms(&probe, inputs.view(), batch);
        }
        p[k] = base[k];
        for (l, lambda) in lambdas.iter().enumerate() {
            let f = |(a, b): (f64, f64)| a + lambda * b;
            let d1 = (f(terms[0]) - f(terms[1])) / (2.0 * h);
            let d2 = (f(terms[2]) - f(terms[3])) / (4.0 * h);
            out[l].push((4.0 * d1 - d2) / 3.0);
        }
    }
    out
}

pub fn fd_param_grad(net: &Network, batch: &[LabeledPoint], lambda: f64, h: f64) -> Vec<f64> {
    fd_param_grads(net, batch, &[lambda], h).remove(0)
}

pub fn random_batch(net: &Network, n: usize, seed: u64) -> Vec<LabeledPoint> {
    let d = net.dim();
    let mut r = rng(seed);
    (0..n)
        .map(|_| LabeledPoint {
            t: r.random::<f64>(),
            x: normals(&mut r, d, 1.0),
            y: r.sample(StandardNormal),
            z: Some(normals(&mut r, d, 1.0)),
        })
        .collect()
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0))
}

/// Sample mean with its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let (m, var) = mean_var(v);
    (m, (var / v.len() as f64).sqrt())
}

/// Sample covariance of `(a, b)` with a standard error from the spread of
/// the centered products.
pub fn cov_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, _) = mean_var(a);
    let (mb, _) = mean_var(b);
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    mean_se(&prods)
}
