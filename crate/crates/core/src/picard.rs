//! The outer loop: label against the previous iterate, warm-start, train.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, DpiError, Result};
use crate::eval::{metrics, EvalSet};
use crate::labels::{generate_dataset, FrozenSolution, LabelMode, LabeledPoint};
use crate::net::{AdamConfig, AdamState, Network};
use crate::problems::Problem;
use crate::rng::{Purpose, Rng, SeedStream};
use crate::sde::{InitialLaw, SdeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpiConfig {
    /// Picard iterations.
    #[serde(alias = "K")]
    pub k: usize,
    /// Paths per labeled point.
    #[serde(alias = "M")]
    pub m: usize,
    /// Points per iteration.
    #[serde(alias = "N")]
    pub n: usize,
    /// Epochs per iteration.
    #[serde(alias = "E")]
    pub epochs: usize,
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub widths: Vec<usize>,
    pub eval_points: usize,
}

impl DpiConfig {
    /// Published settings for each benchmark. Unlisted problems get the
    /// Burgers row.
    pub fn defaults_for(problem: &str) -> Self {
        let (k, m, n, lambda) = match problem {
            "hjb_gmm" => (20, 4096, 4096, 100.0),
            "g_brownian" => (40, 128, 1024, 100.0),
            _ => (20, 4096, 4096, 1.0),
        };
        Self {
            k,
            m,
            n,
            epochs: 16,
            lambda,
            lr: 1e-3,
            batch_size: 512,
            seed: 0,
            widths: vec![128; 4],
            eval_points: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("K", self.k),
            ("M", self.m),
            ("N", self.n),
            ("E", self.epochs),
            ("batch_size", self.batch_size),
            ("eval_points", self.eval_points),
        ] {
            if v == 0 {
                return Err(DpiError::Config(format!("dpi.{name} must be >= 1")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(DpiError::Config(format!("dpi.lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(DpiError::Config(format!("dpi.lr must be > 0, got {}", self.lr)));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(DpiError::Config("dpi.widths must be a nonempty list of positive widths".into()));
        }
        Ok(())
    }

    /// Gradient labels are generated only when the loss uses them.
    pub fn label_mode(&self) -> LabelMode {
        if self.lambda > 0.0 {
            LabelMode::ControlVariate
        } else {
            LabelMode::ValueOnly
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Mean loss of the last epoch.
    pub loss: f64,
    pub rmae: f64,
    pub g_rmae: f64,
    pub label_gen_seconds: f64,
    pub train_seconds: f64,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub config: DpiConfig,
    pub records: Vec<IterationRecord>,
    pub checkpoint: Option<String>,
}

/// Extra knobs for [`dpi_solve`].
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Replaces `u_0 = 0`.
    pub initial: Option<FrozenSolution>,
}

/// `E` epochs of mini-batch Adam over `dataset`, reshuffled in place before
/// each epoch. The last short batch is kept. Returns the mean loss of each
/// epoch, measured before each step.
pub fn train_iteration(
    net: &mut Network,
    dataset: &mut [LabeledPoint],
    epochs: usize,
    lambda: f64,
    lr: f64,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(DpiError::Usage("training on an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(DpiError::Usage("batch_size must be >= 1".into()));
    }
    let mut adam = AdamState::new(net, AdamConfig::default());
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        dataset.shuffle(rng);
        let mut total = 0.0;
        for (b, batch) in dataset.chunks(batch_size).enumerate() {
            let (loss, grads) = net.loss_and_param_grad(batch, lambda)?;
            if !loss.is_finite() {
                return Err(DpiError::Numeric(format!("loss {loss} in epoch {epoch}, batch {b}")));
            }
            adam.step(net, &grads, lr)?;
            total += loss * batch.len() as f64;
        }
        losses.push(total / dataset.len() as f64);
    }
    Ok(losses)
}

/// Draws the held-out evaluation set from the training distribution.
pub fn sample_eval_set(
    data_model: &SdeModel,
    law: &InitialLaw,
    horizon: f64,
    n: usize,
    seeds: &SeedStream,
) -> Result<EvalSet> {
    let pts = (0..n)
        .map(|i| data_model.sample_data_point(law, horizon, &mut seeds.rng(Purpose::Eval, 0, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    EvalSet::new(pts)
}

/// Runs `K` Picard iterations. Labels of iteration `k + 1` come from the
/// network as it stood at the end of iteration `k`.
pub fn dpi_solve(
    config: &DpiConfig,
    problem: &Problem,
    data_model: &SdeModel,
    law: &InitialLaw,
    options: SolveOptions,
) -> Result<(Network, RunReport)> {
    config.validate()?;
    law.validate()?;
    let d = problem.dim();
    check_dim(d, data_model.dim())?;
    check_dim(d, law.dim())?;
    let seeds = SeedStream::new(config.seed);
    let mut net = Network::new(d, &config.widths, seeds.rng(Purpose::Init, 0, 0).random())?;
    let eval = sample_eval_set(data_model, law, problem.horizon(), config.eval_points, &seeds)?;
    let mode = config.label_mode();
    let mut uk = options.initial.unwrap_or(FrozenSolution::Zero { d });
    check_dim(d, uk.dim())?;

    let mut records = Vec::with_capacity(config.k);
    for k in 1..=config.k {
        let start = Instant::now();
        let mut data = generate_dataset(problem, data_model, law, &uk, config.n, config.m, &seeds, k as u64, mode)
            .map_err(|e| e.in_iteration(k, "labels"))?;
        let label_gen_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let mut rng = seeds.rng(Purpose::Shuffle, k as u64, 0);
        let epoch_losses = train_iteration(
            &mut net,
            &mut data,
            config.epochs,
            config.lambda,
            config.lr,
            config.batch_size,
            &mut rng,
        )
        .map_err(|e| e.in_iteration(k, "train"))?;
        let train_seconds = start.elapsed().as_secs_f64();

        let m = metrics(&net, problem, &eval).map_err(|e| e.in_iteration(k, "eval"))?;
        let loss = *epoch_losses.last().unwrap_or(&f64::NAN);
        log::info!(
            "iteration {k}/{}: loss {loss:.3e} rmae {:.3e} g_rmae {:.3e} labels {label_gen_seconds:.1}s train {train_seconds:.1}s",
            config.k,
            m.rmae,
            m.g_rmae
        );
        records.push(IterationRecord {
            k,
            loss,
            rmae: m.rmae,
            g_rmae: m.g_rmae,
            label_gen_seconds,
            train_seconds,
            epoch_losses,
        });
        uk = FrozenSolution::Network(Arc::new(net.clone()));
    }
    let report = RunReport {
        problem: problem.name().to_string(),
        config: config.clone(),
        records,
        checkpoint: None,
    };
    Ok((net, report))
}
