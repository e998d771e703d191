//! Empirical-risk training: deterministic splits, full-batch (or
//! mini-batched) Adam with exponential learning-rate decay, and per-epoch
//! loss history.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Dataset;
use crate::error::{Error, Result};
use crate::reversible::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// 0 = full batch.
    pub batch_size: usize,
    pub lr0: f64,
    /// Per-epoch learning-rate multiplier.
    pub decay_rate: f64,
    pub split_ratio: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Stop once train loss falls below (initial loss / ratio). None = run the
    /// full epoch budget.
    #[serde(default)]
    pub loss_ratio_stop: Option<f64>,
    /// Return the parameters with the best validation loss instead of the
    /// final-epoch parameters.
    #[serde(default)]
    pub checkpoint_best: bool,
    /// Record wall-clock seconds per epoch. Disable for byte-reproducible
    /// history files.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20_000,
            batch_size: 0,
            lr0: 1e-3,
            decay_rate: 0.9995,
            split_ratio: 0.9,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            loss_ratio_stop: None,
            checkpoint_best: false,
            record_wall_time: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::invalid("train config", "0 < split_ratio < 1"));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::invalid("train config", "lr0 must be > 0"));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::invalid("train config", "0 < decay_rate <= 1"));
        }
        Ok(())
    }
}

/// Adam moment accumulators, sized to the model's flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: usize,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
        }
    }
}

/// One completed epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared Euclidean error over the training split, at the
    /// parameters the epoch's gradients were evaluated at.
    pub train_loss: f64,
    /// Validation loss after the epoch's updates.
    pub val_loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub records: Vec<EpochRecord>,
}

/// Why training stopped before the epoch budget, if it did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: LossHistory,
    /// Set when the divergence guard fired; history is partial in that case.
    pub divergence: Option<Divergence>,
}

/// Deterministic shuffled split: train gets floor(ratio * N) pairs.
pub fn split_dataset(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    ds.validate()?;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("split ratio", "requires 0 < ratio < 1"));
    }
    let n = ds.len();
    let n_train = (ratio * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(
            "split",
            format!("N = {n} with ratio {ratio} leaves an empty split"),
        ));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }

    let pick = |ids: &[usize]| Dataset {
        inputs: ids.iter().map(|&i| ds.inputs[i].clone()).collect(),
        targets: ids.iter().map(|&i| ds.targets[i].clone()).collect(),
        meta: ds.meta.clone(),
    };
    Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
}

/// Mean squared Euclidean distance (the training objective).
pub fn loss(model: &Model, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    debug_assert_eq!(inputs.len(), targets.len());
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        let out = model.forward(x)?;
        total += out
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / inputs.len() as f64)
}

/// Mean (unsquared) Euclidean distance, reported alongside the objective.
pub fn mean_distance(model: &Model, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        let out = model.forward(x)?;
        total += crate::linalg::dist(&out, y);
    }
    Ok(total / inputs.len() as f64)
}

/// Standard bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len()
        || state.first_moment.len() != params.len()
        || state.second_moment.len() != params.len()
    {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::TrainingDiverged {
            epoch: state.step_count,
            loss: f64::NAN,
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
        state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        let m_hat = state.first_moment[i] / bc1;
        let v_hat = state.second_moment[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Accumulate the mean-squared-loss gradient over `idx`, returning the batch loss.
fn batch_gradient(
    model: &Model,
    ds: &Dataset,
    idx: &[usize],
    grads: &mut [f64],
) -> Result<f64> {
    grads.fill(0.0);
    let scale = 2.0 / idx.len() as f64;
    let mut total = 0.0;
    for &i in idx {
        let x = &ds.inputs[i];
        let y = &ds.targets[i];
        // d/dp mean ||T(x)-y||^2 contribution: upstream 2 (T(x)-y) / n.
        let (out, _, dp) = model.vjp_through(x, |out| {
            out.iter().zip(y).map(|(o, t)| scale * (o - t)).collect()
        })?;
        total += out
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        for (g, d) in grads.iter_mut().zip(&dp) {
            *g += d;
        }
    }
    Ok(total / idx.len() as f64)
}

/// Split the data, run Adam for up to `cfg.epochs` epochs with
/// lr = lr0 * decay^epoch, and log one record per completed epoch.
///
/// Validation pairs never contribute gradients. The returned model carries
/// the final-epoch parameters unless `checkpoint_best` is set. Non-finite or
/// exploding loss trips the divergence guard, aborting with partial history.
pub fn train(model: &Model, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    ds.validate()?;
    if ds.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: ds.dim(),
        });
    }

    let (train_ds, val_ds) = split_dataset(ds, cfg.split_ratio, cfg.seed)?;
    let mut model = model.clone();
    let mut params = model.flat_params();
    let mut grads = vec![0.0; params.len()];
    let mut adam = AdamState::new(params.len());
    let mut history = LossHistory::default();

    let n_train = train_ds.len();
    let full_batch: Vec<usize> = (0..n_train).collect();
    let start = Instant::now();
    let mut initial_loss: Option<f64> = None;
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr0 * cfg.decay_rate.powi(epoch as i32);
        let mut blew_up = false;

        let epoch_train_loss = if cfg.batch_size == 0 || cfg.batch_size >= n_train {
            let l = batch_gradient(&model, &train_ds, &full_batch, &mut grads)?;
            if !l.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                blew_up = true;
            } else {
                adam_step(&mut params, &grads, &mut adam, lr, cfg)?;
                model.set_flat_params(&params)?;
            }
            l
        } else {
            // Deterministic per-epoch shuffle on its own stream.
            let mut order = full_batch.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(epoch as u64 + 1);
            for i in (1..n_train).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let mut acc = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let l = batch_gradient(&model, &train_ds, chunk, &mut grads)?;
                acc += l * chunk.len() as f64;
                if !l.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                    blew_up = true;
                    break;
                }
                adam_step(&mut params, &grads, &mut adam, lr, cfg)?;
                model.set_flat_params(&params)?;
            }
            acc / n_train as f64
        };

        if blew_up {
            return Ok(TrainOutcome {
                model,
                history,
                divergence: Some(Divergence {
                    epoch,
                    loss: epoch_train_loss,
                }),
            });
        }

        let val_loss = loss(&model, &val_ds.inputs, &val_ds.targets)?;
        let seconds = if cfg.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        history.records.push(EpochRecord {
            epoch,
            train_loss: epoch_train_loss,
            val_loss,
            lr,
            seconds,
        });

        let init = *initial_loss.get_or_insert(epoch_train_loss);
        if epoch_train_loss > 1e6 * init.max(f64::MIN_POSITIVE) {
            return Ok(TrainOutcome {
                model,
                history,
                divergence: Some(Divergence {
                    epoch,
                    loss: epoch_train_loss,
                }),
            });
        }

        if cfg.checkpoint_best {
            let better = best.as_ref().map_or(true, |(b, _)| val_loss < *b);
            if better {
                best = Some((val_loss, params.clone()));
            }
        }

        if let Some(ratio) = cfg.loss_ratio_stop {
            if epoch_train_loss <= init / ratio {
                break;
            }
        }
    }

    if let Some((_, best_params)) = best {
        model.set_flat_params(&best_params)?;
    }
    Ok(TrainOutcome {
        model,
        history,
        divergence: None,
    })
}
