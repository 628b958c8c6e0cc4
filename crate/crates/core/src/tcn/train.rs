//! Mini-batch training with validation-based early stopping.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::model::{EpochRecord, Plan, TcnModel, TcnParams};
use crate::error::{CoreError, CoreResult};
use crate::window::Supervised;

/// Samples per gradient work unit. Fixed so the summation order, and hence
/// the trained weights, do not depend on the number of worker threads.
const GRAD_CHUNK: usize = 16;

/// Tracks the best validation loss and decides when to stop.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records a validation loss; returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            (true, false)
        } else {
            self.stale += 1;
            (false, self.stale >= self.patience)
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub train_samples: usize,
    pub val_samples: usize,
}

#[cfg(feature = "parallel")]
fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(core::ops::Range<usize>) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let count = n.div_ceil(chunk);
    (0..count)
        .into_par_iter()
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    F: Fn(core::ops::Range<usize>) -> T,
{
    let count = n.div_ceil(chunk);
    (0..count)
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .collect()
}

fn batch_gradient(
    model: &TcnModel,
    inputs: &[f64],
    targets: &[f64],
    steps: usize,
    plan: &Plan,
    dropout_key: Option<u64>,
) -> (TcnParams, f64) {
    let q = model.config.output_units;
    let sz = steps * model.config.input_channels;
    let n = targets.len() / q;
    let norm = targets.len();
    let parts = map_chunks(n, GRAD_CHUNK, |r| {
        let mut g = model.params.zeros_like();
        let loss = model.accumulate(
            &inputs[r.start * sz..r.end * sz],
            &targets[r.start * q..r.end * q],
            steps,
            norm,
            plan,
            &mut g,
            dropout_key.map(|k| (k, r.start as u64)),
        );
        (g, loss)
    });
    let mut it = parts.into_iter();
    let (mut grad, mut loss) = it.next().expect("non-empty batch");
    for (g, l) in it {
        grad.add_assign(&g);
        loss += l;
    }
    (grad, loss)
}

fn dropout_key(seed: u64, epoch: usize, batch: usize) -> u64 {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(epoch as u64 + 1));
    rng.set_stream(2 + batch as u64);
    rng.next_u64()
}

/// Predictions for every sample, B x P.
pub fn predict(model: &TcnModel, data: &Supervised) -> CoreResult<Vec<f64>> {
    let sz = data.steps * data.channels;
    let parts = map_chunks(data.len(), 256, |r| {
        model.forward(&data.inputs[r.start * sz..r.end * sz], data.steps)
    });
    let mut out = Vec::with_capacity(data.targets.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn gather(data: &Supervised, idx: &[usize], inputs: &mut Vec<f64>, targets: &mut Vec<f64>) {
    inputs.clear();
    targets.clear();
    for &i in idx {
        inputs.extend_from_slice(data.input(i));
        targets.extend_from_slice(data.target(i));
    }
}

fn mse(model: &TcnModel, data: &Supervised, idx: &[usize]) -> CoreResult<f64> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    gather(data, idx, &mut x, &mut y);
    let sub = Supervised {
        steps: data.steps,
        channels: data.channels,
        inputs: x,
        targets: y,
    };
    let pred = predict(model, &sub)?;
    let n = pred.len().max(1) as f64;
    Ok(pred
        .iter()
        .zip(&sub.targets)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

pub fn train(model: &mut TcnModel, data: &Supervised) -> CoreResult<TrainSummary> {
    train_with(model, data, |_| {})
}

/// Trains in place, restoring the weights with the lowest validation loss.
/// `observer` is called after every epoch.
pub fn train_with<F: FnMut(&EpochRecord)>(
    model: &mut TcnModel,
    data: &Supervised,
    mut observer: F,
) -> CoreResult<TrainSummary> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if data.channels != cfg.input_channels || data.channels != cfg.output_units {
        return Err(CoreError::shape(
            format!("{} channels", cfg.input_channels),
            format!("{} channels", data.channels),
        ));
    }
    let n = data.len();
    if n < 2 {
        return Err(CoreError::EmptyData(format!(
            "need at least 2 training samples, got {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = (libm::floor(cfg.validation_fraction * n as f64) as usize).clamp(1, n - 1);
    let val_idx = order.split_off(n - n_val);
    let mut train_idx = order;

    let plan = model.plan(data.steps);
    let mut opt = Adam::new(cfg.learning_rate, model.params.num_params());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params.clone();
    let mut epochs_run = 0;
    let mut stopped_early = false;
    let (mut xb, mut yb) = (Vec::new(), Vec::new());
    model.history.clear();

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (bi, idx) in train_idx.chunks(cfg.batch_size).enumerate() {
            gather(data, idx, &mut xb, &mut yb);
            let key = (cfg.dropout > 0.0).then(|| dropout_key(cfg.seed, epoch, bi));
            let (grad, loss) = batch_gradient(model, &xb, &yb, data.steps, &plan, key);
            if !loss.is_finite() {
                return Err(CoreError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    loss,
                });
            }
            opt.step(&mut model.params, &grad);
            loss_sum += loss * idx.len() as f64;
        }
        let val_loss = mse(model, data, &val_idx)?;
        if !val_loss.is_finite() {
            return Err(CoreError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                loss: val_loss,
            });
        }
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            val_loss,
        };
        model.history.push(rec);
        observer(&rec);
        epochs_run += 1;

        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            best_params.clone_from(&model.params);
        }
        if stop {
            stopped_early = true;
            break;
        }
    }
    model.params = best_params;
    let (best_epoch, best_val_loss) = stopper.best();
    Ok(TrainSummary {
        epochs_run,
        best_epoch,
        best_val_loss,
        stopped_early,
        train_samples: train_idx.len(),
        val_samples: val_idx.len(),
    })
}
