//! Training: SGD with classical momentum, cross-entropy objective, seeded
//! epoch loop with best-checkpoint retention.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::stack_batch;
use crate::data::SampleSource;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::Model;
use crate::nn::Mode;
use crate::tensor::ops::cross_entropy_loss;
use crate::tensor::Tensor;

/// The published optimization recipe: SGD, learning rate 1e-4, momentum
/// 0.9, batch size 8, 200 epochs. The best checkpoint is selected by
/// validation accuracy (ties keep the earlier epoch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            momentum: 0.9,
            batch_size: 8,
            epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Train("learning_rate must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Train("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Train("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Train("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// One classical-momentum update on a flat parameter buffer:
/// `v <- mu*v - lr*g; w <- w + v`. Velocity starts at zero.
pub fn sgd_momentum_step(
    param: &mut [f32],
    grad: &[f32],
    velocity: &mut [f32],
    lr: f32,
    momentum: f32,
) -> Result<()> {
    if param.len() != grad.len() || param.len() != velocity.len() {
        return Err(Error::Shape {
            op: "sgd_momentum_step",
            msg: format!(
                "param/grad/velocity lengths differ: {}/{}/{}",
                param.len(),
                grad.len(),
                velocity.len()
            ),
        });
    }
    for i in 0..param.len() {
        velocity[i] = momentum * velocity[i] - lr * grad[i];
        param[i] += velocity[i];
    }
    Ok(())
}

/// SGD-with-momentum state for a model's parameter list.
pub struct SgdMomentum {
    pub lr: f32,
    pub momentum: f32,
    velocity: Vec<Vec<f32>>,
}

impl SgdMomentum {
    pub fn new(model: &Model, lr: f32, momentum: f32) -> Self {
        let velocity = model.params().iter().map(|p| vec![0.0f32; p.numel()]).collect();
        SgdMomentum { lr, momentum, velocity }
    }

    /// Applies one step from the gradients accumulated on the model's
    /// parameters, consuming them. A parameter without a gradient
    /// contributes a zero gradient.
    pub fn step(&mut self, model: &mut Model) -> Result<()> {
        let grads: Vec<Option<Vec<f32>>> = model.params().iter().map(|p| p.take_grad()).collect();
        let lr = self.lr;
        let momentum = self.momentum;
        let mut idx = 0;
        let mut failure = None;
        model.visit_params_mut(&mut |p: &mut Tensor| {
            if failure.is_some() {
                return;
            }
            let mut data = p.data().to_vec();
            let v = &mut self.velocity[idx];
            let zero;
            let g: &[f32] = match &grads[idx] {
                Some(g) => g,
                None => {
                    zero = vec![0.0f32; data.len()];
                    &zero
                }
            };
            if let Err(e) = sgd_momentum_step(&mut data, g, v, lr, momentum) {
                failure = Some(e);
                return;
            }
            p.replace_data(data);
            idx += 1;
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Per-epoch training record, one JSONL row each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f32,
    pub val_accuracy: Option<f64>,
    pub val_sensitivity: Option<f64>,
    pub val_specificity: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Optimizer steps actually executed.
    pub steps: usize,
}

/// Trains in place. Every epoch: seeded shuffle, augmented batches
/// (partial trailing batches dropped), forward/loss/backward/step; then a
/// deterministic evaluation on the validation set. The model ends at the
/// parameters of the best validation epoch.
pub fn train(
    model: &mut Model,
    train_set: &dyn SampleSource,
    val_set: &dyn SampleSource,
    config: &TrainConfig,
    mut on_epoch: Option<&mut dyn FnMut(&EpochRecord)>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySplit { split: "train".into() });
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit { split: "val".into() });
    }
    if train_set.len() < config.batch_size {
        return Err(Error::Train(format!(
            "train split of {} samples is smaller than one batch of {}",
            train_set.len(),
            config.batch_size
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = SgdMomentum::new(model, config.learning_rate, config.momentum);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Vec<Vec<f32>>)> = None;
    let mut steps = 0usize;
    let started = Instant::now();

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        indices.shuffle(&mut rng);
        let batches = train_set.len() / config.batch_size;
        let mut loss_sum = 0.0f32;
        for b in 0..batches {
            let ids = &indices[b * config.batch_size..(b + 1) * config.batch_size];
            let images: Vec<Tensor> = ids
                .iter()
                .map(|&i| train_set.image(i, epoch, true))
                .collect::<Result<_>>()?;
            let labels: Vec<usize> = ids.iter().map(|&i| train_set.label(i)).collect();
            let batch = stack_batch(&images)?;
            let logits = model.forward_logits(&batch, Mode::Train)?;
            let loss = cross_entropy_loss(&logits, &labels)?;
            let loss_value = loss.item();
            if !loss_value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: loss_value,
                });
            }
            loss.backward()?;
            drop(loss);
            drop(logits);
            optimizer.step(model)?;
            steps += 1;
            loss_sum += loss_value;
        }

        let val = evaluate(model, val_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches.max(1) as f32,
            val_accuracy: val.metrics.accuracy,
            val_sensitivity: val.metrics.sensitivity,
            val_specificity: val.metrics.specificity,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        let acc = record.val_accuracy.unwrap_or(0.0);
        if best.as_ref().map(|(_, b, _)| acc > *b).unwrap_or(true) {
            best = Some((epoch, acc, model.state_snapshot()));
        }
        if let Some(cb) = on_epoch.as_deref_mut() {
            cb(&record);
        }
        history.push(record);
    }

    let (best_epoch, best_val_accuracy, snapshot) = best.expect("at least one epoch ran");
    model.load_state(&snapshot)?;
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_accuracy,
        steps,
    })
}

/// Writes history as line-delimited JSON.
pub fn write_history_jsonl(history: &[EpochRecord], mut w: impl Write) -> Result<()> {
    for rec in history {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
