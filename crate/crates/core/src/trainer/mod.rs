//! Optimization loop, accuracy metrics, gradient checking and the hidden
//! size sweep.

mod gradcheck;
mod optim;
mod sweep;

pub use gradcheck::{grad_check, grad_check_with, CheckKind, GradCheckReport, TensorError};
pub use optim::{clip_global_norm, Optimizer, OptimizerKind, OptimizerState};
pub use sweep::{sweep_h, SweepRow, SweepTable};

use std::io::Write;

use log::info;

use crate::dataset::{batches, split_validation, Labeled};
use crate::error::{Error, Result};
use crate::models::{Classifier, EmbeddedQuestion, ModelKind, Score, Trainable};
use crate::numerics::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// LSTM state size `H`.
    pub hidden: usize,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global-norm gradient clipping threshold; off when `None`.
    pub clip: Option<f64>,
    /// Share of the training data held out for validation; 0 disables it.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            optimizer: OptimizerKind::default(),
            batch_size: 32,
            epochs: 30,
            seed: 42,
            clip: None,
            validation_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("hidden size and batch size must be positive".into()));
        }
        let lr = self.optimizer.learning_rate();
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be finite and non-negative, got {lr}")));
        }
        if let Some(c) = self.clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidArgument(format!("clip threshold must be positive, got {c}")));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Fraction of correct predictions, per head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub main: f64,
    pub sub: Option<f64>,
}

impl Accuracy {
    fn from_score(s: Score) -> Self {
        Self {
            main: s.main_correct as f64 / s.main_total.max(1) as f64,
            sub: (s.sub_total > 0).then(|| s.sub_correct as f64 / s.sub_total as f64),
        }
    }
}

/// Percent with two decimals, e.g. `89.80%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example loss over the epoch's updates.
    pub train_loss: f64,
    pub train: Accuracy,
    pub test: Option<Accuracy>,
    pub validation: Option<Accuracy>,
}

pub const EPOCH_CSV_HEADER: &str = "epoch,train_loss,train_main_acc,train_sub_acc,test_main_acc,test_sub_acc";

/// Writes records as `epoch,train_loss,train_main_acc,train_sub_acc,test_main_acc,test_sub_acc`;
/// missing values are empty fields.
pub fn write_epoch_csv<W: Write>(records: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    writeln!(out, "{EPOCH_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.6},{:.6},{},{},{}",
            r.epoch,
            r.train_loss,
            r.train.main,
            opt(r.train.sub),
            opt(r.test.map(|a| a.main)),
            opt(r.test.and_then(|a| a.sub)),
        )?;
    }
    Ok(())
}

/// Accuracy of argmax predictions over `data`.
pub fn evaluate<T: Scalar, M: Trainable<T>>(model: &M, data: &[M::Example]) -> Result<Accuracy> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty set".into()));
    }
    let mut total = Score::default();
    for ex in data {
        total = total.merge(model.score(ex)?);
    }
    Ok(Accuracy::from_score(total))
}

/// Minibatch training. Each batch's gradient is the mean of its examples'
/// gradients; batches are reshuffled every epoch from a generator seeded by
/// `config.seed`.
pub fn train<T, M>(
    mut model: M,
    train_data: &[M::Example],
    test_data: Option<&[M::Example]>,
    config: &TrainConfig,
) -> Result<(M, Vec<EpochRecord>)>
where
    T: Scalar,
    M: Trainable<T>,
    M::Example: Clone + Labeled,
{
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut rng = Rng::seed_from_u64(Rng::derive_seed(config.seed, 1));
    let (fit, val) = if config.validation_fraction > 0.0 {
        let (a, b) = split_validation(train_data, config.validation_fraction, &mut rng)?;
        (a, Some(b))
    } else {
        (train_data.to_vec(), None)
    };
    train_loop(&mut model, &fit, val.as_deref(), test_data, config, &mut rng).map(|records| (model, records))
}

/// As [`train`] for examples without class labels (no validation split).
pub fn train_unlabeled<T, M>(
    mut model: M,
    train_data: &[M::Example],
    test_data: Option<&[M::Example]>,
    config: &TrainConfig,
) -> Result<(M, Vec<EpochRecord>)>
where
    T: Scalar,
    M: Trainable<T>,
{
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if config.validation_fraction > 0.0 {
        return Err(Error::InvalidArgument("validation split needs labeled examples".into()));
    }
    let mut rng = Rng::seed_from_u64(Rng::derive_seed(config.seed, 1));
    train_loop(&mut model, train_data, None, test_data, config, &mut rng).map(|records| (model, records))
}

fn train_loop<T, M>(
    model: &mut M,
    fit: &[M::Example],
    val: Option<&[M::Example]>,
    test: Option<&[M::Example]>,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<EpochRecord>>
where
    T: Scalar,
    M: Trainable<T>,
{
    let mut optimizer = Optimizer::new(config.optimizer, &*model);
    let mut grads = model.zeros_like();
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut epoch_loss = 0.0;
        for (b, batch) in batches(fit, config.batch_size, rng)?.iter().enumerate() {
            grads.fill_zero();
            let mut batch_loss = T::zero();
            for ex in &batch.items {
                batch_loss += model.accumulate_grad(ex, &mut grads)?;
            }
            let batch_loss = batch_loss.to_f64_lossy();
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b + 1,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            grads.scale_all(T::one() / T::of(batch.len() as f64));
            if let Some(threshold) = config.clip {
                clip_global_norm(&mut grads, threshold);
            }
            optimizer.step(model, &grads)?;
        }
        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / fit.len() as f64,
            train: evaluate(model, fit)?,
            test: test.map(|t| evaluate(model, t)).transpose()?,
            validation: val.map(|v| evaluate(model, v)).transpose()?,
        };
        info!(
            "epoch {epoch}: loss {:.4}, train main {}{}",
            record.train_loss,
            format_percent(record.train.main),
            record.test.map(|a| format!(", test main {}", format_percent(a.main))).unwrap_or_default()
        );
        records.push(record);
    }
    Ok(records)
}

/// Builds a classifier of `kind` seeded from `config.seed` and trains it.
pub fn train_classifier(
    kind: ModelKind,
    config: &TrainConfig,
    num_main: usize,
    num_fine: usize,
    train_data: &[EmbeddedQuestion<f64>],
    test_data: Option<&[EmbeddedQuestion<f64>]>,
) -> Result<(Classifier<f64>, Vec<EpochRecord>)> {
    let input = train_data
        .first()
        .and_then(|e| e.xs.first())
        .map(|x| x.len())
        .ok_or_else(|| Error::InvalidArgument("training set is empty".into()))?;
    let mut rng = Rng::seed_from_u64(config.seed);
    match Classifier::new(kind, config.hidden, input, num_main, num_fine, &mut rng)? {
        Classifier::One(m) => {
            let (m, records) = train(m, train_data, test_data, config)?;
            Ok((Classifier::One(m), records))
        }
        Classifier::Two(m) => {
            let (m, records) = train(m, train_data, test_data, config)?;
            Ok((Classifier::Two(m), records))
        }
    }
}

#[cfg(test)]
mod tests;
