//! Teacher-forced training on oracle scripts. Logic masks are off: the loss
//! is the negative log-likelihood of each oracle choice under the unmasked
//! provider and decider distributions.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use editrepair_core::oracle::{extract_oracle, is_validation, PatchPair, TrainingExample, Vocabulary};
use editrepair_model::layers::Dropout;
use editrepair_model::{Model, ModelError, Prepared};
use editrepair_tensor::{Adam, Gradients, Graph, Scalar, TensorError};

use crate::config::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no training examples survived oracle extraction")]
    Empty,
    #[error("training diverged at step {step}: loss {loss}, gradient norm {norm}")]
    Diverged { step: u64, loss: f64, norm: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Oracle examples with their network inputs.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub examples: Vec<TrainingExample>,
    pub prepared: Vec<Prepared>,
    /// Rejected pairs by reason.
    pub rejected: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn build<T: Scalar>(model: &Model<T>, pairs: &[PatchPair]) -> Self {
        let mut d = Dataset::default();
        for p in pairs {
            match extract_oracle(&model.eg, p, true) {
                Ok(ex) => match model.prepare_example(&ex) {
                    Ok(prep) => {
                        d.examples.push(ex);
                        d.prepared.push(prep);
                    }
                    Err(e) => *d.rejected.entry(format!("prepare: {e}")).or_default() += 1,
                },
                Err(r) => *d.rejected.entry(r.label().to_string()).or_default() += 1,
            }
        }
        d
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub steps: u64,
    /// Mean per-example NLL over the epoch's batches (dropout on).
    pub train_nll: f64,
    /// Mean per-example NLL on the validation split (dropout off).
    pub val_nll: Option<f64>,
}

/// Adam over mini-batches with optional gradient clipping.
pub struct Trainer<T: Scalar> {
    pub model: Model<T>,
    pub config: TrainConfig,
    adam: Adam,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: Model<T>, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate().map_err(TrainError::Config)?;
        Ok(Self {
            adam: Adam::new(config.learning_rate()),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed),
            model,
            config,
        })
    }

    pub fn steps(&self) -> u64 {
        self.adam.steps_taken()
    }

    /// One update on the mean loss of `batch`; returns that mean.
    pub fn step(&mut self, batch: &[&Prepared]) -> Result<f64, TrainError> {
        let mut total = Gradients::zeros_like(&self.model.params);
        let mut loss = 0.0;
        for ex in batch {
            let mut g = Graph::new(&self.model.params);
            let mut drop = Dropout {
                rate: self.config.dropout,
                rng: Some(&mut self.rng),
            };
            let l = self.model.loss(&mut g, ex, &mut drop)?;
            loss += g.scalar(l).as_f64();
            total.merge(&g.backward(l)?);
        }
        let n = batch.len().max(1) as f64;
        loss /= n;
        total.scale(T::from_f64_lossy(1.0 / n));
        let norm = total.global_norm();
        if !loss.is_finite() || !norm.is_finite() {
            return Err(TrainError::Diverged {
                step: self.steps() + 1,
                loss,
                norm,
            });
        }
        if self.config.clip_norm > 0.0 && norm > self.config.clip_norm {
            total.scale(T::from_f64_lossy(self.config.clip_norm / norm));
        }
        self.adam.step(&mut self.model.params, &total);
        Ok(loss)
    }

    /// One shuffled pass over `data`; returns the mean batch loss.
    pub fn epoch(&mut self, data: &[Prepared]) -> Result<f64, TrainError> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&Prepared> = chunk.iter().map(|i| &data[*i]).collect();
            sum += self.step(&batch)?;
            batches += 1;
        }
        Ok(sum / batches.max(1) as f64)
    }
}

/// Mean per-example NLL with dropout off.
pub fn mean_nll<T: Scalar>(model: &Model<T>, data: &[Prepared]) -> Result<f64, TensorError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for ex in data {
        s += model.nll(ex)?;
    }
    Ok(s / data.len() as f64)
}

pub struct TrainOutcome {
    pub model: Model<f32>,
    pub metrics: Vec<EpochMetrics>,
    pub train: Dataset,
    pub val: Dataset,
}

/// Splits `pairs` by id hash, builds the vocabulary from the training side
/// and trains for `config.epochs`. With `out`, writes `last.ckpt` after
/// every epoch, `best.ckpt` at the lowest validation NLL and
/// `metrics.json`.
pub fn train(
    pairs: &[PatchPair],
    config: &TrainConfig,
    out: Option<&Path>,
    mut log: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    config.validate().map_err(TrainError::Config)?;
    let (val_pairs, train_pairs): (Vec<PatchPair>, Vec<PatchPair>) =
        pairs.iter().cloned().partition(|p| is_validation(&p.id));
    let vocabulary = Vocabulary::from_pairs(&train_pairs, config.threshold);
    let model = Model::<f32>::new(config.model_config(), vocabulary, config.seed)?;
    let train = Dataset::build(&model, &train_pairs);
    let val = Dataset::build(&model, &val_pairs);
    if train.is_empty() {
        return Err(TrainError::Empty);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(TensorError::from)?;
    }
    let mut trainer = Trainer::new(model, config.clone())?;
    let mut metrics = Vec::new();
    let mut best = f64::INFINITY;
    for epoch in 1..=config.epochs {
        let train_nll = trainer.epoch(&train.prepared)?;
        let val_nll = (!val.is_empty())
            .then(|| mean_nll(&trainer.model, &val.prepared))
            .transpose()?;
        let m = EpochMetrics {
            epoch,
            steps: trainer.steps(),
            train_nll,
            val_nll,
        };
        log(&m);
        if let Some(dir) = out {
            let meta = serde_json::to_value(&m).map_err(TensorError::from)?;
            trainer.model.save(&dir.join("last.ckpt"), meta.clone())?;
            let score = val_nll.unwrap_or(train_nll);
            if score < best {
                best = score;
                trainer.model.save(&dir.join("best.ckpt"), meta)?;
            }
        }
        metrics.push(m);
        if let Some(dir) = out {
            let text = serde_json::to_string_pretty(&metrics).map_err(TensorError::from)?;
            std::fs::write(dir.join("metrics.json"), text).map_err(TensorError::from)?;
        }
    }
    Ok(TrainOutcome {
        model: trainer.model,
        metrics,
        train,
        val,
    })
}
