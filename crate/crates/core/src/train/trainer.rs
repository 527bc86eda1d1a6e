use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ModelGraph, ModelKind, UNetConfig};
use crate::ops::softmax_cross_entropy;
use crate::tensor::Rng;
use crate::Scalar;

use super::metrics::{argmax, ConfusionMatrix, MetricsRow};
use super::optim::{Adam, Optimizer, OptimizerKind, Sgd};

/// RNG stream used for parameter initialization.
pub const INIT_STREAM: u64 = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub unet: UNetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            model: ModelKind::UNet,
            unet: UNetConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        self.unet.validate()
    }

    pub fn build_optimizer<T: Scalar>(&self) -> Box<dyn Optimizer<T>> {
        match self.optimizer {
            OptimizerKind::Sgd => Box::new(Sgd { lr: self.learning_rate }),
            OptimizerKind::Adam => Box::new(Adam::new(self.learning_rate, self.beta1, self.beta2, self.eps)),
        }
    }

    /// Freshly initialized model for this configuration.
    pub fn build_model<T: Scalar>(&self) -> Result<ModelGraph<T>> {
        ModelGraph::build(self.model, &self.unet, &mut Rng::with_stream(self.seed, INIT_STREAM))
    }
}

/// Metrics of both splits after one epoch. `epoch` counts from 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: MetricsRow,
    pub validation: MetricsRow,
}

pub type History = Vec<EpochMetrics>;

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub metrics: MetricsRow,
    pub confusion: ConfusionMatrix,
    /// `[n, classes]` softmax probabilities in dataset order.
    pub probabilities: Vec<f64>,
    pub labels: Vec<usize>,
}

/// Frozen-weight pass over `data` in dataset order. The loss is the mean
/// per-sample cross-entropy; predictions are the arg-max probability.
pub fn evaluate<T: Scalar>(model: &ModelGraph<T>, data: &Dataset, batch_size: usize) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate an empty split".into()));
    }
    let classes = model.num_classes();
    let mut cm = ConfusionMatrix::new(classes);
    let mut probabilities = Vec::with_capacity(data.len() * classes);
    let mut labels = Vec::with_capacity(data.len());
    let mut loss_sum = 0.0;
    for batch in data.sequential_batches::<T>(batch_size)? {
        let batch = batch?;
        let logits = model.infer(&batch.images)?;
        let ce = softmax_cross_entropy(&logits, &batch.labels)?;
        if !ce.loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite evaluation loss on batch starting at sample {}", batch.indices[0])));
        }
        loss_sum += ce.loss * batch.labels.len() as f64;
        for (row, &label) in ce.probs.data().chunks_exact(classes).zip(&batch.labels) {
            cm.record(label, argmax(row))?;
            probabilities.extend(row.iter().map(|p| p.as_f64()));
        }
        labels.extend_from_slice(&batch.labels);
    }
    let loss = loss_sum / data.len() as f64;
    let metrics = MetricsRow::compute(loss, &cm, &probabilities, &labels)?;
    Ok(Evaluation { metrics, confusion: cm, probabilities, labels })
}

/// Epoch-at-a-time training driver.
pub struct Trainer<T: Scalar> {
    model: ModelGraph<T>,
    optimizer: Box<dyn Optimizer<T>>,
    cfg: TrainConfig,
    epochs_done: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: ModelGraph<T>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let optimizer = cfg.build_optimizer();
        Ok(Self { model, optimizer, cfg, epochs_done: 0 })
    }

    pub fn model(&self) -> &ModelGraph<T> {
        &self.model
    }

    pub fn into_model(self) -> ModelGraph<T> {
        self.model
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// One pass of forward, loss, backward and optimizer step over shuffled
    /// training batches. Returns the sample-weighted mean training loss seen
    /// during the pass.
    pub fn fit_epoch(&mut self, train: &Dataset) -> Result<f64> {
        let epoch = self.epochs_done;
        let mut loss_sum = 0.0;
        for (b, batch) in train
            .shuffled_batches::<T>(self.cfg.batch_size, self.cfg.seed, epoch as u64)?
            .enumerate()
        {
            let batch = batch?;
            let (logits, tape) = self.model.forward(&batch.images)?;
            let ce = softmax_cross_entropy(&logits, &batch.labels)?;
            if !ce.loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss at epoch {}, batch {}", epoch + 1, b + 1)));
            }
            loss_sum += ce.loss * batch.labels.len() as f64;
            let grads = self.model.backward(tape, &ce.grad_logits)?;
            let opt = &mut self.optimizer;
            self.model
                .update(|params| opt.step(params, &grads))
                .map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("epoch {}, batch {}: {m}", epoch + 1, b + 1)),
                    other => other,
                })?;
        }
        self.epochs_done += 1;
        Ok(loss_sum / train.len() as f64)
    }

    /// Trains one epoch, then evaluates both splits with frozen weights.
    pub fn run_epoch(&mut self, train: &Dataset, validation: &Dataset) -> Result<EpochMetrics> {
        self.fit_epoch(train)?;
        let bs = self.cfg.batch_size;
        let epoch = self.epochs_done;
        let eval = |data: &Dataset, split: &str| {
            evaluate(&self.model, data, bs).map(|e| e.metrics).map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("epoch {epoch}, {split} evaluation: {m}")),
                other => other,
            })
        };
        Ok(EpochMetrics { epoch, train: eval(train, "train")?, validation: eval(validation, "validation")? })
    }
}

/// Runs `cfg.epochs` epochs and returns the trained model with one history
/// row per epoch.
pub fn train<T: Scalar>(
    model: ModelGraph<T>,
    train_set: &Dataset,
    validation: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ModelGraph<T>, History)> {
    if cfg.epochs > 0 && (train_set.is_empty() || validation.is_empty()) {
        return Err(Error::Data("training needs non-empty train and validation splits".into()));
    }
    let mut trainer = Trainer::new(model, cfg.clone())?;
    let mut history = History::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        history.push(trainer.run_epoch(train_set, validation)?);
    }
    Ok((trainer.into_model(), history))
}
