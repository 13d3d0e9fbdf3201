//! Mini-batch training loop and model files.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::{s, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{init_params, loss_and_gradients, predict_batch, LstmConfig, LstmParams, ParamsDoc};
use crate::series::{Normalizer, SplitDataset, WindowedDataset};

pub const FORMAT_VERSION: u32 = 1;

/// Largest number of windows pushed through the network at once when only
/// predictions are needed.
pub(crate) const PREDICT_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub shuffle_seed: u64,
    pub hidden_dim: usize,
    pub lookback: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            shuffle_seed: 0,
            hidden_dim: 64,
            lookback: 40,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(Error::InvalidArgument(
                    "adam needs betas in [0, 1) and epsilon > 0".into(),
                ));
            }
        }
        self.lstm_config().validate()
    }

    pub fn lstm_config(&self) -> LstmConfig {
        LstmConfig::new(self.hidden_dim, self.lookback)
    }
}

/// Optimizer with its running state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    step: i32,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, learning_rate: f64, params: &LstmParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        OptimizerState {
            kind,
            learning_rate,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// Applies one update in place.
    pub fn apply(&mut self, params: &mut LstmParams, grads: &LstmParams) {
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                    for (p, g) in p.iter_mut().zip(g) {
                        *p -= lr * g;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let bc1 = 1.0 - beta1.powi(self.step);
                let bc2 = 1.0 - beta2.powi(self.step);
                let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
                for ((p, g), (m, v)) in tensors.zip(self.first_moment.iter_mut().zip(&mut self.second_moment)) {
                    for k in 0..p.len() {
                        m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                        v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        p[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-window training loss of each epoch (normalized units).
    pub epoch_losses: Vec<f64>,
    /// Mean squared error on the normalized test windows after training.
    pub test_loss: f64,
    /// Left out of written reports unless timing was requested, so
    /// repeated runs stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    pub config: TrainConfig,
}

/// Everything needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub config: LstmConfig,
    pub params: LstmParams,
    pub normalizer: Normalizer,
    pub provenance: String,
}

impl ModelArtifact {
    pub fn new(
        config: LstmConfig,
        params: LstmParams,
        normalizer: Normalizer,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        config.validate()?;
        params.validate(&config)?;
        normalizer.validate()?;
        Ok(ModelArtifact {
            format_version: FORMAT_VERSION,
            config,
            params,
            normalizer,
            provenance: provenance.into(),
        })
    }
}

/// Mean squared error of `params` over a (normalized) window set.
pub fn dataset_loss(params: &LstmParams, data: &WindowedDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut sum = 0.0;
    for start in (0..data.len()).step_by(PREDICT_CHUNK) {
        let end = (start + PREDICT_CHUNK).min(data.len());
        let y = predict_batch(params, data.inputs().slice(s![start..end, .., ..]))?;
        let t = data.targets().slice(s![start..end, ..]);
        sum += (&y - &t).iter().map(|e| e * e).sum::<f64>();
    }
    Ok(sum / (data.len() * data.targets().ncols()) as f64)
}

/// Trains a fresh network on `split.train` and scores it on `split.test`.
///
/// The normalizer is fitted on the training segment only. Windows are
/// reshuffled every epoch from `(config.shuffle_seed, epoch)`; `seed` drives
/// weight initialization.
pub fn train(split: &SplitDataset, config: &TrainConfig, seed: u64) -> Result<(ModelArtifact, TrainReport)> {
    config.validate()?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::InvalidArgument("train and test sets must be non-empty".into()));
    }
    if split.train.lookback() != config.lookback || split.test.lookback() != config.lookback {
        return Err(Error::ShapeMismatch(format!(
            "dataset lookback {} differs from configured lookback {}",
            split.train.lookback(),
            config.lookback
        )));
    }
    let started = Instant::now();
    let lstm_config = config.lstm_config();
    let normalizer = Normalizer::fit(&split.training_samples())?;
    let train_set = split.train.normalized(&normalizer);
    let test_set = split.test.normalized(&normalizer);

    let mut params = init_params(&lstm_config, seed);
    let mut optimizer = OptimizerState::new(config.optimizer, config.learning_rate, &params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let inputs = train_set.inputs().select(Axis(0), idx);
            let targets = train_set.targets().select(Axis(0), idx);
            let (loss, grads) = loss_and_gradients(&params, inputs.view(), targets.view())?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            optimizer.apply(&mut params, &grads);
            total += loss * idx.len() as f64;
        }
        epoch_losses.push(total / train_set.len() as f64);
    }
    if !params.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs - 1,
            batch: order.len().div_ceil(config.batch_size) - 1,
        });
    }

    let test_loss = dataset_loss(&params, &test_set)?;
    let provenance = format!(
        "init_seed={seed}; train_config={}",
        serde_json::to_string(config).expect("config serializes")
    );
    let artifact = ModelArtifact::new(lstm_config, params, normalizer, provenance)?;
    let report = TrainReport {
        epoch_losses,
        test_loss,
        wall_time_seconds: Some(started.elapsed().as_secs_f64()),
        config: *config,
    };
    Ok((artifact, report))
}

#[derive(Serialize, Deserialize)]
struct ArtifactDoc {
    format_version: u32,
    config: LstmConfig,
    normalizer: Normalizer,
    params: ParamsDoc,
    provenance: String,
}

pub fn model_to_json(artifact: &ModelArtifact) -> String {
    let doc = ArtifactDoc {
        format_version: artifact.format_version,
        config: artifact.config,
        normalizer: artifact.normalizer,
        params: artifact.params.to_doc(),
        provenance: artifact.provenance.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("artifact serializes")
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    let mut text = model_to_json(artifact);
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text).map_err(|e| match e {
        Error::Malformed { reason, .. } => Error::malformed(path, reason),
        other => other,
    })
}

/// Parses a model document. Errors are distinct for an unknown version,
/// inconsistent shapes and anything that is not a model document at all.
pub fn model_from_json(text: &str) -> Result<ModelArtifact> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::malformed("<model>", e))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::malformed("<model>", "missing format_version"))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::UnknownVersion {
            found: version.min(u32::MAX as u64) as u32,
            supported: FORMAT_VERSION,
        });
    }
    let doc: ArtifactDoc = serde_json::from_value(value).map_err(|e| Error::malformed("<model>", e))?;
    doc.config.validate().map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let params = LstmParams::from_doc(&doc.params, &doc.config).map_err(Error::ShapeMismatch)?;
    ModelArtifact::new(doc.config, params, doc.normalizer, doc.provenance)
}
