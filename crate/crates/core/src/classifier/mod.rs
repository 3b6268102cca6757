//! Sequence classifier: a small dense network over flattened signatures,
//! trained with Adam on per-node sigmoid cross-entropy.

mod gradcheck;
mod io;
pub mod network;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::signature::{Signature, CHANNELS, DEFAULT_OMEGA, ROWS};
use crate::trackio::Label;
use network::{Dropout, ForwardOptions, Network};

pub use gradcheck::{gradient_check, gradient_check_with, GradCheckOptions, GradCheckReport};
pub use io::{load_model, read_model_from, save_model, write_model_to, MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, train_with_validation, Adam, Trained, TrainReport, ValidationMetrics};

/// Added to the normalizer of [`p_fake`].
pub const P_FAKE_EPSILON: f64 = 1e-12;
/// Sequences per inference batch.
const INFER_CHUNK: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("signature has omega {found}, model expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("training data contains a single class")]
    SingleClassDataset,
    #[error("training data mixes omega {0} and {1}")]
    MixedOmega(usize, usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("signature of {0} has no label")]
    Unlabeled(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad model file magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported model file version {0}")]
    VersionMismatch(u16),
    #[error("malformed model file: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validate_every: usize,
    pub dropout_p: f64,
    pub leaky_slope: f64,
    pub seed: u64,
    pub omega: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 100,
            validate_every: 10,
            dropout_p: 0.3,
            leaky_slope: 0.2,
            seed: 0,
            omega: DEFAULT_OMEGA,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.validate_every == 0 {
            return bad("validate_every must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky_slope must be finite");
        }
        if self.omega < 2 {
            return bad("omega must be at least 2");
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("invalid value '{v}' for {key}"))
        }
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "validate_every" => self.validate_every = num(key, value)?,
            "dropout_p" => self.dropout_p = num(key, value)?,
            "leaky_slope" => self.leaky_slope = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "omega" => self.omega = num(key, value)?,
            _ => return Err(format!("unknown training key '{key}'")),
        }
        Ok(())
    }
}

/// `key = value` lines, one per field.
impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "learning_rate = {}", self.learning_rate)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "epochs = {}", self.epochs)?;
        writeln!(f, "validate_every = {}", self.validate_every)?;
        writeln!(f, "dropout_p = {}", self.dropout_p)?;
        writeln!(f, "leaky_slope = {}", self.leaky_slope)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "omega = {}", self.omega)
    }
}

impl FromStr for TrainConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cfg = TrainConfig::default();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("expected key = value, got '{line}'"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout.
    Train,
    /// Running statistics, no dropout.
    Infer,
}

pub fn input_dim(omega: usize) -> usize {
    ROWS * omega * CHANNELS
}

/// Stream of the model rng, kept apart from the weight-init stream.
const TRAIN_STREAM: u64 = 1;

fn train_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRAIN_STREAM);
    rng
}

/// A network plus everything needed to continue or reproduce training.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub omega: usize,
    pub seed: u64,
    pub config: TrainConfig,
    pub net: Network<f32>,
    pub optimizer: Adam,
    rng: ChaCha8Rng,
}

impl ModelState {
    /// A freshly initialized model for `cfg.omega`, with weights drawn from
    /// `cfg.seed`.
    pub fn new(cfg: &TrainConfig) -> Result<ModelState, ModelError> {
        cfg.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = Network::init(input_dim(cfg.omega), &mut init);
        Ok(Self::from_parts(cfg.clone(), net))
    }

    pub(crate) fn from_parts(config: TrainConfig, net: Network<f32>) -> ModelState {
        ModelState {
            omega: config.omega,
            seed: config.seed,
            optimizer: Adam::new(&net),
            rng: train_rng(config.seed),
            config,
            net,
        }
    }

    /// Rewinds the dropout and shuffling rng to its post-initialization state.
    pub fn reset_rng(&mut self) {
        self.rng = train_rng(self.seed);
    }

    fn check(&self, sig: &Signature) -> Result<(), ModelError> {
        if sig.omega != self.omega || sig.tensor.len() != input_dim(self.omega) {
            return Err(ModelError::ShapeMismatch {
                expected: self.omega,
                found: sig.omega,
            });
        }
        Ok(())
    }

    pub(crate) fn stack(&self, sigs: &[&Signature]) -> Result<Array2<f32>, ModelError> {
        let dim = input_dim(self.omega);
        let mut x = Array2::zeros((sigs.len(), dim));
        for (mut row, sig) in x.rows_mut().into_iter().zip(sigs) {
            self.check(sig)?;
            row.as_slice_mut().expect("standard layout").copy_from_slice(&sig.tensor);
        }
        Ok(x)
    }

    fn logits(&mut self, x: ArrayView2<f32>, mode: Mode) -> Array2<f32> {
        let slope = self.config.leaky_slope;
        let p = self.config.dropout_p;
        let opts = match mode {
            Mode::Train => ForwardOptions {
                batch_stats: true,
                dropout: (p > 0.0).then_some(Dropout { p, rng: &mut self.rng }),
                leaky_slope: slope,
            },
            Mode::Infer => ForwardOptions {
                batch_stats: false,
                dropout: None,
                leaky_slope: slope,
            },
        };
        self.net.forward(x, opts).0
    }

    /// `(s_real, s_fake)` for one signature. Train mode treats the signature
    /// as a batch of one.
    pub fn forward(&mut self, sig: &Signature, mode: Mode) -> Result<(f64, f64), ModelError> {
        Ok(self.forward_batch(&[sig], mode)?[0])
    }

    /// `(s_real, s_fake)` per signature, all in one batch.
    pub fn forward_batch(&mut self, sigs: &[&Signature], mode: Mode) -> Result<Vec<(f64, f64)>, ModelError> {
        let x = self.stack(sigs)?;
        Ok(outputs(&self.logits(x.view(), mode)))
    }

    /// Inference-mode outputs; needs no mutable state.
    pub fn infer(&self, sigs: &[Signature]) -> Result<Vec<(f64, f64)>, ModelError> {
        let mut out = Vec::with_capacity(sigs.len());
        for chunk in sigs.chunks(INFER_CHUNK) {
            let refs: Vec<&Signature> = chunk.iter().collect();
            let x = self.stack(&refs)?;
            let opts = ForwardOptions {
                batch_stats: false,
                dropout: None,
                leaky_slope: self.config.leaky_slope,
            };
            out.extend(outputs(&self.net.forward(x.view(), opts).0));
        }
        Ok(out)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn outputs(logits: &Array2<f32>) -> Vec<(f64, f64)> {
    logits
        .rows()
        .into_iter()
        .map(|r| (sigmoid(r[0] as f64), sigmoid(r[1] as f64)))
        .collect()
}

/// Normalized fake confidence from the two sigmoid outputs.
pub fn p_fake(s_real: f64, s_fake: f64) -> f64 {
    s_fake / (s_real + s_fake + P_FAKE_EPSILON)
}

pub fn predict_sequence(model: &ModelState, sig: &Signature) -> Result<f64, ModelError> {
    Ok(predict_batch(model, std::slice::from_ref(sig))?[0])
}

pub fn predict_batch(model: &ModelState, sigs: &[Signature]) -> Result<Vec<f64>, ModelError> {
    Ok(model.infer(sigs)?.into_iter().map(|(r, f)| p_fake(r, f)).collect())
}

/// One-hot target `(real, fake)`.
pub(crate) fn target(label: Label) -> Option<[f32; 2]> {
    match label {
        Label::Real => Some([1.0, 0.0]),
        Label::Fake => Some([0.0, 1.0]),
        Label::Unknown => None,
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::*;
    use rand::Rng;

    /// Signatures whose first temporal row carries a class-dependent level
    /// and everything else is noise.
    pub fn separable(per_class: usize, omega: usize, seed: u64) -> Vec<Signature> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..per_class * 2 {
            let label = if i % 2 == 0 { Label::Real } else { Label::Fake };
            let mut sig = Signature::zeros(omega, format!("v{}", i / 2), label);
            let level = if label == Label::Real { 0.25 } else { 0.75 };
            for (k, v) in sig.tensor.iter_mut().enumerate() {
                *v = if k < omega * CHANNELS {
                    level + rng.random_range(-0.1f32..0.1)
                } else {
                    rng.random_range(0.0f32..0.9)
                };
            }
            out.push(sig);
        }
        out
    }
}
