use ndarray::{Array2, Axis, NdFloat, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{Dropout, ForwardOptions, Network};
use super::{input_dim, target, ModelError, ModelState, TrainConfig, INFER_CHUNK};
use crate::signature::Signature;
use crate::trackio::Label;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam moments for every trainable tensor of a [`Network`].
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub step: u64,
}

impl Adam {
    pub fn new(net: &Network<f32>) -> Adam {
        let zeros: Vec<Vec<f32>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Adam {
            v: zeros.clone(),
            m: zeros,
            step: 0,
        }
    }

    pub fn update(&mut self, net: &mut Network<f32>, grads: &Network<f32>, learning_rate: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let (b1, b2) = (ADAM_BETA1 as f32, ADAM_BETA2 as f32);
        for (((p, g), m), v) in net
            .params_mut()
            .into_iter()
            .zip(grads.params())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m as f64 / c1;
                let v_hat = *v as f64 / c2;
                *p -= (learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON)) as f32;
            }
        }
    }
}

/// Mean binary cross-entropy over all output nodes and its gradient with
/// respect to the logits, `(σ(z) − y) / (2B)` for two nodes.
pub(crate) fn bce_with_logits<T: NdFloat>(logits: &Array2<T>, y: &Array2<T>) -> (f64, Array2<T>) {
    let count = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    Zip::from(&mut grad).and(logits).and(y).for_each(|g, &z, &t| {
        let (z, t) = (z.to_f64().unwrap(), t.to_f64().unwrap());
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        *g = T::from((super::sigmoid(z) - t) / count).unwrap();
    });
    (loss / count, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches.
    pub train_loss: f64,
    /// Inference-mode accuracy on the training set.
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean mini-batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub validations: Vec<ValidationMetrics>,
}

#[derive(Debug)]
pub struct Trained {
    pub model: ModelState,
    pub report: TrainReport,
}

/// Mini-batch boundaries; a trailing batch of one is folded into the
/// previous batch so batch statistics stay defined.
fn batch_bounds(n: usize, batch_size: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n)
        .step_by(batch_size)
        .map(|a| (a, (a + batch_size).min(n)))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|(a, b)| b - a == 1) {
        let (_, end) = out.pop().unwrap();
        out.last_mut().unwrap().1 = end;
    }
    out
}

struct Dataset {
    x: Array2<f32>,
    y: Array2<f32>,
}

impl Dataset {
    fn new(model: &ModelState, sigs: &[Signature]) -> Result<Dataset, ModelError> {
        let refs: Vec<&Signature> = sigs.iter().collect();
        let x = model.stack(&refs)?;
        let mut y = Array2::zeros((sigs.len(), 2));
        for (mut row, sig) in y.rows_mut().into_iter().zip(sigs) {
            let t = target(sig.label).ok_or_else(|| ModelError::Unlabeled(sig.video_id.clone()))?;
            row[0] = t[0];
            row[1] = t[1];
        }
        Ok(Dataset { x, y })
    }

    /// Inference-mode loss and accuracy.
    fn evaluate(&self, model: &ModelState) -> (f64, f64) {
        let n = self.x.nrows();
        let mut loss = 0.0;
        let mut correct = 0usize;
        for start in (0..n).step_by(INFER_CHUNK) {
            let end = (start + INFER_CHUNK).min(n);
            let xb = self.x.slice(ndarray::s![start..end, ..]);
            let yb = self.y.slice(ndarray::s![start..end, ..]).to_owned();
            let opts = ForwardOptions {
                batch_stats: false,
                dropout: None,
                leaky_slope: model.config.leaky_slope,
            };
            let (logits, _) = model.net.forward(xb, opts);
            loss += bce_with_logits(&logits, &yb).0 * (end - start) as f64;
            for (z, t) in logits.rows().into_iter().zip(yb.rows()) {
                let says_fake = z[1] > z[0];
                correct += usize::from(says_fake == (t[1] > 0.5));
            }
        }
        (loss / n as f64, correct as f64 / n as f64)
    }
}

pub fn train(dataset: &[Signature], cfg: &TrainConfig) -> Result<Trained, ModelError> {
    train_with_validation(dataset, &[], cfg)
}

/// Trains from scratch; when `validation` is non-empty its loss and accuracy
/// are recorded every `cfg.validate_every` epochs and after the last epoch.
pub fn train_with_validation(
    dataset: &[Signature],
    validation: &[Signature],
    cfg: &TrainConfig,
) -> Result<Trained, ModelError> {
    cfg.validate()?;
    let omega = dataset.first().ok_or(ModelError::EmptyDataset)?.omega;
    if let Some(odd) = dataset.iter().chain(validation).find(|s| s.omega != omega) {
        return Err(ModelError::MixedOmega(omega, odd.omega));
    }
    if omega != cfg.omega {
        return Err(ModelError::ShapeMismatch {
            expected: cfg.omega,
            found: omega,
        });
    }
    let has = |l: Label| dataset.iter().any(|s| s.label == l);
    if let Some(sig) = dataset.iter().chain(validation).find(|s| s.label == Label::Unknown) {
        return Err(ModelError::Unlabeled(sig.video_id.clone()));
    }
    if !(has(Label::Real) && has(Label::Fake)) {
        return Err(ModelError::SingleClassDataset);
    }

    let mut model = ModelState::new(cfg)?;
    debug_assert_eq!(model.net.input_dim(), input_dim(omega));
    let train_set = Dataset::new(&model, dataset)?;
    let val_set = if validation.is_empty() {
        None
    } else {
        Some(Dataset::new(&model, validation)?)
    };

    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut model.rng);
        let mut loss_sum = 0.0;
        for (a, b) in batch_bounds(n, cfg.batch_size) {
            let idx = &order[a..b];
            let xb = train_set.x.select(Axis(0), idx);
            let yb = train_set.y.select(Axis(0), idx);
            let opts = ForwardOptions {
                batch_stats: true,
                dropout: (cfg.dropout_p > 0.0).then_some(Dropout {
                    p: cfg.dropout_p,
                    rng: &mut model.rng,
                }),
                leaky_slope: cfg.leaky_slope,
            };
            let (logits, cache) = model.net.forward(xb.view(), opts);
            let (loss, dlogits) = bce_with_logits(&logits, &yb);
            let grads = model.net.backward(&cache, &dlogits);
            if let Some(stats) = &cache.stats {
                for (bn, s) in model.net.batch_norms_mut().into_iter().zip(stats) {
                    bn.update_running(s);
                }
            }
            model.optimizer.update(&mut model.net, &grads, cfg.learning_rate);
            loss_sum += loss * (b - a) as f64;
        }
        let epoch_loss = loss_sum / n as f64;
        report.epoch_loss.push(epoch_loss);

        if epoch % cfg.validate_every == 0 || epoch == cfg.epochs {
            let (_, train_accuracy) = train_set.evaluate(&model);
            let val = val_set.as_ref().map(|v| v.evaluate(&model));
            log::info!(
                "epoch {epoch}: loss {epoch_loss:.5}, train acc {train_accuracy:.4}{}",
                val.map_or(String::new(), |(l, a)| format!(", val loss {l:.5}, val acc {a:.4}"))
            );
            report.validations.push(ValidationMetrics {
                epoch,
                train_loss: epoch_loss,
                train_accuracy,
                val_loss: val.map(|v| v.0),
                val_accuracy: val.map(|v| v.1),
            });
        }
    }
    Ok(Trained { model, report })
}
