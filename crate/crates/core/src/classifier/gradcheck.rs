//! Finite-difference verification of the analytic backward pass.
//!
//! The check runs on an f64 copy of the network in batch-statistics mode with
//! dropout off. A batch of one would normalize every activation to the BN
//! shift and zero out most gradients, so the given signature is joined by a
//! few jittered copies with alternating targets.
//!
//! Numerical derivatives use the four-point central stencil
//! `(8(f(θ+h) − f(θ−h)) − (f(θ+2h) − f(θ−2h))) / 12h`, whose truncation error
//! is O(h⁴). Probes whose steps flip any leaky-ReLU input sign are skipped.

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{ForwardOptions, Network, PARAM_NAMES};
use super::train::bce_with_logits;
use super::{target, ModelError, ModelState};
use crate::signature::Signature;
use crate::trackio::Label;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Parameters probed per tensor (capped by the tensor size).
    pub samples_per_tensor: usize,
    pub batch: usize,
    /// Central-difference step.
    pub h: f64,
    /// Gradients smaller than this on both sides count as agreeing.
    pub abs_threshold: f64,
    pub seed: u64,
    /// Multiplies every analytic gradient by `1 + fault`; a negative control.
    pub fault: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            samples_per_tensor: 16,
            batch: 4,
            h: 1e-3,
            abs_threshold: 1e-8,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Tensor holding the worst entry.
    pub worst_tensor: &'static str,
    pub checked: usize,
    /// Probes discarded because the step crossed a leaky-ReLU kink.
    pub skipped_kinks: usize,
}

/// Max relative error between analytic and finite-difference gradients with
/// default options.
pub fn gradient_check(model: &ModelState, sig: &Signature) -> Result<f64, ModelError> {
    Ok(gradient_check_with(model, sig, &GradCheckOptions::default())?.max_relative_error)
}

pub fn gradient_check_with(
    model: &ModelState,
    sig: &Signature,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, ModelError> {
    model.check(sig)?;
    let net: Network<f64> = model.net.cast();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let batch = opts.batch.max(2);
    let dim = sig.tensor.len();
    let base = target(sig.label).unwrap_or(target(Label::Real).unwrap());
    let mut x = Array2::zeros((batch, dim));
    let mut y = Array2::zeros((batch, 2));
    for k in 0..batch {
        for (j, &v) in sig.tensor.iter().enumerate() {
            let jitter = if k == 0 { 0.0 } else { rng.random_range(-0.1..0.1) };
            x[[k, j]] = v as f64 + jitter;
        }
        let t = if k % 2 == 0 { base } else { [base[1], base[0]] };
        y[[k, 0]] = t[0] as f64;
        y[[k, 1]] = t[1] as f64;
    }
    Ok(check_network(&net, &x, &y, model.config.leaky_slope, opts, &mut rng))
}

pub(crate) fn check_network(
    net: &Network<f64>,
    x: &Array2<f64>,
    y: &Array2<f64>,
    leaky_slope: f64,
    opts: &GradCheckOptions,
    rng: &mut ChaCha8Rng,
) -> GradCheckReport {
    let run = |n: &Network<f64>| {
        let fo = ForwardOptions {
            batch_stats: true,
            dropout: None,
            leaky_slope,
        };
        let (logits, cache) = n.forward(x.view(), fo);
        (bce_with_logits(&logits, y), cache.activation_pattern())
    };
    let cache = {
        let fo = ForwardOptions {
            batch_stats: true,
            dropout: None,
            leaky_slope,
        };
        net.forward(x.view(), fo)
    };
    let ((_, dlogits), pattern) = (bce_with_logits(&cache.0, y), cache.1.activation_pattern());
    let grads = net.backward(&cache.1, &dlogits);
    let analytic = grads.params();
    let scale = 1.0 + opts.fault.unwrap_or(0.0);

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_tensor: PARAM_NAMES[0],
        checked: 0,
        skipped_kinks: 0,
    };
    for (t, name) in PARAM_NAMES.iter().enumerate() {
        let len = analytic[t].len();
        let want = opts.samples_per_tensor.min(len);
        let candidates = index::sample(rng, len, (want * 3).min(len));
        let mut taken = 0;
        for k in candidates.iter() {
            if taken == want {
                break;
            }
            let orig = probe.params()[t][k];
            let mut eval = |v: f64| {
                probe.params_mut()[t][k] = v;
                let ((loss, _), pat) = run(&probe);
                (loss, pat == pattern)
            };
            let h = opts.h;
            let probes = [orig + 2.0 * h, orig + h, orig - h, orig - 2.0 * h].map(&mut eval);
            probe.params_mut()[t][k] = orig;
            if !probes.iter().all(|p| p.1) {
                report.skipped_kinks += 1;
                continue;
            }
            let [p2, p1, m1, m2] = probes.map(|p| p.0);
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let a = analytic[t][k] * scale;
            let denom = a.abs().max(numeric.abs());
            let err = if denom < opts.abs_threshold {
                0.0
            } else {
                (a - numeric).abs() / denom
            };
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_tensor = name;
            }
            taken += 1;
            report.checked += 1;
        }
    }
    report
}
