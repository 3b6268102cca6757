//! Sequence slicing and the per-signal transforms used to build signatures:
//! shift/scale normalization, power spectral density and normalized
//! cross-correlation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::geometry::{geo_frame, GeoFrame};
use crate::trackio::{Label, Track};
use crate::visual::{visual_frame, VisualFrame};

/// Added to the range in [`ss_normalize`] so constant channels map to zero.
pub const SS_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("sequence length must be at least 2, got {0}")]
    OmegaTooSmall(usize),
    #[error("signal shapes differ: {0}")]
    LengthMismatch(String),
    #[error("signal contains non-finite values")]
    NonFinite,
}

/// Per-frame features of one valid record.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub frame_index: u64,
    pub visual: VisualFrame,
    pub geo: GeoFrame,
}

/// ω consecutive valid frames of one video.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceWindow {
    pub video_id: String,
    pub label: Label,
    pub start_frame: u64,
    pub omega: usize,
    pub frames: Vec<FrameFeatures>,
}

/// Splits a track into non-overlapping windows of `omega` consecutive valid
/// frames, packed greedily from the left.
///
/// A frame that is invalid, fails feature extraction, or breaks frame-index
/// contiguity ends the current run; packing restarts at the next frame.
pub fn slice_sequences(track: &Track, omega: usize) -> Result<Vec<SequenceWindow>, SignalError> {
    if omega < 2 {
        return Err(SignalError::OmegaTooSmall(omega));
    }
    let mut windows = Vec::new();
    let mut run: Vec<FrameFeatures> = Vec::with_capacity(omega);
    for rec in &track.records {
        let contiguous = run
            .last()
            .is_none_or(|prev| rec.frame_index == prev.frame_index + 1);
        if !contiguous {
            run.clear();
        }
        let features = if rec.valid() {
            match (visual_frame(rec), geo_frame(rec)) {
                (Ok(visual), Ok(geo)) => Some(FrameFeatures {
                    frame_index: rec.frame_index,
                    visual,
                    geo,
                }),
                _ => None,
            }
        } else {
            None
        };
        match features {
            Some(f) => run.push(f),
            None => {
                run.clear();
                continue;
            }
        }
        if run.len() == omega {
            let frames = std::mem::replace(&mut run, Vec::with_capacity(omega));
            windows.push(SequenceWindow {
                video_id: track.video_id.clone(),
                label: track.label,
                start_frame: frames[0].frame_index,
                omega,
                frames,
            });
        }
    }
    Ok(windows)
}

/// A multi-channel signal of equal-length, finite channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    channels: Vec<Vec<f64>>,
}

impl Signal {
    pub fn new(channels: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(SignalError::LengthMismatch("ragged channels".into()));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite);
        }
        Ok(Signal { channels })
    }

    pub fn mono(values: Vec<f64>) -> Result<Self, SignalError> {
        Signal::new(vec![values])
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    fn map_channels(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Signal {
        Signal {
            channels: self.channels.iter().map(|c| f(c)).collect(),
        }
    }
}

/// Shift by min, scale by range: `(x − min) / (max − min + ε)`.
pub fn ss_normalize_channel(x: &[f64]) -> Vec<f64> {
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    if !(range > 0.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - min) / (range + SS_EPSILON)).collect()
}

pub fn ss_normalize(sig: &Signal) -> Signal {
    sig.map_channels(ss_normalize_channel)
}

/// Two-sided periodogram `|DFT_k(x)|² / n` for `k = 0..n`, unnormalized.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Power spectral density of every channel, SS-normalized.
pub fn psd(sig: &Signal) -> Signal {
    sig.map_channels(|c| ss_normalize_channel(&periodogram(c)))
}

/// First lag evaluated for a length-`n` correlation: `−⌊n/2⌋`.
pub fn first_lag(n: usize) -> isize {
    -((n / 2) as isize)
}

/// Mean-removed, zero-padded normalized cross-correlation
/// `r(τ) = Σ_n ā_n b̄_{n+τ} / (‖ā‖‖b̄‖)` at the `n` centered lags
/// `τ ∈ [−⌊n/2⌋, ⌈n/2⌉ − 1]`; entry `j` holds lag `j − ⌊n/2⌋`.
///
/// Values lie in `[−1, 1]`. If either input is constant the result is all
/// zeros.
pub fn xcorr_raw_channel(a: &[f64], b: &[f64]) -> Result<Vec<f64>, SignalError> {
    if a.len() != b.len() {
        return Err(SignalError::LengthMismatch(format!("{} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let centered = |x: &[f64]| {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter().map(|v| v - mean).collect::<Vec<_>>()
    };
    let (ca, cb) = (centered(a), centered(b));
    let norm = ca.iter().map(|v| v * v).sum::<f64>().sqrt() * cb.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Ok(vec![0.0; n]);
    }

    // c[τ] = Σ a_n b_{n+τ} = IFFT(conj(A)·B), padded so no lag wraps around.
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v = vec![Complex::new(0.0, 0.0); size];
        for (dst, &src) in v.iter_mut().zip(x) {
            dst.re = src;
        }
        v
    };
    let (mut fa, mut fb) = (pad(&ca), pad(&cb));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut prod);

    let scale = 1.0 / (size as f64 * norm);
    let lag0 = first_lag(n);
    Ok((0..n as isize)
        .map(|j| {
            let tau = j + lag0;
            let idx = tau.rem_euclid(size as isize) as usize;
            (prod[idx].re * scale).clamp(-1.0, 1.0)
        })
        .collect())
}

/// Channel-wise raw cross-correlation of two signals.
pub fn xcorr_raw(a: &Signal, b: &Signal) -> Result<Signal, SignalError> {
    if a.n_channels() != b.n_channels() {
        return Err(SignalError::LengthMismatch(format!(
            "{} vs {} channels",
            a.n_channels(),
            b.n_channels()
        )));
    }
    let channels = a
        .channels
        .iter()
        .zip(&b.channels)
        .map(|(x, y)| xcorr_raw_channel(x, y))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Signal { channels })
}

/// Channel-wise cross-correlation, SS-normalized into `[0, 1)`.
pub fn xcorr(a: &Signal, b: &Signal) -> Result<Signal, SignalError> {
    Ok(ss_normalize(&xcorr_raw(a, b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trackio::fixtures;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n²) periodogram straight from the DFT sum.
    fn dft_periodogram(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                (re * re + im * im) / n as f64
            })
            .collect()
    }

    /// Double-loop correlation at the centered lags.
    fn loop_xcorr(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let na = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>().sqrt();
        let lo = -((n / 2) as isize);
        (0..n as isize)
            .map(|j| {
                let tau = lo + j;
                let mut s = 0.0;
                for i in 0..n as isize {
                    let k = i + tau;
                    if k >= 0 && k < n as isize {
                        s += (a[i as usize] - ma) * (b[k as usize] - mb);
                    }
                }
                s / (na * nb)
            })
            .collect()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn hundred_valid_frames_three_windows() {
        let w = slice_sequences(&fixtures::track(100), 32).unwrap();
        assert_eq!(w.iter().map(|w| w.start_frame).collect::<Vec<_>>(), vec![0, 32, 64]);
        assert!(w.iter().all(|w| w.frames.len() == 32));
    }

    #[test]
    fn too_short_track_gives_no_windows() {
        assert!(slice_sequences(&fixtures::track(31), 32).unwrap().is_empty());
    }

    #[test]
    fn invalid_frame_restarts_packing() {
        let mut t = fixtures::track(70);
        t.records[40].left.valid = false;
        let w = slice_sequences(&t, 32).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start_frame, 0);
    }

    #[test]
    fn frame_gap_breaks_contiguity() {
        let mut t = fixtures::track(64);
        for r in t.records.iter_mut().skip(10) {
            r.frame_index += 5;
        }
        let w = slice_sequences(&t, 32).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start_frame, 15);
    }

    #[test]
    fn omega_below_two_rejected() {
        assert_eq!(
            slice_sequences(&fixtures::track(10), 1).unwrap_err(),
            SignalError::OmegaTooSmall(1)
        );
    }

    #[test]
    fn ss_examples() {
        let out = ss_normalize_channel(&[5.0, 10.0, 15.0]);
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 0.5).abs() < 1e-12);
        assert!(out[2] < 1.0 && out[2] > 1.0 - 1e-9);
        assert_eq!(ss_normalize_channel(&[7.0, 7.0, 7.0]), vec![0.0; 3]);
    }

    #[test]
    fn signal_rejects_nan_and_ragged() {
        assert_eq!(Signal::mono(vec![1.0, f64::NAN]).unwrap_err(), SignalError::NonFinite);
        assert!(Signal::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn constant_signal_psd_is_dc_only() {
        let p = periodogram(&[3.0; 16]);
        assert!((p[0] - 9.0 * 16.0).abs() < 1e-9);
        assert!(p[1..].iter().all(|v| v.abs() < 1e-9));
        let normed = psd(&Signal::mono(vec![3.0; 16]).unwrap());
        assert!(normed.channel(0)[0] > 1.0 - 1e-9);
        assert!(normed.channel(0)[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cosine_peaks_at_conjugate_bins() {
        let n = 32;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 4.0 * t as f64 / n as f64).cos())
            .collect();
        let p = periodogram(&x);
        let oracle = dft_periodogram(&x);
        for k in 0..n {
            assert!((p[k] - oracle[k]).abs() < 1e-9);
            if k == 4 || k == 28 {
                assert!((p[k] - 8.0).abs() < 1e-9);
            } else {
                assert!(p[k].abs() < 1e-9, "bin {k} = {}", p[k]);
            }
        }
    }

    #[test]
    fn zero_signal_zero_psd() {
        assert_eq!(psd(&Signal::mono(vec![0.0; 8]).unwrap()).channel(0), &[0.0; 8]);
    }

    #[test]
    fn periodogram_matches_dft_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [16, 32, 64, 128] {
            let x = random_vec(&mut rng, n);
            let p = periodogram(&x);
            let o = dft_periodogram(&x);
            let scale = o.iter().cloned().fold(0.0, f64::max);
            for k in 0..n {
                assert!((p[k] - o[k]).abs() <= 1e-9 * scale);
            }
            let energy: f64 = x.iter().map(|v| v * v).sum();
            assert!((p.iter().sum::<f64>() - energy).abs() <= 1e-9 * energy);
        }
    }

    #[test]
    fn autocorrelation_peaks_at_zero_lag() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_vec(&mut rng, 32);
        let r = xcorr_raw_channel(&a, &a).unwrap();
        assert!((r[16] - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((xcorr_raw_channel(&a, &neg).unwrap()[16] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_copy_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_vec(&mut rng, 32);
        let mut b = vec![0.0; 32];
        b[3..].copy_from_slice(&a[..29]);
        let r = xcorr_raw_channel(&a, &b).unwrap();
        let oracle = loop_xcorr(&a, &b);
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .unwrap()
                .0 as isize
                + first_lag(32)
        };
        assert_eq!(argmax(&r), 3);
        assert_eq!(argmax(&oracle), 3);
    }

    #[test]
    fn xcorr_rejects_length_mismatch() {
        let a = Signal::mono(vec![1.0, 2.0]).unwrap();
        let b = Signal::mono(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(xcorr(&a, &b), Err(SignalError::LengthMismatch(_))));
        let c = Signal::new(vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(xcorr(&a, &c), Err(SignalError::LengthMismatch(_))));
    }

    #[test]
    fn constant_input_correlates_to_zero() {
        assert_eq!(xcorr_raw_channel(&[1.0; 8], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap(), vec![0.0; 8]);
    }

    proptest! {
        #[test]
        fn xcorr_matches_loop_oracle(seed in 0u64..1000, n in 2usize..70) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_vec(&mut rng, n);
            let b = random_vec(&mut rng, n);
            let fast = xcorr_raw_channel(&a, &b).unwrap();
            let slow = loop_xcorr(&a, &b);
            for (f, s) in fast.iter().zip(&slow) {
                prop_assert!((f - s).abs() <= 1e-9);
                prop_assert!((-1.0..=1.0).contains(f));
            }
        }

        #[test]
        fn ss_range_contract(v in prop::collection::vec(-1e3f64..1e3, 2..64)) {
            let out = ss_normalize_channel(&v);
            let min = out.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min, 0.0);
            prop_assert!(out.iter().all(|x| *x < 1.0 && *x >= 0.0));
        }

        #[test]
        fn windows_never_overlap_or_hold_invalid(
            invalid in prop::collection::vec(any::<bool>(), 1..150),
            omega in 2usize..20,
        ) {
            let mut t = fixtures::track(invalid.len() as u64);
            for (r, bad) in t.records.iter_mut().zip(&invalid) {
                if *bad && r.frame_index % 3 == 0 {
                    r.right.valid = false;
                }
            }
            let w = slice_sequences(&t, omega).unwrap();
            let mut last_end: Option<u64> = None;
            for win in &w {
                prop_assert_eq!(win.frames.len(), omega);
                if let Some(end) = last_end {
                    prop_assert!(win.start_frame > end);
                }
                for (i, f) in win.frames.iter().enumerate() {
                    prop_assert_eq!(f.frame_index, win.start_frame + i as u64);
                    prop_assert!(t.records[f.frame_index as usize].valid());
                }
                last_end = Some(win.frames.last().unwrap().frame_index);
            }
        }
    }
}
