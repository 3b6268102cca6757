//! Periodogram and normalized cross-correlation of short signals.
//!
//! ```text
//! cargo run --example spectral
//! ```

use gazesig::signal::{first_lag, periodogram, psd, xcorr_raw_channel, Signal};

fn main() {
    let n = 32;
    let tone: Vec<f64> = (0..n)
        .map(|t| (2.0 * std::f64::consts::PI * 4.0 * t as f64 / n as f64).sin())
        .collect();
    let p = periodogram(&tone);
    let peak = (0..=n / 2).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    println!("4-cycle tone: periodogram peak at bin {peak} and its mirror {}", n - peak);
    println!("energy {:.6} = spectral sum {:.6}", tone.iter().map(|v| v * v).sum::<f64>(), p.iter().sum::<f64>());

    let normalized = psd(&Signal::mono(tone.clone()).unwrap());
    let max = normalized.channel(0).iter().cloned().fold(0.0, f64::max);
    println!("normalized PSD peak {max:.9} (entries stay below 1)");

    let shifted: Vec<f64> = (0..n).map(|t| if t >= 3 { tone[t - 3] } else { 0.0 }).collect();
    let r = xcorr_raw_channel(&tone, &shifted).unwrap();
    let best = (0..n).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
    println!("cross-correlation peaks at lag {} with r = {:.3}", best as isize + first_lag(n), r[best]);
}
