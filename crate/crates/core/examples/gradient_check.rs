//! Compares analytic gradients with finite differences, then shows a scaled
//! gradient being caught.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use gazesig::classifier::{gradient_check_with, GradCheckOptions, ModelState, TrainConfig};
use gazesig::signature::track_signatures;
use gazesig::synth::{gen_real_track, SynthConfig};

fn main() {
    let model = ModelState::new(&TrainConfig {
        omega: 16,
        ..TrainConfig::default()
    })
    .unwrap();
    let track = gen_real_track(&SynthConfig {
        n_frames: 32,
        ..SynthConfig::default()
    })
    .unwrap();
    let sig = &track_signatures(&track, 16, 80.0).unwrap()[0];
    for fault in [None, Some(0.01), Some(0.5)] {
        let opts = GradCheckOptions {
            fault,
            ..GradCheckOptions::default()
        };
        let r = gradient_check_with(&model, sig, &opts).unwrap();
        println!(
            "fault {:<10} max relative error {:.2e} in {} ({} parameters, {} kink probes skipped)",
            format!("{fault:?}"),
            r.max_relative_error,
            r.worst_tensor,
            r.checked,
            r.skipped_kinks
        );
    }
}
