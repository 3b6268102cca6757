//! Synthetic real and fake tracks: saccade statistics and the effect of each
//! perturbation kind.
//!
//! ```text
//! cargo run --example synth_tracks
//! ```

use gazesig::synth::{gen_fake_track, gen_real_track, saccade_episodes, FakePerturbation, PerturbationKind, SynthConfig};
use gazesig::{geo_frame, write_track, Track};

fn mean_gap(track: &Track) -> f64 {
    let gaps: Vec<f64> = track
        .records
        .iter()
        .map(|r| geo_frame(r).unwrap().vergence.rho_hat)
        .collect();
    gaps.iter().sum::<f64>() / gaps.len() as f64
}

fn main() {
    let cfg = SynthConfig {
        seed: 5,
        n_frames: 600,
        ..SynthConfig::default()
    };
    let real = gen_real_track(&cfg).unwrap();
    println!(
        "real: {} frames, {} saccades, mean vergence gap {:.3} mm",
        real.records.len(),
        saccade_episodes(&real).len(),
        mean_gap(&real)
    );
    for kind in PerturbationKind::ALL {
        let p = FakePerturbation::new(kind, kind.default_strength());
        let fake = gen_fake_track(&cfg, &[p]).unwrap();
        println!(
            "{:<14} {:<20} {} saccades, mean vergence gap {:.3} mm",
            kind.as_str(),
            p.to_string(),
            saccade_episodes(&fake).len(),
            mean_gap(&fake)
        );
    }
    let path = std::env::temp_dir().join(format!("{}.gzt.jsonl", real.video_id));
    write_track(&real, &path).unwrap();
    println!("wrote {}", path.display());
}
