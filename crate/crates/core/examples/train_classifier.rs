//! Trains the dense classifier on synthetic signatures, saves it, reloads it
//! and scores held-out tracks.
//!
//! ```text
//! cargo run --release --example train_classifier
//! ```

use gazesig::classifier::{load_model, predict_batch, save_model, train_with_validation, TrainConfig};
use gazesig::signature::track_signatures;
use gazesig::synth::{gen_fake_track, gen_real_track, FakePerturbation, SynthConfig};
use gazesig::{Label, Signature};

fn signatures(seeds: std::ops::Range<u64>) -> Vec<Signature> {
    let mut out = Vec::new();
    for seed in seeds {
        let cfg = SynthConfig {
            seed,
            n_frames: 128,
            ..SynthConfig::default()
        };
        out.extend(track_signatures(&gen_real_track(&cfg).unwrap(), 32, 80.0).unwrap());
        out.extend(track_signatures(&gen_fake_track(&cfg, &FakePerturbation::default_recipe()).unwrap(), 32, 80.0).unwrap());
    }
    out
}

fn main() {
    let train = signatures(0..40);
    let test = signatures(1000..1015);
    let cfg = TrainConfig {
        epochs: 20,
        validate_every: 5,
        ..TrainConfig::default()
    };
    let trained = train_with_validation(&train, &test, &cfg).unwrap();
    for v in &trained.report.validations {
        println!(
            "epoch {:>3}: loss {:.4}, train acc {:.3}, held-out acc {:.3}",
            v.epoch,
            v.train_loss,
            v.train_accuracy,
            v.val_accuracy.unwrap()
        );
    }

    let path = std::env::temp_dir().join("gazesig-example.gzmd");
    save_model(&trained.model, &path).unwrap();
    let model = load_model(&path).unwrap();
    let probs = predict_batch(&model, &test).unwrap();
    let correct = probs
        .iter()
        .zip(&test)
        .filter(|(p, s)| (**p > 0.5) == (s.label == Label::Fake))
        .count();
    println!("reloaded model: {correct}/{} held-out sequences correct", test.len());
}
