//! The full pipeline on a small synthetic set, using the same command
//! functions as the `gazesig` binary.
//!
//! ```text
//! cargo run --release --example end_to_end [OUT_DIR]
//! ```

use std::path::PathBuf;

use gazesig::harness::{self, RunConfig};

fn main() -> Result<(), harness::HarnessError> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gazesig-end-to-end"));
    let at = |stage: &str| RunConfig {
        seed: 1,
        n_per_class: 50,
        n_frames: 128,
        out: Some(root.join(stage)),
        ..RunConfig::default()
    };
    let manifest = harness::cmd_synth(&at("tracks"))?;
    println!("{} tracks in {}", manifest.tracks.len(), root.join("tracks").display());

    let summary = harness::cmd_signatures(&root.join("tracks"), &at("signatures.gzsg"))?;
    println!("{} signatures", summary.total);

    let mut cfg = at("train");
    cfg.train.epochs = 30;
    let metrics = harness::cmd_train(&root.join("signatures.gzsg"), &cfg)?;
    let fold = &metrics.folds[0];
    println!(
        "trained on {} videos, final loss {:.4}",
        fold.n_train_videos,
        fold.report.epoch_loss.last().unwrap()
    );

    let report = harness::cmd_eval(&root.join("train/model.gzmd"), &root.join("train/test.gzsg"), &at("eval"))?;
    let s = &report.summary;
    println!(
        "{} test videos: S.Acc {:.2}%",
        s.n_videos,
        100.0 * s.sequence_accuracy.unwrap()
    );
    for scheme in &s.schemes {
        let c = scheme.confusion;
        println!(
            "  {:<10} V.Acc {:>6.2}%  tp {} tn {} fp {} fn {}",
            scheme.scheme.as_str(),
            100.0 * scheme.video_accuracy.unwrap(),
            c.tp,
            c.tn,
            c.fp,
            c.fn_
        );
    }
    let images = harness::cmd_render(&root.join("train/test.gzsg"), &at("render"))?;
    println!("rendered {} signatures, e.g. {}", images.len(), images[0].display());
    Ok(())
}
