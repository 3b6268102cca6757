//! Window-length sweep and feature-condition table on a small synthetic set.
//!
//! ```text
//! cargo run --release --example ablation
//! ```

use gazesig::harness::{self, RunConfig};

fn main() -> Result<(), harness::HarnessError> {
    let root = std::env::temp_dir().join("gazesig-ablation");
    let mut cfg = RunConfig {
        seed: 2,
        n_per_class: 40,
        n_frames: 128,
        out: Some(root.join("tracks")),
        ..RunConfig::default()
    };
    cfg.train.epochs = 20;
    harness::cmd_synth(&cfg)?;
    cfg.out = Some(root.join("ablate"));
    let table = harness::cmd_ablate(&root.join("tracks"), &cfg)?;
    print!("{table}");
    Ok(())
}
