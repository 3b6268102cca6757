//! Builds 40×ω×3 signatures from a real and a fake synthetic track and
//! prints the rows where they differ most.
//!
//! ```text
//! cargo run --example signatures
//! ```

use gazesig::signature::{track_signatures, write_signatures, ROWS, ROW_NAMES, TEMPORAL_ROWS};
use gazesig::synth::{gen_fake_track, gen_real_track, FakePerturbation, SynthConfig};
use gazesig::{read_signatures, Signature};

fn row_means(sigs: &[Signature]) -> Vec<f64> {
    (0..ROWS)
        .map(|r| sigs.iter().map(|s| s.row_mean(r)).sum::<f64>() / sigs.len() as f64)
        .collect()
}

fn main() {
    let cfg = SynthConfig {
        seed: 11,
        n_frames: 256,
        ..SynthConfig::default()
    };
    let real = track_signatures(&gen_real_track(&cfg).unwrap(), 32, 80.0).unwrap();
    let fake = track_signatures(&gen_fake_track(&cfg, &FakePerturbation::default_recipe()).unwrap(), 32, 80.0).unwrap();
    println!("{} real and {} fake signatures of {} values", real.len(), fake.len(), real[0].tensor.len());

    let (r, f) = (row_means(&real), row_means(&fake));
    let mut rows: Vec<usize> = (0..ROWS).collect();
    rows.sort_by(|&a, &b| (f[b] - r[b]).abs().total_cmp(&(f[a] - r[a]).abs()));
    println!("\nrow  block     name                  real   fake");
    for &row in rows.iter().take(8) {
        let block = if row < TEMPORAL_ROWS { "temporal" } else { "spectral" };
        println!(
            "{row:>3}  {block:<8}  {:<20}  {:.3}  {:.3}",
            ROW_NAMES[row % TEMPORAL_ROWS], r[row], f[row]
        );
    }

    let path = std::env::temp_dir().join("gazesig-example.gzsg");
    write_signatures(&real, &path).unwrap();
    let back = read_signatures(&path).unwrap();
    println!("\nround trip through {}: identical = {}", path.display(), back == real);
}
