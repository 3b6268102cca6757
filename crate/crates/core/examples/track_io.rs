//! Reads and writes the line-oriented track format.
//!
//! ```text
//! cargo run --example track_io
//! ```

use gazesig::synth::{gen_fake_track, FakePerturbation, SynthConfig};
use gazesig::trackio::{read_track, write_track_to};
use gazesig::slice_sequences;

fn main() {
    let mut track = gen_fake_track(
        &SynthConfig {
            seed: 8,
            n_frames: 80,
            ..SynthConfig::default()
        },
        &FakePerturbation::default_recipe(),
    )
    .unwrap();
    track.records[40].left.valid = false;

    let mut bytes = Vec::new();
    write_track_to(&track, &mut bytes).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    for line in text.lines().take(2) {
        println!("{}…", &line[..line.len().min(150)]);
    }

    let back = read_track(bytes.as_slice()).unwrap();
    println!("\nparsed {} records of {} ({}), identical = {}", back.records.len(), back.video_id, back.label.as_str(), back == track);
    let windows = slice_sequences(&back, 32).unwrap();
    let starts: Vec<u64> = windows.iter().map(|w| w.start_frame).collect();
    println!("ω=32 windows around the invalid frame 40 start at {starts:?}");
}
