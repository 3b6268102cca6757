//! sRGB to CIELab conversion of eye colors and the per-frame visual features.
//!
//! ```text
//! cargo run --example lab_colors
//! ```

use gazesig::synth::{gen_real_track, SynthConfig};
use gazesig::visual::{lab_to_srgb, srgb_to_lab, visual_frame};

fn main() {
    for rgb in [[255.0, 255.0, 255.0], [0.0, 0.0, 0.0], [255.0, 0.0, 0.0], [92.0, 64.0, 51.0]] {
        let lab = srgb_to_lab(rgb).expect("channels in [0, 255]");
        let back = lab_to_srgb(lab);
        println!(
            "sRGB {:>5.1?} -> Lab ({:>7.3}, {:>8.3}, {:>8.3}) -> sRGB {:>5.1?}",
            rgb, lab.l, lab.a, lab.b, back
        );
    }

    let track = gen_real_track(&SynthConfig {
        seed: 1,
        n_frames: 3,
        ..SynthConfig::default()
    })
    .expect("valid config");
    for rec in &track.records {
        let v = visual_frame(rec).expect("valid record");
        println!(
            "frame {}: iris L {:.2}/{:.2}, iris ΔLab {:.3?}, iris areas {:.1}/{:.1} mm²",
            rec.frame_index, v.iris_color_l.l, v.iris_color_r.l, v.iris_color_diff, v.area_iris_l, v.area_iris_r
        );
    }
}
