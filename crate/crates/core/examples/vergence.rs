//! Closest approach of two gaze rays and the per-frame geometric features of
//! a synthetic track.
//!
//! ```text
//! cargo run --example vergence
//! ```

use gazesig::synth::{gen_real_track, SynthConfig};
use gazesig::{geo_frame, intersect_gaze_rays};
use nalgebra::Vector3;

fn main() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sol = intersect_gaze_rays(
        &Vector3::new(-1.0, 0.0, 0.0),
        &Vector3::new(s, 0.0, s),
        &Vector3::new(1.0, 1.0, 0.0),
        &Vector3::new(-s, 0.0, s),
    )
    .expect("unit gaze directions");
    println!("skew rays: rho = {:.4?}, rho_hat = {:.4} mm", sol.rho.as_slice(), sol.rho_hat);
    println!("in front of both pupils: {}", sol.in_front());

    let track = gen_real_track(&SynthConfig {
        seed: 3,
        n_frames: 5,
        ..SynthConfig::default()
    })
    .expect("valid config");
    println!("\nframe  rho_z(mm)  rho_hat(mm)  eye_dist(mm)  pupil_dist(mm)");
    for rec in &track.records {
        let g = geo_frame(rec).expect("valid record");
        println!(
            "{:>5}  {:>9.2}  {:>11.4}  {:>12.3}  {:>14.3}",
            rec.frame_index, g.vergence.rho.z, g.vergence.rho_hat, g.eye_dist, g.pupil_dist
        );
    }
}
