//! Synthetic eye tracks with controllable fake artifacts.
//!
//! A real track alternates fixations on random 3D targets with minimum-jerk
//! saccades between them. Both eyes rotate about fixed eyeball centers so
//! their gaze rays meet at the current target, up to a small angular noise.
//! Fake tracks start from a real track and apply a list of perturbations.
//!
//! Coordinates are millimetres in the camera frame with the face at depth
//! `face_depth_mm` looking towards the camera (−z).

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::trackio::{EyeRecord, Label, Side, Track, TrackRecord};
use crate::visual::{lab_to_srgb, srgb_to_lab, LabColor};

/// Distance from the eyeball center to the pupil.
pub const EYEBALL_RADIUS_MM: f64 = 12.0;
/// Offset of the eye-region center in front of the eyeball center.
pub const EYE_REGION_OFFSET_MM: f64 = 11.0;
/// Angular speed above which a frame counts as saccadic.
pub const SACCADE_SPEED_DEG_S: f64 = 100.0;
/// Pupil divergence per unit of iris divergence under `asymmetry`.
pub const PUPIL_ASYMMETRY_RATIO: f64 = 14.0 / 30.0;

const STREAM_SCHEDULE: u64 = 1;
const STREAM_GAZE: u64 = 2;
const STREAM_APPEARANCE: u64 = 3;
const STREAM_PERTURB: u64 = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("a fake track needs at least one perturbation")]
    EmptyPerturbationList,
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_frames: usize,
    pub fps: f64,
    pub ipd_mm: f64,
    pub fixation_ms: (f64, f64),
    pub saccade_ms: (f64, f64),
    /// RMS angular gaze noise per eye and frame.
    pub gaze_noise_deg: f64,
    /// Corners of the box targets are drawn from.
    pub target_min: [f64; 3],
    pub target_max: [f64; 3],
    pub face_depth_mm: f64,
    /// Eye, iris and pupil area means.
    pub base_areas_mm2: [f64; 3],
    /// Per-frame area noise, clipped at two standard deviations.
    pub area_jitter_mm2: f64,
    pub iris_rgb: [f64; 3],
    pub pupil_rgb: [f64; 3],
    /// Per-frame sRGB noise, clipped at two standard deviations.
    pub color_jitter_8bit: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_frames: 300,
            fps: 30.0,
            ipd_mm: 64.0,
            fixation_ms: (200.0, 400.0),
            saccade_ms: (20.0, 80.0),
            gaze_noise_deg: 0.2,
            target_min: [-150.0, -100.0, 100.0],
            target_max: [150.0, 100.0, 400.0],
            face_depth_mm: 600.0,
            base_areas_mm2: [600.0, 140.0, 20.0],
            area_jitter_mm2: 0.3,
            iris_rgb: [92.0, 64.0, 48.0],
            pupil_rgb: [18.0, 14.0, 12.0],
            color_jitter_8bit: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
        if !range_ok(self.fixation_ms) || !range_ok(self.saccade_ms) {
            return bad("durations must be positive ranges".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if !(self.ipd_mm.is_finite() && self.ipd_mm > 0.0) {
            return bad(format!("ipd must be positive, got {}", self.ipd_mm));
        }
        for (name, v) in [
            ("gaze_noise_deg", self.gaze_noise_deg),
            ("area_jitter_mm2", self.area_jitter_mm2),
            ("color_jitter_8bit", self.color_jitter_8bit),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        let [eye, iris, pupil] = self.base_areas_mm2;
        let jitter = 2.0 * self.area_jitter_mm2;
        if !(pupil - jitter > 0.0 && pupil + jitter <= iris - jitter && iris + jitter <= eye - jitter) {
            return bad("base areas must satisfy 0 < pupil < iris < eye with room for jitter".into());
        }
        if (0..3).any(|k| self.target_min[k] > self.target_max[k]) {
            return bad("target box corners out of order".into());
        }
        if self.target_max[2] >= self.face_depth_mm - EYEBALL_RADIUS_MM {
            return bad("targets must lie in front of the face".into());
        }
        Ok(())
    }

    fn eyeball_center(&self, side: Side) -> Vector3<f64> {
        let x = match side {
            Side::Left => -self.ipd_mm / 2.0,
            Side::Right => self.ipd_mm / 2.0,
        };
        Vector3::new(x, 0.0, self.face_depth_mm)
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Gaussian noise clipped at two standard deviations.
fn clipped_noise(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    (normal(rng) * sigma).clamp(-2.0 * sigma, 2.0 * sigma)
}

// Fixation/saccade schedule.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Fixation,
    Saccade,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub phase: Phase,
    pub start_ms: f64,
    pub end_ms: f64,
    pub from: Vector3<f64>,
    pub to: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

/// Minimum-jerk position profile on `[0, 1]`.
pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

impl Schedule {
    pub fn fixation_count(&self) -> usize {
        self.segments.iter().filter(|s| s.phase == Phase::Fixation).count()
    }

    /// Gaze target and phase at time `t_ms`.
    pub fn target_at(&self, t_ms: f64) -> (Vector3<f64>, Phase) {
        let i = self
            .segments
            .partition_point(|s| s.end_ms <= t_ms)
            .min(self.segments.len() - 1);
        let s = &self.segments[i];
        match s.phase {
            Phase::Fixation => (s.from, Phase::Fixation),
            Phase::Saccade => {
                let k = min_jerk((t_ms - s.start_ms) / (s.end_ms - s.start_ms));
                (s.from + (s.to - s.from) * k, Phase::Saccade)
            }
        }
    }
}

fn sample_target(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|k, _| rng.random_range(cfg.target_min[k]..=cfg.target_max[k]))
}

/// The fixation/saccade schedule covering `cfg.n_frames` frames.
pub fn schedule(cfg: &SynthConfig) -> Schedule {
    let mut rng = stream(cfg.seed, STREAM_SCHEDULE);
    let duration = cfg.n_frames as f64 * 1000.0 / cfg.fps;
    let mut segments = Vec::new();
    let mut t = 0.0;
    let mut target = sample_target(cfg, &mut rng);
    loop {
        let fix = rng.random_range(cfg.fixation_ms.0..=cfg.fixation_ms.1);
        segments.push(Segment {
            phase: Phase::Fixation,
            start_ms: t,
            end_ms: t + fix,
            from: target,
            to: target,
        });
        t += fix;
        if t >= duration {
            break;
        }
        let next = sample_target(cfg, &mut rng);
        let sac = rng.random_range(cfg.saccade_ms.0..=cfg.saccade_ms.1);
        segments.push(Segment {
            phase: Phase::Saccade,
            start_ms: t,
            end_ms: t + sac,
            from: target,
            to: next,
        });
        t += sac;
        target = next;
        if t >= duration {
            break;
        }
    }
    Schedule { segments }
}

// Gaze helpers.

fn tangent_basis(g: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if g.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = g.cross(&helper).normalize();
    let e2 = g.cross(&e1);
    (e1, e2)
}

/// Rotates `g` by a random angle with RMS `rms_deg` in a uniformly random
/// tangent direction.
fn jitter_direction(g: &Vector3<f64>, rms_deg: f64, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    if rms_deg == 0.0 {
        return *g;
    }
    let sigma = rms_deg.to_radians() / std::f64::consts::SQRT_2;
    let (e1, e2) = tangent_basis(g);
    let (a, b) = (normal(rng) * sigma, normal(rng) * sigma);
    let angle = a.hypot(b);
    if angle == 0.0 {
        return *g;
    }
    let dir = (e1 * a + e2 * b) / angle;
    (g * angle.cos() + dir * angle.sin()).normalize()
}

/// Turns the eye to `g`, rotating the pupil about the eyeball center.
fn set_gaze(eye: &mut EyeRecord, g: Vector3<f64>) {
    let center = eye.pupil_center - eye.gaze_dir * EYEBALL_RADIUS_MM;
    eye.gaze_dir = g;
    eye.pupil_center = center + g * EYEBALL_RADIUS_MM;
}

fn jittered_rgb(base: [f64; 3], sigma: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    base.map(|c| (c + clipped_noise(rng, sigma)).clamp(0.0, 255.0))
}

/// A real track: converging gaze on scheduled targets plus noise.
pub fn gen_real_track(cfg: &SynthConfig) -> Result<Track, SynthError> {
    cfg.validate()?;
    let plan = schedule(cfg);
    let mut gaze_rng = stream(cfg.seed, STREAM_GAZE);
    let mut look_rng = stream(cfg.seed, STREAM_APPEARANCE);
    let [eye_a, iris_a, pupil_a] = cfg.base_areas_mm2;
    let mut records = Vec::with_capacity(cfg.n_frames);
    for i in 0..cfg.n_frames {
        let t_ms = i as f64 * 1000.0 / cfg.fps;
        let (target, _) = plan.target_at(t_ms);
        let mut eye = |side: Side| {
            let c = cfg.eyeball_center(side);
            let g = jitter_direction(&(target - c).normalize(), cfg.gaze_noise_deg, &mut gaze_rng);
            let sigma = cfg.area_jitter_mm2;
            EyeRecord {
                eye_area: eye_a + clipped_noise(&mut look_rng, sigma),
                iris_area: iris_a + clipped_noise(&mut look_rng, sigma),
                pupil_area: pupil_a + clipped_noise(&mut look_rng, sigma),
                iris_rgb: jittered_rgb(cfg.iris_rgb, cfg.color_jitter_8bit, &mut look_rng),
                pupil_rgb: jittered_rgb(cfg.pupil_rgb, cfg.color_jitter_8bit, &mut look_rng),
                pupil_center: c + g * EYEBALL_RADIUS_MM,
                gaze_dir: g,
                eye_center: c - Vector3::z() * EYE_REGION_OFFSET_MM,
                valid: true,
            }
        };
        let left = eye(Side::Left);
        let right = eye(Side::Right);
        records.push(TrackRecord {
            frame_index: i as u64,
            timestamp_ms: t_ms,
            left,
            right,
        });
    }
    Ok(Track {
        video_id: format!("real-{}", cfg.seed),
        fps: cfg.fps,
        label: Label::Real,
        records,
    })
}

// Fake perturbations.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Moving average over gaze; strength is the window in frames.
    Smooth,
    /// Angular gaze jitter; strength is the RMS angle in degrees.
    Noise,
    /// Misses a fraction (strength) of saccades, holding the old gaze until
    /// the next saccade.
    SkipSaccades,
    /// Slow divergence of one eye's iris and pupil areas; strength is the
    /// peak iris difference in mm².
    Asymmetry,
    /// Random walk on one eye's 8-bit Lab colors; strength is the peak
    /// excursion per channel.
    ColorDrift,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 5] = [
        PerturbationKind::Smooth,
        PerturbationKind::Noise,
        PerturbationKind::SkipSaccades,
        PerturbationKind::Asymmetry,
        PerturbationKind::ColorDrift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::Smooth => "smooth",
            PerturbationKind::Noise => "noise",
            PerturbationKind::SkipSaccades => "skip_saccades",
            PerturbationKind::Asymmetry => "asymmetry",
            PerturbationKind::ColorDrift => "color_drift",
        }
    }

    pub fn default_strength(self) -> f64 {
        match self {
            PerturbationKind::Smooth => 5.0,
            PerturbationKind::Noise => 1.5,
            PerturbationKind::SkipSaccades => 0.5,
            PerturbationKind::Asymmetry => 30.0,
            PerturbationKind::ColorDrift => 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FakePerturbation {
    pub kind: PerturbationKind,
    pub strength: f64,
}

impl FakePerturbation {
    pub fn new(kind: PerturbationKind, strength: f64) -> Self {
        FakePerturbation { kind, strength }
    }

    /// Noise 1.5°, iris asymmetry 30 mm², then a 5-frame smoothing window.
    pub fn default_recipe() -> Vec<FakePerturbation> {
        vec![
            FakePerturbation::new(PerturbationKind::Noise, 1.5),
            FakePerturbation::new(PerturbationKind::Asymmetry, 30.0),
            FakePerturbation::new(PerturbationKind::Smooth, 5.0),
        ]
    }
}

/// `kind:strength`, e.g. `noise:1.5`.
impl fmt::Display for FakePerturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.strength)
    }
}

impl FromStr for PerturbationKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PerturbationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| SynthError::InvalidPerturbation(format!("unknown kind '{s}'")))
    }
}

impl FromStr for FakePerturbation {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, strength) = match s.split_once(':') {
            Some((k, v)) => {
                let kind: PerturbationKind = k.parse()?;
                let v = v
                    .trim()
                    .parse()
                    .map_err(|_| SynthError::InvalidPerturbation(format!("bad strength in '{s}'")))?;
                (kind, v)
            }
            None => {
                let kind: PerturbationKind = s.parse()?;
                (kind, kind.default_strength())
            }
        };
        Ok(FakePerturbation { kind, strength })
    }
}

fn gaze_series(track: &Track, side: Side) -> Vec<Vector3<f64>> {
    track.records.iter().map(|r| r.eye(side).gaze_dir).collect()
}

fn smooth(track: &mut Track, strength: f64) {
    let mut w = (strength.round() as usize).max(3);
    if w.is_multiple_of(2) {
        w += 1;
    }
    let half = w / 2;
    let n = track.records.len();
    for side in [Side::Left, Side::Right] {
        let g = gaze_series(track, side);
        for (i, rec) in track.records.iter_mut().enumerate() {
            let (a, b) = (i.saturating_sub(half), (i + half + 1).min(n));
            let mean: Vector3<f64> = g[a..b].iter().sum::<Vector3<f64>>() / (b - a) as f64;
            set_gaze(rec.eye_mut(side), mean.normalize());
        }
    }
}

fn add_noise(track: &mut Track, rms_deg: f64, rng: &mut ChaCha8Rng) {
    for rec in &mut track.records {
        for side in [Side::Left, Side::Right] {
            let eye = rec.eye_mut(side);
            let g = jitter_direction(&eye.gaze_dir, rms_deg, rng);
            set_gaze(eye, g);
        }
    }
}

/// Frames whose angular gaze speed (either eye) exceeds the saccade threshold.
pub fn saccade_frames(track: &Track) -> Vec<usize> {
    let fps = track.fps;
    (1..track.records.len())
        .filter(|&i| {
            [Side::Left, Side::Right].iter().any(|&side| {
                let a = track.records[i - 1].eye(side).gaze_dir;
                let b = track.records[i].eye(side).gaze_dir;
                a.angle(&b).to_degrees() * fps > SACCADE_SPEED_DEG_S
            })
        })
        .collect()
}

/// Maximal runs of consecutive saccadic frames, as `(first, last)`.
pub fn saccade_episodes(track: &Track) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for i in saccade_frames(track) {
        match out.last_mut() {
            Some(last) if last.1 + 1 == i => last.1 = i,
            _ => out.push((i, i)),
        }
    }
    out
}

/// Misses a fraction of saccades: from the start of each chosen saccade until
/// the next saccade begins, both eyes hold the previous frame's gaze.
fn skip_saccades(track: &mut Track, fraction: f64, rng: &mut ChaCha8Rng) {
    let episodes = saccade_episodes(track);
    let count = ((fraction.min(1.0) * episodes.len() as f64).round() as usize).min(episodes.len());
    let mut picked: Vec<usize> = index::sample(rng, episodes.len(), count).into_vec();
    picked.sort_unstable();
    let n = track.records.len();
    for k in picked {
        let end = episodes.get(k + 1).map_or(n, |next| next.0);
        for i in episodes[k].0..end {
            for side in [Side::Left, Side::Right] {
                let held = track.records[i - 1].eye(side).gaze_dir;
                set_gaze(track.records[i].eye_mut(side), held);
            }
        }
    }
}

/// Random walk rescaled so its largest excursion is exactly `peak`.
fn bounded_walk(n: usize, peak: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = 0.0;
    let walk: Vec<f64> = (0..n)
        .map(|_| {
            x += normal(rng);
            x
        })
        .collect();
    let max = walk.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return vec![0.0; n];
    }
    walk.iter().map(|v| v * peak / max).collect()
}

fn random_side(rng: &mut ChaCha8Rng) -> Side {
    if rng.random::<bool>() {
        Side::Left
    } else {
        Side::Right
    }
}

fn asymmetry(track: &mut Track, strength: f64, area_jitter: f64, rng: &mut ChaCha8Rng) {
    let n = track.records.len();
    // Both eyes carry jitter bounded by two standard deviations.
    let peak = (strength - 4.0 * area_jitter).max(0.0);
    let side = random_side(rng);
    let period_s = rng.random_range(1.0..4.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let walk = bounded_walk(n, 0.5, rng);
    let raw: Vec<f64> = track
        .records
        .iter()
        .zip(&walk)
        .map(|(r, w)| (std::f64::consts::TAU * r.timestamp_ms / 1000.0 / period_s + phase).sin() + w)
        .collect();
    let max = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return;
    }
    for (rec, r) in track.records.iter_mut().zip(raw) {
        let d = peak * r / max;
        let eye = rec.eye_mut(side);
        eye.iris_area += d;
        eye.pupil_area += d * PUPIL_ASYMMETRY_RATIO;
    }
}

fn drift_color(rgb: [f64; 3], drift: [f64; 3]) -> [f64; 3] {
    let lab = srgb_to_lab(rgb).expect("track colors are in range").encode8();
    lab_to_srgb(LabColor::decode8([lab[0] + drift[0], lab[1] + drift[1], lab[2] + drift[2]]))
}

fn color_drift(track: &mut Track, strength: f64, rng: &mut ChaCha8Rng) {
    let n = track.records.len();
    let side = random_side(rng);
    let iris: Vec<Vec<f64>> = (0..3).map(|_| bounded_walk(n, strength, rng)).collect();
    let pupil: Vec<Vec<f64>> = (0..3).map(|_| bounded_walk(n, strength, rng)).collect();
    for (i, rec) in track.records.iter_mut().enumerate() {
        let eye = rec.eye_mut(side);
        eye.iris_rgb = drift_color(eye.iris_rgb, [iris[0][i], iris[1][i], iris[2][i]]);
        eye.pupil_rgb = drift_color(eye.pupil_rgb, [pupil[0][i], pupil[1][i], pupil[2][i]]);
    }
}

/// Applies `perturbations` in order to a copy of `track`. `seed` drives the
/// random parts; `area_jitter` is the source track's area noise level.
pub fn perturb(
    track: &Track,
    perturbations: &[FakePerturbation],
    seed: u64,
    area_jitter: f64,
) -> Result<Track, SynthError> {
    if perturbations.is_empty() {
        return Err(SynthError::EmptyPerturbationList);
    }
    let mut out = track.clone();
    for (k, p) in perturbations.iter().enumerate() {
        if !(p.strength.is_finite() && p.strength >= 0.0) {
            return Err(SynthError::InvalidPerturbation(format!("strength of {p} is negative")));
        }
        let mut rng = stream(seed, STREAM_PERTURB + k as u64);
        match p.kind {
            PerturbationKind::Smooth => smooth(&mut out, p.strength),
            PerturbationKind::Noise => add_noise(&mut out, p.strength, &mut rng),
            PerturbationKind::SkipSaccades => skip_saccades(&mut out, p.strength, &mut rng),
            PerturbationKind::Asymmetry => asymmetry(&mut out, p.strength, area_jitter, &mut rng),
            PerturbationKind::ColorDrift => color_drift(&mut out, p.strength, &mut rng),
        }
    }
    Ok(out)
}

/// A fake track derived from the real track of the same config.
pub fn gen_fake_track(cfg: &SynthConfig, perturbations: &[FakePerturbation]) -> Result<Track, SynthError> {
    if perturbations.is_empty() {
        return Err(SynthError::EmptyPerturbationList);
    }
    let real = gen_real_track(cfg)?;
    let mut fake = perturb(&real, perturbations, cfg.seed, cfg.area_jitter_mm2)?;
    fake.video_id = format!("fake-{}", cfg.seed);
    fake.label = Label::Fake;
    Ok(fake)
}

/// Extra angular gaze noise on an existing track; the label is kept.
pub fn inject_gaze_noise(track: &Track, rms_deg: f64, seed: u64) -> Track {
    let mut out = track.clone();
    add_noise(&mut out, rms_deg, &mut stream(seed, STREAM_PERTURB));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geo_frame;
    use crate::signature::{track_signatures, DEFAULT_D_PLUS_MM, ROWS};

    fn cfg(seed: u64, n_frames: usize) -> SynthConfig {
        SynthConfig {
            seed,
            n_frames,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn noiseless_track_converges_in_front() {
        let c = SynthConfig {
            gaze_noise_deg: 0.0,
            ..cfg(3, 300)
        };
        let track = gen_real_track(&c).unwrap();
        for rec in &track.records {
            assert!(rec.valid());
            let v = geo_frame(rec).unwrap().vergence;
            assert!(v.rho_hat < 1e-9, "rho_hat {}", v.rho_hat);
            assert!(v.in_front());
        }
    }

    #[test]
    fn default_noise_keeps_vergence_in_front() {
        let track = gen_real_track(&cfg(4, 1000)).unwrap();
        let ok = track
            .records
            .iter()
            .filter(|r| {
                let v = geo_frame(r).unwrap().vergence;
                v.in_front() && !v.degenerate
            })
            .count();
        assert!(ok as f64 >= 0.99 * track.records.len() as f64);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_real_track(&cfg(5, 200)).unwrap();
        let b = gen_real_track(&cfg(5, 200)).unwrap();
        assert_eq!(a, b);
        let recipe = FakePerturbation::default_recipe();
        assert_eq!(
            gen_fake_track(&cfg(5, 200), &recipe).unwrap(),
            gen_fake_track(&cfg(5, 200), &recipe).unwrap()
        );
        assert_ne!(a, gen_real_track(&cfg(6, 200)).unwrap());
    }

    #[test]
    fn fixation_count_within_schedule_bounds() {
        let c = cfg(7, 1000);
        let n = schedule(&c).fixation_count() as f64;
        let frames_per_ms = c.fps / 1000.0;
        let lo = 1000.0 / ((400.0 + 80.0) * frames_per_ms);
        let hi = 1000.0 / ((200.0 + 20.0) * frames_per_ms);
        assert!(n >= lo && n <= hi, "{n} not in [{lo}, {hi}]");
    }

    #[test]
    fn min_jerk_profile() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tracks_satisfy_record_invariants() {
        let fake = gen_fake_track(
            &cfg(8, 300),
            &[
                FakePerturbation::new(PerturbationKind::Asymmetry, 30.0),
                FakePerturbation::new(PerturbationKind::ColorDrift, 10.0),
                FakePerturbation::new(PerturbationKind::SkipSaccades, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(fake.label, Label::Fake);
        assert_eq!(fake.video_id, "fake-8");
        assert!(fake.records.iter().all(|r| r.left.satisfies_invariants() && r.right.satisfies_invariants()));
    }

    #[test]
    fn asymmetry_reaches_stated_range() {
        let p = [FakePerturbation::new(PerturbationKind::Asymmetry, 30.0)];
        for seed in 0..10 {
            let fake = gen_fake_track(&cfg(seed, 300), &p).unwrap();
            let max = fake
                .records
                .iter()
                .map(|r| (r.left.iris_area - r.right.iris_area).abs())
                .fold(0.0f64, f64::max);
            assert!((24.0..=30.0).contains(&max), "seed {seed}: {max}");
            let pupil_max = fake
                .records
                .iter()
                .map(|r| (r.left.pupil_area - r.right.pupil_area).abs())
                .fold(0.0f64, f64::max);
            assert!(pupil_max <= 14.0 + 1.2 + 1e-9);
        }
    }

    fn component_variance(track: &Track, side: Side, k: usize) -> f64 {
        let xs: Vec<f64> = track.records.iter().map(|r| r.eye(side).gaze_dir[k]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn smoothing_reduces_gaze_variance() {
        let c = cfg(9, 300);
        let real = gen_real_track(&c).unwrap();
        let fake = gen_fake_track(&c, &[FakePerturbation::new(PerturbationKind::Smooth, 5.0)]).unwrap();
        for side in [Side::Left, Side::Right] {
            for k in 0..3 {
                assert!(component_variance(&fake, side, k) < component_variance(&real, side, k));
            }
        }
    }

    fn mean_rho_hat(track: &Track) -> f64 {
        track
            .records
            .iter()
            .map(|r| geo_frame(r).unwrap().vergence.rho_hat)
            .sum::<f64>()
            / track.records.len() as f64
    }

    #[test]
    fn noise_raises_vergence_miss_distance() {
        let c = cfg(10, 300);
        let real = gen_real_track(&c).unwrap();
        let fake = gen_fake_track(&c, &[FakePerturbation::new(PerturbationKind::Noise, 1.5)]).unwrap();
        assert!(mean_rho_hat(&fake) > mean_rho_hat(&real));
    }

    #[test]
    fn skip_saccades_removes_saccadic_frames() {
        let c = SynthConfig {
            gaze_noise_deg: 0.0,
            ..cfg(11, 300)
        };
        let real = gen_real_track(&c).unwrap();
        let before = saccade_episodes(&real).len();
        assert!(before > 0);
        let half = gen_fake_track(&c, &[FakePerturbation::new(PerturbationKind::SkipSaccades, 0.5)]).unwrap();
        assert!(saccade_episodes(&half).len() < before);
        let all = gen_fake_track(&c, &[FakePerturbation::new(PerturbationKind::SkipSaccades, 1.0)]).unwrap();
        assert!(saccade_episodes(&all).is_empty());
    }

    #[test]
    fn empty_perturbation_list_rejected() {
        assert_eq!(
            gen_fake_track(&cfg(1, 10), &[]).unwrap_err(),
            SynthError::EmptyPerturbationList
        );
    }

    #[test]
    fn perturbation_text_form() {
        let p: FakePerturbation = "noise:1.5".parse().unwrap();
        assert_eq!(p, FakePerturbation::new(PerturbationKind::Noise, 1.5));
        assert_eq!(p.to_string().parse::<FakePerturbation>().unwrap(), p);
        assert_eq!("smooth".parse::<FakePerturbation>().unwrap().strength, 5.0);
        assert!("wobble:1".parse::<FakePerturbation>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let bad = SynthConfig {
            ipd_mm: 0.0,
            ..SynthConfig::default()
        };
        assert!(gen_real_track(&bad).is_err());
        let bad = SynthConfig {
            fixation_ms: (0.0, 10.0),
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    /// Per-track mean of every signature row.
    fn row_means(track: &Track) -> Vec<f64> {
        let sigs = track_signatures(track, 32, DEFAULT_D_PLUS_MM).unwrap();
        (0..ROWS)
            .map(|row| sigs.iter().map(|s| s.row_mean(row)).sum::<f64>() / sigs.len() as f64)
            .collect()
    }

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn every_perturbation_shifts_a_signature_row() {
        let per_class = 50;
        let real: Vec<Vec<f64>> = (0..per_class)
            .map(|s| row_means(&gen_real_track(&cfg(s, 96)).unwrap()))
            .collect();
        for kind in PerturbationKind::ALL {
            let p = [FakePerturbation::new(kind, kind.default_strength())];
            let fake: Vec<Vec<f64>> = (0..per_class)
                .map(|s| row_means(&gen_fake_track(&cfg(1000 + s, 96), &p).unwrap()))
                .collect();
            let best = (0..ROWS)
                .map(|row| {
                    let a: Vec<f64> = real.iter().map(|m| m[row]).collect();
                    let b: Vec<f64> = fake.iter().map(|m| m[row]).collect();
                    let ((ma, sa), (mb, sb)) = (mean_sd(&a), mean_sd(&b));
                    let se = ((sa * sa + sb * sb) / per_class as f64).sqrt();
                    if se == 0.0 {
                        if ma == mb {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        (ma - mb).abs() / se
                    }
                })
                .fold(0.0f64, f64::max);
            assert!(best > 3.0, "{kind:?}: best shift {best:.2} standard errors");
        }
    }
}
