//! Canonical per-frame track files (`.gzt.jsonl`).
//!
//! A track file is JSON-Lines: the first line is a header object
//! `{"video_id": .., "fps": .., "label": "real"|"fake"|"unknown"}` and every
//! following non-blank line is one frame record:
//!
//! ```text
//! {"frame": 0, "t_ms": 0.0, "left": {..eye..}, "right": {..eye..}}
//! ```
//!
//! Each eye object carries `eye_area`, `iris_area`, `pupil_area` (mm²),
//! `iris_rgb` and `pupil_rgb` (region-averaged sRGB, 0–255), `pupil_center`,
//! `gaze_dir` and `eye_center` (camera-space mm, gaze unit length) and `valid`.
//!
//! Records that parse but violate a field invariant are kept with the
//! offending eye marked invalid; only unparseable lines are errors.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Maximum deviation of `‖gaze_dir‖` from 1 for a valid eye.
pub const GAZE_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum TrackError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("track contains no records")]
    EmptyTrack,
}

/// Ground-truth label of a video or sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
            Label::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Label::Real),
            "fake" => Ok(Label::Fake),
            "unknown" => Ok(Label::Unknown),
            other => Err(format!("unknown label '{other}'")),
        }
    }
}

/// Which eye a measurement belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// One eye's measurements in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EyeRecord {
    pub eye_area: f64,
    pub iris_area: f64,
    pub pupil_area: f64,
    pub iris_rgb: [f64; 3],
    pub pupil_rgb: [f64; 3],
    pub pupil_center: Vector3<f64>,
    pub gaze_dir: Vector3<f64>,
    pub eye_center: Vector3<f64>,
    pub valid: bool,
}

impl EyeRecord {
    /// Checks every field invariant, independent of the `valid` flag.
    pub fn satisfies_invariants(&self) -> bool {
        let scalars = [self.eye_area, self.iris_area, self.pupil_area];
        let finite = scalars.iter().all(|v| v.is_finite())
            && self.iris_rgb.iter().chain(&self.pupil_rgb).all(|v| v.is_finite())
            && self.pupil_center.iter().all(|v| v.is_finite())
            && self.gaze_dir.iter().all(|v| v.is_finite())
            && self.eye_center.iter().all(|v| v.is_finite());
        if !finite {
            return false;
        }
        let areas_ok = self.pupil_area >= 0.0
            && self.pupil_area <= self.iris_area
            && self.iris_area <= self.eye_area;
        let colors_ok = self
            .iris_rgb
            .iter()
            .chain(&self.pupil_rgb)
            .all(|c| (0.0..=255.0).contains(c));
        let unit = (self.gaze_dir.norm() - 1.0).abs() <= GAZE_NORM_TOLERANCE;
        areas_ok && colors_ok && unit
    }
}

/// One frame of raw per-eye measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackRecord {
    pub frame_index: u64,
    pub timestamp_ms: f64,
    pub left: EyeRecord,
    pub right: EyeRecord,
}

impl TrackRecord {
    /// A record is usable only when both eyes are valid.
    pub fn valid(&self) -> bool {
        self.left.valid && self.right.valid
    }

    pub fn eye(&self, side: Side) -> &EyeRecord {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn eye_mut(&mut self, side: Side) -> &mut EyeRecord {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// The same record with left and right exchanged.
    pub fn swap_lr(&self) -> TrackRecord {
        TrackRecord {
            frame_index: self.frame_index,
            timestamp_ms: self.timestamp_ms,
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

/// A whole video's worth of track records.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub video_id: String,
    pub fps: f64,
    pub label: Label,
    pub records: Vec<TrackRecord>,
}

// Wire representation.

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    video_id: String,
    fps: f64,
    label: Label,
}

#[derive(Serialize, Deserialize)]
struct EyeLine {
    eye_area: f64,
    iris_area: f64,
    pupil_area: f64,
    iris_rgb: [f64; 3],
    pupil_rgb: [f64; 3],
    pupil_center: [f64; 3],
    gaze_dir: [f64; 3],
    eye_center: [f64; 3],
    valid: bool,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    frame: u64,
    t_ms: f64,
    left: EyeLine,
    right: EyeLine,
}

impl From<&EyeRecord> for EyeLine {
    fn from(e: &EyeRecord) -> Self {
        EyeLine {
            eye_area: e.eye_area,
            iris_area: e.iris_area,
            pupil_area: e.pupil_area,
            iris_rgb: e.iris_rgb,
            pupil_rgb: e.pupil_rgb,
            pupil_center: e.pupil_center.into(),
            gaze_dir: e.gaze_dir.into(),
            eye_center: e.eye_center.into(),
            valid: e.valid,
        }
    }
}

impl From<EyeLine> for EyeRecord {
    fn from(e: EyeLine) -> Self {
        let mut eye = EyeRecord {
            eye_area: e.eye_area,
            iris_area: e.iris_area,
            pupil_area: e.pupil_area,
            iris_rgb: e.iris_rgb,
            pupil_rgb: e.pupil_rgb,
            pupil_center: e.pupil_center.into(),
            gaze_dir: e.gaze_dir.into(),
            eye_center: e.eye_center.into(),
            valid: e.valid,
        };
        if !eye.satisfies_invariants() {
            eye.valid = false;
        }
        eye
    }
}

/// Parses a track from any line-oriented reader.
pub fn read_track<R: Read>(reader: R) -> Result<Track, TrackError> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate();

    let header = loop {
        match lines.next() {
            None => return Err(TrackError::MalformedHeader("missing header line".into())),
            Some((_, Err(e))) => return Err(TrackError::MalformedHeader(e.to_string())),
            Some((_, Ok(line))) if line.trim().is_empty() => continue,
            Some((_, Ok(line))) => break line,
        }
    };
    let header: HeaderLine = serde_json::from_str(&header)
        .map_err(|e| TrackError::MalformedHeader(e.to_string()))?;
    if !(header.fps.is_finite() && header.fps > 0.0) {
        return Err(TrackError::MalformedHeader(format!(
            "fps must be positive, got {}",
            header.fps
        )));
    }

    let mut records: Vec<TrackRecord> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| TrackError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordLine =
            serde_json::from_str(&line).map_err(|e| TrackError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        if let Some(prev) = records.last() {
            if raw.frame <= prev.frame_index {
                return Err(TrackError::MalformedRecord {
                    line: line_no,
                    reason: format!(
                        "frame index {} does not increase past {}",
                        raw.frame, prev.frame_index
                    ),
                });
            }
        }
        records.push(TrackRecord {
            frame_index: raw.frame,
            timestamp_ms: raw.t_ms,
            left: raw.left.into(),
            right: raw.right.into(),
        });
    }

    if records.is_empty() {
        return Err(TrackError::EmptyTrack);
    }
    Ok(Track {
        video_id: header.video_id,
        fps: header.fps,
        label: header.label,
        records,
    })
}

/// Serializes a track as JSON-Lines.
///
/// Floats are written in shortest round-trip form, so reading the output back
/// reproduces every field exactly.
pub fn write_track_to<W: Write>(track: &Track, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    let header = HeaderLine {
        video_id: track.video_id.clone(),
        fps: track.fps,
        label: track.label,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for rec in &track.records {
        let line = RecordLine {
            frame: rec.frame_index,
            t_ms: rec.timestamp_ms,
            left: (&rec.left).into(),
            right: (&rec.right).into(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn parse_track(path: impl AsRef<Path>) -> Result<Track, TrackError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TrackError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_track(file)
}

pub fn write_track(track: &Track, path: impl AsRef<Path>) -> Result<(), TrackError> {
    let path = path.as_ref();
    if track.records.is_empty() {
        return Err(TrackError::EmptyTrack);
    }
    let io_err = |source| TrackError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_track_to(track, file).map_err(io_err)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn eye(x: f64) -> EyeRecord {
        EyeRecord {
            eye_area: 600.0,
            iris_area: 140.0,
            pupil_area: 20.0,
            iris_rgb: [92.0, 64.0, 48.0],
            pupil_rgb: [18.0, 14.0, 12.0],
            pupil_center: Vector3::new(x, 0.0, 600.0),
            gaze_dir: Vector3::new(-x, 0.0, -400.0).normalize(),
            eye_center: Vector3::new(x, 0.0, 589.0),
            valid: true,
        }
    }

    pub fn record(frame: u64) -> TrackRecord {
        TrackRecord {
            frame_index: frame,
            timestamp_ms: frame as f64 * 1000.0 / 30.0,
            left: eye(-32.0),
            right: eye(32.0),
        }
    }

    pub fn track(n: u64) -> Track {
        Track {
            video_id: "vid-0".into(),
            fps: 30.0,
            label: Label::Real,
            records: (0..n).map(record).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn to_string(track: &Track) -> String {
        let mut buf = Vec::new();
        write_track_to(track, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn three_records_parse_valid() {
        let text = to_string(&track(3));
        let parsed = read_track(text.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert!(parsed.records.iter().all(TrackRecord::valid));
    }

    #[test]
    fn zero_gaze_is_retained_but_invalid() {
        let mut t = track(3);
        t.records[1].left.gaze_dir = Vector3::zeros();
        let parsed = read_track(to_string(&t).as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert!(!parsed.records[1].valid());
        assert!(!parsed.records[1].left.valid);
        assert!(parsed.records[1].right.valid);
    }

    #[test]
    fn area_ordering_violation_marks_invalid() {
        let mut t = track(2);
        t.records[0].right.pupil_area = 200.0;
        let parsed = read_track(to_string(&t).as_bytes()).unwrap();
        assert!(!parsed.records[0].right.valid);
    }

    #[test]
    fn header_only_is_empty_track() {
        let text = "{\"video_id\":\"a\",\"fps\":30.0,\"label\":\"real\"}\n";
        assert!(matches!(read_track(text.as_bytes()), Err(TrackError::EmptyTrack)));
    }

    #[test]
    fn bad_header_rejected() {
        let text = "{\"video_id\":\"a\",\"fps\":-1.0,\"label\":\"real\"}\n";
        assert!(matches!(
            read_track(text.as_bytes()),
            Err(TrackError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_track("not json\n".as_bytes()),
            Err(TrackError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_track("".as_bytes()),
            Err(TrackError::MalformedHeader(_))
        ));
    }

    #[test]
    fn unparseable_line_reports_line_number() {
        let mut text = to_string(&track(2));
        text.push_str("{\"frame\": 7, \"t_ms\": oops}\n");
        match read_track(text.as_bytes()) {
            Err(TrackError::MalformedRecord { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let mut t = track(3);
        t.records[2].frame_index = 1;
        assert!(matches!(
            read_track(to_string(&t).as_bytes()),
            Err(TrackError::MalformedRecord { line: 4, .. })
        ));
    }

    #[test]
    fn unknown_label_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.gzt.jsonl");
        let mut t = track(100);
        t.label = Label::Unknown;
        write_track(&t, &path).unwrap();
        assert_eq!(parse_track(&path).unwrap(), t);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let t = track(1);
        let err = write_track(&t, "/nonexistent-dir/x/y.gzt.jsonl").unwrap_err();
        assert!(matches!(err, TrackError::Io { .. }));
    }

    #[test]
    fn swap_lr_is_involution() {
        let mut r = record(0);
        r.left.iris_area = 150.0;
        assert_eq!(r.swap_lr().swap_lr(), r);
        assert_eq!(r.swap_lr().right.iris_area, 150.0);
    }
}
