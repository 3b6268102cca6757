//! The 40×ω×3 sequence signature.
//!
//! Rows 0–19 are temporal signals, one per feature group, and rows 20–39 are
//! the power spectra of rows 0–19 in the same order:
//!
//! | row | content | normalization |
//! |-----|---------|---------------|
//! | 0–3 | iris color L/R, pupil color L/R (Lab) | /256 of 8-bit Lab |
//! | 4 | eye area L, R, \|L−R\| | SS, SS, /d⁺ |
//! | 5 | iris area L, R, \|L−R\| | SS, SS, SS |
//! | 6 | pupil area L, R, \|L−R\| | SS, SS, /d⁺ |
//! | 7–8 | iris, pupil \|C^l − C^r\| | /256 |
//! | 9–10 | gaze vector L, R | (v+1)/2 |
//! | 11 | vergence point ρ | SS per axis |
//! | 12 | \|ray gap\| per axis | /d⁺ |
//! | 13–15 | solve cost, eye distance, pupil distance | SS, tripled |
//! | 16–17 | φ(iris colors), φ(pupil colors) | SS |
//! | 18 | φ(iris areas), φ(pupil areas), φ(eye areas) | SS |
//! | 19 | φ(gaze vectors) | SS |
//!
//! φ is the normalized left/right cross-correlation from [`crate::signal`].
//! Every entry is finally clamped into `[0, 1)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::signal::{psd, ss_normalize_channel, xcorr, Signal, SequenceWindow};
use crate::trackio::Label;

pub const ROWS: usize = 40;
pub const TEMPORAL_ROWS: usize = 20;
pub const CHANNELS: usize = 3;
pub const DEFAULT_OMEGA: usize = 32;
/// Assumed maximum interpupillary distance, in mm.
pub const DEFAULT_D_PLUS_MM: f64 = 80.0;
/// Largest stored value: the greatest `f32` below 1.
pub const MAX_ENTRY: f32 = 1.0 - f32::EPSILON / 2.0;

pub const MAGIC: &[u8; 4] = b"GZSG";
pub const FORMAT_VERSION: u16 = 1;

/// Names of the temporal rows; spectral row `20 + i` is the spectrum of row `i`.
pub const ROW_NAMES: [&str; TEMPORAL_ROWS] = [
    "iris_color_left",
    "iris_color_right",
    "pupil_color_left",
    "pupil_color_right",
    "eye_area",
    "iris_area",
    "pupil_area",
    "iris_color_diff",
    "pupil_color_diff",
    "gaze_left",
    "gaze_right",
    "vergence_point",
    "vergence_gap",
    "vergence_cost",
    "eye_distance",
    "pupil_distance",
    "xcorr_iris_color",
    "xcorr_pupil_color",
    "xcorr_areas",
    "xcorr_gaze",
];

#[derive(Debug, thiserror::Error)]
pub enum SignatureError {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported signature file version {0}")]
    VersionMismatch(u16),
    #[error("malformed signature file: {0}")]
    Malformed(String),
    #[error("signatures with different omega ({0} and {1}) cannot share a file")]
    MixedOmega(usize, usize),
}

/// One sequence's signature tensor in `[row][col][channel]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct Signature {
    pub tensor: Vec<f32>,
    pub omega: usize,
    pub video_id: String,
    pub start_frame: u32,
    pub label: Label,
}

impl Signature {
    pub fn zeros(omega: usize, video_id: impl Into<String>, label: Label) -> Signature {
        Signature {
            tensor: vec![0.0; ROWS * omega * CHANNELS],
            omega,
            video_id: video_id.into(),
            start_frame: 0,
            label,
        }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.omega + col) * CHANNELS + ch
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.tensor[self.index(row, col, ch)]
    }

    /// Mean over columns and channels of one row.
    pub fn row_mean(&self, row: usize) -> f64 {
        let span = self.omega * CHANNELS;
        let start = row * span;
        self.tensor[start..start + span].iter().map(|&v| v as f64).sum::<f64>() / span as f64
    }

    /// Copy with every cell outside `mask` zeroed.
    pub fn masked(&self, mask: &CellMask) -> Signature {
        let mut out = self.clone();
        mask.apply(&mut out);
        out
    }
}

fn series(win: &SequenceWindow, f: impl Fn(&crate::signal::FrameFeatures) -> f64) -> Vec<f64> {
    win.frames.iter().map(f).collect()
}

fn series3(win: &SequenceWindow, f: impl Fn(&crate::signal::FrameFeatures) -> [f64; 3]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); 3];
    for fr in &win.frames {
        let v = f(fr);
        for c in 0..3 {
            out[c].push(v[c]);
        }
    }
    out
}

fn scaled(x: &[f64], k: f64) -> Vec<f64> {
    x.iter().map(|v| v * k).collect()
}

fn signal(channels: Vec<Vec<f64>>) -> Result<Signal, SignatureError> {
    Signal::new(channels).map_err(|e| SignatureError::InvalidWindow(e.to_string()))
}

fn cross(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, SignatureError> {
    Ok(xcorr(&signal(a)?, &signal(b)?)
        .map_err(|e| SignatureError::InvalidWindow(e.to_string()))?
        .into_channels())
}

/// The 20 temporal rows of a window, each as three channels of length ω.
pub fn temporal_rows(win: &SequenceWindow, d_plus: f64) -> Result<Vec<Vec<Vec<f64>>>, SignatureError> {
    if win.omega < 2 || win.frames.len() != win.omega {
        return Err(SignatureError::InvalidWindow(format!(
            "expected {} frames, found {}",
            win.omega,
            win.frames.len()
        )));
    }
    if !(d_plus.is_finite() && d_plus > 0.0) {
        return Err(SignatureError::InvalidWindow(format!("d_plus must be positive, got {d_plus}")));
    }
    let inv256 = 1.0 / 256.0;
    let inv_d = 1.0 / d_plus;
    let ss = ss_normalize_channel;
    let dup = |x: Vec<f64>| vec![x.clone(), x.clone(), x];

    let iris_l = series3(win, |f| f.visual.iris_color_l.encode8());
    let iris_r = series3(win, |f| f.visual.iris_color_r.encode8());
    let pupil_l = series3(win, |f| f.visual.pupil_color_l.encode8());
    let pupil_r = series3(win, |f| f.visual.pupil_color_r.encode8());
    let eye_l = series(win, |f| f.visual.area_eye_l);
    let eye_r = series(win, |f| f.visual.area_eye_r);
    let iris_area_l = series(win, |f| f.visual.area_iris_l);
    let iris_area_r = series(win, |f| f.visual.area_iris_r);
    let pupil_area_l = series(win, |f| f.visual.area_pupil_l);
    let pupil_area_r = series(win, |f| f.visual.area_pupil_r);
    let gaze_l = series3(win, |f| f.geo.gaze_left.into());
    let gaze_r = series3(win, |f| f.geo.gaze_right.into());

    let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(TEMPORAL_ROWS);
    for color in [&iris_l, &iris_r, &pupil_l, &pupil_r] {
        rows.push(color.iter().map(|c| scaled(c, inv256)).collect());
    }
    rows.push(vec![
        ss(&eye_l),
        ss(&eye_r),
        series(win, |f| f.geo.area_diff_eye * inv_d),
    ]);
    rows.push(vec![
        ss(&iris_area_l),
        ss(&iris_area_r),
        ss(&series(win, |f| f.geo.area_diff_iris)),
    ]);
    rows.push(vec![
        ss(&pupil_area_l),
        ss(&pupil_area_r),
        series(win, |f| f.geo.area_diff_pupil * inv_d),
    ]);
    rows.push(
        series3(win, |f| f.visual.iris_color_diff)
            .iter()
            .map(|c| scaled(c, inv256))
            .collect(),
    );
    rows.push(
        series3(win, |f| f.visual.pupil_color_diff)
            .iter()
            .map(|c| scaled(c, inv256))
            .collect(),
    );
    for g in [&gaze_l, &gaze_r] {
        rows.push(g.iter().map(|c| c.iter().map(|v| (v + 1.0) / 2.0).collect()).collect());
    }
    rows.push(
        series3(win, |f| f.geo.vergence.rho.into())
            .iter()
            .map(|c| ss(c))
            .collect(),
    );
    rows.push(series3(win, |f| f.geo.vergence.rho_gap.map(|v| v.abs() * inv_d).into()));
    rows.push(dup(ss(&series(win, |f| f.geo.vergence.delta_rho))));
    rows.push(dup(ss(&series(win, |f| f.geo.eye_dist))));
    rows.push(dup(ss(&series(win, |f| f.geo.pupil_dist))));
    rows.push(cross(iris_l, iris_r)?);
    rows.push(cross(pupil_l, pupil_r)?);
    let mut areas = Vec::with_capacity(3);
    for (l, r) in [
        (iris_area_l, iris_area_r),
        (pupil_area_l, pupil_area_r),
        (eye_l, eye_r),
    ] {
        areas.extend(cross(vec![l], vec![r])?);
    }
    rows.push(areas);
    rows.push(cross(gaze_l, gaze_r)?);
    debug_assert_eq!(rows.len(), TEMPORAL_ROWS);
    Ok(rows)
}

/// Builds the full signature of one window.
pub fn build_signature(win: &SequenceWindow, d_plus: f64) -> Result<Signature, SignatureError> {
    let temporal = temporal_rows(win, d_plus)?;
    let omega = win.omega;
    let start_frame = u32::try_from(win.start_frame)
        .map_err(|_| SignatureError::InvalidWindow(format!("start frame {} exceeds u32", win.start_frame)))?;
    let mut sig = Signature::zeros(omega, win.video_id.clone(), win.label);
    sig.start_frame = start_frame;

    let mut put = |row: usize, channels: &[Vec<f64>]| -> Result<(), SignatureError> {
        for (ch, values) in channels.iter().enumerate() {
            for (col, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(SignatureError::InvalidWindow(format!(
                        "non-finite value in row {row}, channel {ch}"
                    )));
                }
                let idx = (row * omega + col) * CHANNELS + ch;
                sig.tensor[idx] = v.clamp(0.0, MAX_ENTRY as f64) as f32;
            }
        }
        Ok(())
    };
    for (i, row) in temporal.iter().enumerate() {
        put(i, row)?;
        let spectrum = psd(&signal(row.clone())?);
        put(TEMPORAL_ROWS + i, spectrum.channels())?;
    }
    Ok(sig)
}

/// Slices a track and builds a signature for every window.
pub fn track_signatures(
    track: &crate::trackio::Track,
    omega: usize,
    d_plus: f64,
) -> Result<Vec<Signature>, SignatureError> {
    crate::signal::slice_sequences(track, omega)
        .map_err(|e| SignatureError::InvalidWindow(e.to_string()))?
        .iter()
        .map(|w| build_signature(w, d_plus))
        .collect()
}

// Domains and masks.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureDomain {
    Visual,
    Geometric,
    Metric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignalDomain {
    Temporal,
    Spectral,
}

/// Feature and signal domain of one `(row, channel)` cell.
pub fn cell_domain(row: usize, ch: usize) -> (FeatureDomain, SignalDomain) {
    assert!(row < ROWS && ch < CHANNELS);
    let signal = if row < TEMPORAL_ROWS {
        SignalDomain::Temporal
    } else {
        SignalDomain::Spectral
    };
    let base = row % TEMPORAL_ROWS;
    let feature = match base {
        0..=3 | 7 | 8 => FeatureDomain::Visual,
        4..=6 if ch < 2 => FeatureDomain::Visual,
        4..=6 => FeatureDomain::Geometric,
        9..=15 => FeatureDomain::Geometric,
        _ => FeatureDomain::Metric,
    };
    (feature, signal)
}

/// Domains selectable on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Visual,
    Geometric,
    Metric,
    Temporal,
    Spectral,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Visual,
        Domain::Geometric,
        Domain::Metric,
        Domain::Temporal,
        Domain::Spectral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Visual => "visual",
            Domain::Geometric => "geometric",
            Domain::Metric => "metric",
            Domain::Temporal => "temporal",
            Domain::Spectral => "spectral",
        }
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| format!("unknown feature domain '{s}'"))
    }
}

/// A non-empty set of domains. A cell is kept when its feature domain and its
/// signal domain are both selected; if the set names no feature domain all of
/// them are implied, and likewise for signal domains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMask {
    domains: Vec<Domain>,
}

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask {
            domains: Domain::ALL.to_vec(),
        }
    }

    pub fn new(mut domains: Vec<Domain>) -> Result<Self, String> {
        domains.sort();
        domains.dedup();
        if domains.is_empty() {
            return Err("feature mask must name at least one domain".into());
        }
        Ok(FeatureMask { domains })
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn contains(&self, d: Domain) -> bool {
        self.domains.contains(&d)
    }

    pub fn cell_mask(&self) -> CellMask {
        let features: Vec<FeatureDomain> = [
            (Domain::Visual, FeatureDomain::Visual),
            (Domain::Geometric, FeatureDomain::Geometric),
            (Domain::Metric, FeatureDomain::Metric),
        ]
        .into_iter()
        .filter(|(d, _)| self.contains(*d))
        .map(|(_, f)| f)
        .collect();
        let signals: Vec<SignalDomain> = [
            (Domain::Temporal, SignalDomain::Temporal),
            (Domain::Spectral, SignalDomain::Spectral),
        ]
        .into_iter()
        .filter(|(d, _)| self.contains(*d))
        .map(|(_, s)| s)
        .collect();
        CellMask::from_fn(|row, ch| {
            let (f, s) = cell_domain(row, ch);
            (features.is_empty() || features.contains(&f)) && (signals.is_empty() || signals.contains(&s))
        })
    }
}

impl std::fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.domains.iter().map(|d| d.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FeatureMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "all" {
            return Ok(FeatureMask::all());
        }
        let domains = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Domain::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        FeatureMask::new(domains)
    }
}

/// Per-cell keep flags over the 40 rows and 3 channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMask {
    keep: [[bool; CHANNELS]; ROWS],
}

impl CellMask {
    pub fn all() -> Self {
        CellMask {
            keep: [[true; CHANNELS]; ROWS],
        }
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> bool) -> Self {
        let mut keep = [[false; CHANNELS]; ROWS];
        for (row, chans) in keep.iter_mut().enumerate() {
            for (ch, k) in chans.iter_mut().enumerate() {
                *k = f(row, ch);
            }
        }
        CellMask { keep }
    }

    /// Keeps the listed temporal rows and their spectra.
    pub fn rows(temporal_rows: &[usize]) -> Self {
        CellMask::from_fn(|row, _| temporal_rows.contains(&(row % TEMPORAL_ROWS)))
    }

    pub fn keeps(&self, row: usize, ch: usize) -> bool {
        self.keep[row][ch]
    }

    pub fn union(&self, other: &CellMask) -> CellMask {
        CellMask::from_fn(|r, c| self.keep[r][c] || other.keep[r][c])
    }

    pub fn kept_cells(&self) -> usize {
        self.keep.iter().flatten().filter(|k| **k).count()
    }

    pub fn apply(&self, sig: &mut Signature) {
        for row in 0..ROWS {
            for ch in 0..CHANNELS {
                if !self.keep[row][ch] {
                    for col in 0..sig.omega {
                        let idx = sig.index(row, col, ch);
                        sig.tensor[idx] = 0.0;
                    }
                }
            }
        }
    }
}

/// The feature-subset conditions of the ablation table, in table order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AblationCondition {
    All,
    SpectralOnly,
    TemporalOnly,
    GeometricOnly,
    VisualOnly,
    MetricOnly,
    RawGaze,
    GazeVectors,
    MetricAndRawGaze,
    NoMetric,
    NoGeometric,
}

/// Temporal rows derived from the tracker's gaze output.
pub const RAW_GAZE_ROWS: [usize; 5] = [9, 10, 11, 12, 13];
pub const GAZE_VECTOR_ROWS: [usize; 2] = [9, 10];

impl AblationCondition {
    pub const ALL: [AblationCondition; 11] = [
        AblationCondition::All,
        AblationCondition::SpectralOnly,
        AblationCondition::TemporalOnly,
        AblationCondition::GeometricOnly,
        AblationCondition::VisualOnly,
        AblationCondition::MetricOnly,
        AblationCondition::RawGaze,
        AblationCondition::GazeVectors,
        AblationCondition::MetricAndRawGaze,
        AblationCondition::NoMetric,
        AblationCondition::NoGeometric,
    ];

    /// The single-domain conditions.
    pub const SINGLE_DOMAIN: [AblationCondition; 5] = [
        AblationCondition::SpectralOnly,
        AblationCondition::TemporalOnly,
        AblationCondition::GeometricOnly,
        AblationCondition::VisualOnly,
        AblationCondition::MetricOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationCondition::All => "All",
            AblationCondition::SpectralOnly => "Spec-only",
            AblationCondition::TemporalOnly => "Temp-only",
            AblationCondition::GeometricOnly => "Geo-only",
            AblationCondition::VisualOnly => "Visual-only",
            AblationCondition::MetricOnly => "Metric-only",
            AblationCondition::RawGaze => "Raw gaze",
            AblationCondition::GazeVectors => "Gaze vectors",
            AblationCondition::MetricAndRawGaze => "Rows 6 and 7",
            AblationCondition::NoMetric => "No metric",
            AblationCondition::NoGeometric => "No geometric",
        }
    }

    pub fn cell_mask(self) -> CellMask {
        use Domain::*;
        let only = |d: &[Domain]| FeatureMask::new(d.to_vec()).expect("non-empty").cell_mask();
        match self {
            AblationCondition::All => CellMask::all(),
            AblationCondition::SpectralOnly => only(&[Spectral]),
            AblationCondition::TemporalOnly => only(&[Temporal]),
            AblationCondition::GeometricOnly => only(&[Geometric]),
            AblationCondition::VisualOnly => only(&[Visual]),
            AblationCondition::MetricOnly => only(&[Metric]),
            AblationCondition::RawGaze => CellMask::rows(&RAW_GAZE_ROWS),
            AblationCondition::GazeVectors => CellMask::rows(&GAZE_VECTOR_ROWS),
            AblationCondition::MetricAndRawGaze => only(&[Metric]).union(&CellMask::rows(&RAW_GAZE_ROWS)),
            AblationCondition::NoMetric => only(&[Visual, Geometric]),
            AblationCondition::NoGeometric => only(&[Visual, Metric]),
        }
    }
}

// Binary file format.

fn read_exact<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn label_code(label: Label) -> u8 {
    match label {
        Label::Real => 0,
        Label::Fake => 1,
        Label::Unknown => 2,
    }
}

/// Writes signatures in the `.gzsg` layout. All signatures must share ω; an
/// empty list is written with ω = 0.
pub fn write_signatures_to<W: Write>(sigs: &[Signature], writer: W) -> Result<(), SignatureError> {
    let omega = sigs.first().map_or(0, |s| s.omega);
    if let Some(odd) = sigs.iter().find(|s| s.omega != omega) {
        return Err(SignatureError::MixedOmega(omega, odd.omega));
    }
    let too_big = |what: &str| SignatureError::Malformed(format!("{what} does not fit the header field"));
    let count = u32::try_from(sigs.len()).map_err(|_| too_big("count"))?;
    let omega16 = u16::try_from(omega).map_err(|_| too_big("omega"))?;

    let io = |source| SignatureError::Io {
        path: PathBuf::from("<writer>"),
        source,
    };
    let mut w = BufWriter::new(writer);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(io);
    put(MAGIC)?;
    put(&FORMAT_VERSION.to_le_bytes())?;
    put(&count.to_le_bytes())?;
    put(&omega16.to_le_bytes())?;
    put(&(ROWS as u16).to_le_bytes())?;
    put(&(CHANNELS as u16).to_le_bytes())?;
    for sig in sigs {
        if sig.tensor.len() != ROWS * omega * CHANNELS {
            return Err(SignatureError::Malformed(format!(
                "tensor of {} has {} entries",
                sig.video_id,
                sig.tensor.len()
            )));
        }
        let id = sig.video_id.as_bytes();
        let id_len = u16::try_from(id.len()).map_err(|_| too_big("video id"))?;
        put(&id_len.to_le_bytes())?;
        put(id)?;
        put(&sig.start_frame.to_le_bytes())?;
        put(&[label_code(sig.label)])?;
        let mut raw = Vec::with_capacity(sig.tensor.len() * 4);
        for v in &sig.tensor {
            raw.extend_from_slice(&v.to_le_bytes());
        }
        put(&raw)?;
    }
    w.flush().map_err(io)
}

pub fn read_signatures_from<R: Read>(reader: R) -> Result<Vec<Signature>, SignatureError> {
    let mut r = BufReader::new(reader);
    let io = |source| SignatureError::Io {
        path: PathBuf::from("<reader>"),
        source,
    };
    let magic = read_exact::<4>(&mut r).map_err(io)?;
    if &magic != MAGIC {
        return Err(SignatureError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(read_exact(&mut r).map_err(io)?);
    if version != FORMAT_VERSION {
        return Err(SignatureError::VersionMismatch(version));
    }
    let count = u32::from_le_bytes(read_exact(&mut r).map_err(io)?);
    let omega = u16::from_le_bytes(read_exact(&mut r).map_err(io)?) as usize;
    let rows = u16::from_le_bytes(read_exact(&mut r).map_err(io)?) as usize;
    let channels = u16::from_le_bytes(read_exact(&mut r).map_err(io)?) as usize;
    if rows != ROWS || channels != CHANNELS {
        return Err(SignatureError::Malformed(format!(
            "expected {ROWS} rows and {CHANNELS} channels, found {rows} and {channels}"
        )));
    }
    let n = ROWS * omega * CHANNELS;
    let mut sigs = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let id_len = u16::from_le_bytes(read_exact(&mut r).map_err(io)?) as usize;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(io)?;
        let video_id = String::from_utf8(id).map_err(|e| SignatureError::Malformed(e.to_string()))?;
        let start_frame = u32::from_le_bytes(read_exact(&mut r).map_err(io)?);
        let label = match read_exact::<1>(&mut r).map_err(io)?[0] {
            0 => Label::Real,
            1 => Label::Fake,
            2 => Label::Unknown,
            other => return Err(SignatureError::Malformed(format!("label code {other}"))),
        };
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw).map_err(io)?;
        let tensor = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        sigs.push(Signature {
            tensor,
            omega,
            video_id,
            start_frame,
            label,
        });
    }
    Ok(sigs)
}

fn with_path(err: SignatureError, path: &Path) -> SignatureError {
    match err {
        SignatureError::Io { source, .. } => SignatureError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

pub fn write_signatures(sigs: &[Signature], path: impl AsRef<Path>) -> Result<(), SignatureError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| SignatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_signatures_to(sigs, file).map_err(|e| with_path(e, path))
}

pub fn read_signatures(path: impl AsRef<Path>) -> Result<Vec<Signature>, SignatureError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| SignatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_signatures_from(file).map_err(|e| with_path(e, path))
}
