//! Pipeline commands behind the `gazesig` binary: synthesize tracks, build
//! signatures, train, evaluate, ablate and render.
//!
//! Each command is a plain function over a [`RunConfig`] so examples and
//! tests can drive the pipeline without spawning processes.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    load_model, predict_batch, save_model, train_with_validation, ModelError, ModelState, TrainConfig,
    TrainReport,
};
use crate::signature::{
    read_signatures, track_signatures, write_signatures, AblationCondition, FeatureMask, Signature,
    SignatureError, DEFAULT_D_PLUS_MM, DEFAULT_OMEGA,
};
use crate::synth::{gen_fake_track, gen_real_track, FakePerturbation, SynthConfig, SynthError};
use crate::trackio::{parse_track, write_track, Label, TrackError};
use crate::verdict::{aggregate, Scheme, VerdictError, VideoVerdict};

/// ω values of the window-length sweep.
pub const OMEGA_SWEEP: [usize; 4] = [16, 32, 64, 128];
pub const TRACK_EXTENSION: &str = ".gzt.jsonl";
pub const TRAIN_FRACTION: f64 = 0.7;
pub const FOLDS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Data(_) | HarnessError::Io { .. } => 2,
            HarnessError::Internal(_) => 3,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl From<TrackError> for HarnessError {
    fn from(e: TrackError) -> Self {
        match e {
            TrackError::Io { path, source } => HarnessError::Io { path, source },
            other => HarnessError::Data(other.to_string()),
        }
    }
}

impl From<SignatureError> for HarnessError {
    fn from(e: SignatureError) -> Self {
        match e {
            SignatureError::Io { path, source } => HarnessError::Io { path, source },
            other => HarnessError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io { path, source } => HarnessError::Io { path, source },
            ModelError::InvalidConfig(m) => HarnessError::Usage(m),
            other => HarnessError::Data(other.to_string()),
        }
    }
}

impl From<SynthError> for HarnessError {
    fn from(e: SynthError) -> Self {
        HarnessError::Usage(e.to_string())
    }
}

impl From<VerdictError> for HarnessError {
    fn from(e: VerdictError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[serde(rename = "random_video_70_30")]
    RandomVideo7030,
    #[serde(rename = "kfold_5")]
    Kfold5,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::RandomVideo7030 => "random_video_70_30",
            Split::Kfold5 => "kfold_5",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "random_video_70_30" => Ok(Split::RandomVideo7030),
            "kfold_5" => Ok(Split::Kfold5),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

/// Settings shared by all commands.
///
/// The config file is UTF-8 text with one `key = value` per line; `#` starts
/// a comment line. Keys: `omega`, `d_plus_mm`, `split`, `scheme`, `seed`,
/// `feature_mask`, `out`, the training keys `learning_rate`, `batch_size`,
/// `epochs`, `validate_every`, `dropout_p`, `leaky_slope`, and the synthesis
/// keys `n_per_class`, `n_frames`, `gaze_noise_deg`, `fakes` (comma list of
/// `kind:strength`).
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub omega: usize,
    pub d_plus_mm: f64,
    pub split: Split,
    pub scheme: Scheme,
    pub seed: u64,
    pub feature_mask: FeatureMask,
    pub train: TrainConfig,
    pub n_per_class: usize,
    pub n_frames: usize,
    pub gaze_noise_deg: f64,
    pub fakes: Vec<FakePerturbation>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            omega: DEFAULT_OMEGA,
            d_plus_mm: DEFAULT_D_PLUS_MM,
            split: Split::RandomVideo7030,
            scheme: Scheme::LogOdds,
            seed: 0,
            feature_mask: FeatureMask::all(),
            train: TrainConfig::default(),
            n_per_class: 200,
            n_frames: 128,
            gaze_noise_deg: SynthConfig::default().gaze_noise_deg,
            fakes: FakePerturbation::default_recipe(),
            out: None,
        }
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| HarnessError::Usage(format!("invalid value '{v}' for {key}")))
        }
        let usage = HarnessError::Usage;
        match key {
            "omega" => self.omega = parse(key, value)?,
            "d_plus_mm" => self.d_plus_mm = parse(key, value)?,
            "split" => self.split = value.parse().map_err(usage)?,
            "scheme" => self.scheme = value.parse().map_err(usage)?,
            "seed" => self.seed = parse(key, value)?,
            "feature_mask" | "mask" => self.feature_mask = value.parse().map_err(usage)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "n_per_class" => self.n_per_class = parse(key, value)?,
            "n_frames" => self.n_frames = parse(key, value)?,
            "gaze_noise_deg" => self.gaze_noise_deg = parse(key, value)?,
            "fakes" => {
                self.fakes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<FakePerturbation>().map_err(|e| usage(e.to_string())))
                    .collect::<Result<_>>()?
            }
            _ => self.train.set(key, value).map_err(usage)?,
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_error(path))?;
        Self::parse_text(&text)
    }

    /// Training settings with the run's seed and ω.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            omega: self.omega,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_plus_mm.is_finite() && self.d_plus_mm > 0.0) {
            return Err(HarnessError::Usage("d_plus_mm must be positive".into()));
        }
        self.train_config().validate().map_err(HarnessError::from)
    }

    fn out_dir(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_error(dir))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_error(path))
}

// synth

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub video_id: String,
    pub label: Label,
    pub seed: u64,
    pub perturbations: Vec<FakePerturbation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_frames: usize,
    pub fps: f64,
    pub tracks: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Per-track generator seeds for a run seed.
pub fn track_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<u32>() as u64).collect()
}

/// Writes `n_per_class` real tracks and as many paired fakes into the output
/// directory, plus a manifest.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Manifest> {
    if cfg.n_per_class == 0 {
        return Err(HarnessError::Usage("n_per_class must be at least 1".into()));
    }
    if cfg.fakes.is_empty() {
        return Err(HarnessError::Usage("fakes must list at least one perturbation".into()));
    }
    let dir = cfg.out_dir("tracks");
    ensure_dir(&dir)?;
    let base = SynthConfig {
        n_frames: cfg.n_frames,
        gaze_noise_deg: cfg.gaze_noise_deg,
        ..SynthConfig::default()
    };
    let mut tracks = Vec::with_capacity(2 * cfg.n_per_class);
    for seed in track_seeds(cfg.seed, cfg.n_per_class) {
        let sc = SynthConfig { seed, ..base.clone() };
        for (track, perturbations) in [
            (gen_real_track(&sc)?, Vec::new()),
            (gen_fake_track(&sc, &cfg.fakes)?, cfg.fakes.clone()),
        ] {
            let file = format!("{}{TRACK_EXTENSION}", track.video_id);
            write_track(&track, dir.join(&file))?;
            tracks.push(ManifestEntry {
                file,
                video_id: track.video_id.clone(),
                label: track.label,
                seed,
                perturbations,
            });
        }
    }
    let manifest = Manifest {
        seed: cfg.seed,
        n_frames: base.n_frames,
        fps: base.fps,
        tracks,
    };
    write_json(&manifest, &dir.join(MANIFEST_FILE))?;
    log::info!("wrote {} tracks to {}", manifest.tracks.len(), dir.display());
    Ok(manifest)
}

// signatures

/// Track files of a directory in name order.
pub fn track_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(TRACK_EXTENSION)))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::Data(format!("no {TRACK_EXTENSION} files in {}", dir.display())));
    }
    Ok(files)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignatureSummary {
    pub omega: usize,
    /// `(video_id, sequence count)` per track.
    pub per_track: Vec<(String, usize)>,
    pub total: usize,
}

fn check_signatures(sigs: &[Signature]) -> Result<()> {
    for s in sigs {
        if let Some(v) = s.tensor.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(HarnessError::Internal(format!(
                "signature of {} has entry {v} outside [0, 1)",
                s.video_id
            )));
        }
    }
    Ok(())
}

/// Signatures of every track in `track_dir` at `omega`, masked by `mask`.
pub fn build_signatures(
    track_dir: &Path,
    omega: usize,
    d_plus_mm: f64,
    mask: &FeatureMask,
) -> Result<(Vec<Signature>, SignatureSummary)> {
    let cells = mask.cell_mask();
    let files = track_files(track_dir)?;
    let one = |path: &PathBuf| -> Result<(String, Vec<Signature>)> {
        let track = parse_track(path)?;
        let mut sigs = track_signatures(&track, omega, d_plus_mm)?;
        sigs.iter_mut().for_each(|s| cells.apply(s));
        Ok((track.video_id, sigs))
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = files.len().div_ceil(workers);
    let results: Vec<Result<(String, Vec<Signature>)>> = if workers == 1 {
        files.iter().map(one).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = files
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("signature worker panicked"))
                .collect()
        })
    };
    let mut all = Vec::new();
    let mut per_track = Vec::new();
    for r in results {
        let (video_id, sigs) = r?;
        if sigs.is_empty() {
            log::warn!("no valid sequences for {video_id} at omega {omega}");
        } else {
            log::debug!("{video_id}: {} sequences", sigs.len());
        }
        per_track.push((video_id, sigs.len()));
        all.extend(sigs);
    }
    check_signatures(&all)?;
    let summary = SignatureSummary {
        omega,
        total: all.len(),
        per_track,
    };
    Ok((all, summary))
}

/// Builds signatures for every track in `track_dir` and writes them to the
/// output path (default `signatures.gzsg`).
pub fn cmd_signatures(track_dir: &Path, cfg: &RunConfig) -> Result<SignatureSummary> {
    cfg.validate()?;
    let (sigs, summary) = build_signatures(track_dir, cfg.omega, cfg.d_plus_mm, &cfg.feature_mask)?;
    if sigs.is_empty() {
        log::warn!("no signatures produced at omega {}", cfg.omega);
    }
    let out = cfg.out_dir("signatures.gzsg");
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_signatures(&sigs, &out)?;
    log::info!("wrote {} signatures to {}", summary.total, out.display());
    Ok(summary)
}

// splits and evaluation

/// Sorted distinct video ids per label.
fn videos_by_label(sigs: &[Signature]) -> BTreeMap<Label, Vec<String>> {
    let mut map: BTreeMap<Label, Vec<String>> = BTreeMap::new();
    for s in sigs {
        let ids = map.entry(s.label).or_default();
        if !ids.contains(&s.video_id) {
            ids.push(s.video_id.clone());
        }
    }
    map.values_mut().for_each(|v| v.sort());
    map
}

/// Train/test index pairs. Videos are split per label so each side keeps the
/// class balance; sequences of one video never straddle the split.
pub fn split_indices(sigs: &[Signature], split: Split, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of: BTreeMap<String, usize> = BTreeMap::new();
    let folds = match split {
        Split::RandomVideo7030 => 1,
        Split::Kfold5 => FOLDS,
    };
    for (_, mut ids) in videos_by_label(sigs) {
        ids.shuffle(&mut rng);
        match split {
            Split::RandomVideo7030 => {
                let n_train = (ids.len() as f64 * TRAIN_FRACTION).round() as usize;
                for (k, id) in ids.into_iter().enumerate() {
                    // Fold 0 is the test side.
                    fold_of.insert(id, usize::from(k < n_train));
                }
            }
            Split::Kfold5 => {
                for (k, id) in ids.into_iter().enumerate() {
                    fold_of.insert(id, k % FOLDS);
                }
            }
        }
    }
    (0..folds)
        .map(|f| {
            let test_fold = match split {
                Split::RandomVideo7030 => 0,
                Split::Kfold5 => f,
            };
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..sigs.len()).partition(|&i| fold_of[&sigs[i].video_id] == test_fold);
            (train, test)
        })
        .collect()
}

fn pick(sigs: &[Signature], idx: &[usize]) -> Vec<Signature> {
    idx.iter().map(|&i| sigs[i].clone()).collect()
}

/// Counts with fake as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    fn add(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Fake, Label::Fake) => self.tp += 1,
            (Label::Real, Label::Real) => self.tn += 1,
            (Label::Real, Label::Fake) => self.fp += 1,
            (Label::Fake, Label::Real) => self.fn_ += 1,
            _ => {}
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }
}

/// One line of `verdicts.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictLine {
    #[serde(flatten)]
    pub verdict: VideoVerdict,
    pub truth: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub video_accuracy: Option<f64>,
    pub confusion: Confusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_sequences: usize,
    pub n_videos: usize,
    pub sequence_accuracy: Option<f64>,
    pub sequence_confusion: Confusion,
    pub schemes: Vec<SchemeSummary>,
}

impl EvalSummary {
    pub fn video_accuracy(&self, scheme: Scheme) -> Option<f64> {
        self.schemes.iter().find(|s| s.scheme == scheme).and_then(|s| s.video_accuracy)
    }
}

fn threshold_label(p: f64) -> Label {
    if p > 0.5 {
        Label::Fake
    } else {
        Label::Real
    }
}

/// Summary statistics recomputed from verdict lines. Sequence counts use the
/// lines of the first scheme present.
pub fn summarize(lines: &[VerdictLine]) -> EvalSummary {
    let mut schemes: Vec<Scheme> = Vec::new();
    for l in lines {
        if !schemes.contains(&l.verdict.scheme) {
            schemes.push(l.verdict.scheme);
        }
    }
    let first = schemes.first().copied();
    let mut sequence_confusion = Confusion::default();
    let mut n_sequences = 0;
    let mut n_videos = 0;
    for l in lines.iter().filter(|l| Some(l.verdict.scheme) == first) {
        n_videos += 1;
        n_sequences += l.verdict.sequence_probs.len();
        for &p in &l.verdict.sequence_probs {
            sequence_confusion.add(l.truth, threshold_label(p));
        }
    }
    let schemes = schemes
        .into_iter()
        .map(|scheme| {
            let mut confusion = Confusion::default();
            for l in lines.iter().filter(|l| l.verdict.scheme == scheme) {
                confusion.add(l.truth, l.verdict.label);
            }
            SchemeSummary {
                scheme,
                video_accuracy: confusion.accuracy(),
                confusion,
            }
        })
        .collect();
    EvalSummary {
        n_sequences,
        n_videos,
        sequence_accuracy: sequence_confusion.accuracy(),
        sequence_confusion,
        schemes,
    }
}

/// Per-video verdicts for every scheme in `schemes`, videos in id order.
pub fn verdict_lines(video_probs: &BTreeMap<String, (Label, Vec<f64>)>, schemes: &[Scheme]) -> Result<Vec<VerdictLine>> {
    let mut lines = Vec::new();
    for &scheme in schemes {
        for (id, (truth, probs)) in video_probs {
            lines.push(VerdictLine {
                verdict: aggregate(id, probs, scheme)?,
                truth: *truth,
            });
        }
    }
    Ok(lines)
}

/// Sequence probabilities grouped by video.
pub fn group_probs(sigs: &[Signature], probs: &[f64]) -> BTreeMap<String, (Label, Vec<f64>)> {
    let mut map: BTreeMap<String, (Label, Vec<f64>)> = BTreeMap::new();
    for (s, &p) in sigs.iter().zip(probs) {
        map.entry(s.video_id.clone()).or_insert((s.label, Vec::new())).1.push(p);
    }
    map
}

/// Runs the model over `sigs` and scores every voting scheme.
pub fn evaluate(model: &ModelState, sigs: &[Signature]) -> Result<(Vec<VerdictLine>, EvalSummary)> {
    if sigs.is_empty() {
        return Err(HarnessError::Data("no signatures to evaluate".into()));
    }
    let probs = predict_batch(model, sigs)?;
    if let Some(p) = probs.iter().find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p))) {
        return Err(HarnessError::Internal(format!("sequence probability {p} outside [0, 1]")));
    }
    let lines = verdict_lines(&group_probs(sigs, &probs), &Scheme::ALL)?;
    let summary = summarize(&lines);
    Ok((lines, summary))
}

// train

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train_videos: usize,
    pub n_test_videos: usize,
    pub n_train_sequences: usize,
    pub n_test_sequences: usize,
    pub report: TrainReport,
    pub test: EvalSummary,
    pub model_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation.
    pub fn of(xs: &[f64]) -> MeanStd {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub split: Split,
    pub scheme: Scheme,
    pub seed: u64,
    pub omega: usize,
    pub config: TrainConfig,
    pub folds: Vec<FoldMetrics>,
    /// Across folds, present for k-fold runs.
    pub sequence_accuracy: Option<MeanStd>,
    pub video_accuracy: Option<MeanStd>,
}

pub const METRICS_FILE: &str = "metrics.json";

fn distinct_videos(sigs: &[Signature]) -> usize {
    let mut ids: Vec<&str> = sigs.iter().map(|s| s.video_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

/// Trains on a split of `sigs`; returns the fitted models and metrics.
pub fn train_split(sigs: &[Signature], cfg: &RunConfig) -> Result<(Vec<ModelState>, TrainMetrics)> {
    cfg.validate()?;
    if sigs.is_empty() {
        return Err(HarnessError::Data("signature file is empty".into()));
    }
    let tcfg = TrainConfig {
        omega: sigs[0].omega,
        ..cfg.train_config()
    };
    let mut models = Vec::new();
    let mut folds = Vec::new();
    for (k, (train_idx, test_idx)) in split_indices(sigs, cfg.split, cfg.seed).into_iter().enumerate() {
        let (train, test) = (pick(sigs, &train_idx), pick(sigs, &test_idx));
        if test.is_empty() {
            return Err(HarnessError::Data("split leaves no test videos".into()));
        }
        let trained = train_with_validation(&train, &test, &tcfg)?;
        if !trained.model.net.all_finite() {
            return Err(HarnessError::Internal("training produced non-finite parameters".into()));
        }
        let (_, summary) = evaluate(&trained.model, &test)?;
        let model_file = match cfg.split {
            Split::RandomVideo7030 => "model.gzmd".to_string(),
            Split::Kfold5 => format!("model_fold{k}.gzmd"),
        };
        log::info!(
            "fold {k}: S.Acc {:?}, V.Acc ({}) {:?}",
            summary.sequence_accuracy,
            cfg.scheme,
            summary.video_accuracy(cfg.scheme)
        );
        folds.push(FoldMetrics {
            fold: k,
            n_train_videos: distinct_videos(&train),
            n_test_videos: distinct_videos(&test),
            n_train_sequences: train.len(),
            n_test_sequences: test.len(),
            report: trained.report,
            test: summary,
            model_file,
        });
        models.push(trained.model);
    }
    let across = |f: &dyn Fn(&FoldMetrics) -> Option<f64>| {
        let xs: Vec<f64> = folds.iter().filter_map(f).collect();
        (cfg.split == Split::Kfold5 && xs.len() == folds.len()).then(|| MeanStd::of(&xs))
    };
    let metrics = TrainMetrics {
        split: cfg.split,
        scheme: cfg.scheme,
        seed: cfg.seed,
        omega: tcfg.omega,
        config: tcfg.clone(),
        sequence_accuracy: across(&|f| f.test.sequence_accuracy),
        video_accuracy: across(&|f| f.test.video_accuracy(cfg.scheme)),
        folds,
    };
    Ok((models, metrics))
}

/// Splits by video, trains and writes models, held-out signature subsets and
/// `metrics.json` into the output directory.
pub fn cmd_train(sig_file: &Path, cfg: &RunConfig) -> Result<TrainMetrics> {
    let sigs = read_signatures(sig_file)?;
    let (models, metrics) = train_split(&sigs, cfg)?;
    let dir = cfg.out_dir("train-out");
    ensure_dir(&dir)?;
    let splits = split_indices(&sigs, cfg.split, cfg.seed);
    for ((model, fold), (train_idx, test_idx)) in models.iter().zip(&metrics.folds).zip(&splits) {
        save_model(model, dir.join(&fold.model_file))?;
        let suffix = match cfg.split {
            Split::RandomVideo7030 => String::new(),
            Split::Kfold5 => format!("_fold{}", fold.fold),
        };
        write_signatures(&pick(&sigs, train_idx), dir.join(format!("train{suffix}.gzsg")))?;
        write_signatures(&pick(&sigs, test_idx), dir.join(format!("test{suffix}.gzsg")))?;
    }
    write_json(&metrics, &dir.join(METRICS_FILE))?;
    Ok(metrics)
}

// eval

pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// The configured scheme, reported first.
    pub scheme: Scheme,
    pub summary: EvalSummary,
}

pub fn read_verdict_lines(path: &Path) -> Result<Vec<VerdictLine>> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

/// Scores a signature file with a saved model; writes `verdicts.jsonl` and
/// `eval.json` into the output directory.
pub fn cmd_eval(model_path: &Path, sig_file: &Path, cfg: &RunConfig) -> Result<EvalReport> {
    let model = load_model(model_path)?;
    let sigs = read_signatures(sig_file)?;
    let (lines, summary) = evaluate(&model, &sigs)?;
    let dir = cfg.out_dir("eval-out");
    ensure_dir(&dir)?;
    let mut text = String::new();
    for l in &lines {
        let json = serde_json::to_string(l).map_err(|e| HarnessError::Internal(e.to_string()))?;
        writeln!(text, "{json}").expect("writing to a String");
    }
    let path = dir.join(VERDICTS_FILE);
    fs::write(&path, text).map_err(io_error(&path))?;
    let report = EvalReport {
        scheme: cfg.scheme,
        summary,
    };
    write_json(&report, &dir.join(EVAL_FILE))?;
    Ok(report)
}

// ablate

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub omega: usize,
    pub n_train_sequences: usize,
    pub n_test_sequences: usize,
    pub sequence_accuracy: Option<f64>,
    pub video_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub scheme: Scheme,
    pub seed: u64,
    pub omega_rows: Vec<AblationRow>,
    pub condition_rows: Vec<AblationRow>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.2}", 100.0 * x))
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>8} {:>8}", "omega", "S.Acc", "V.Acc")?;
        for r in &self.omega_rows {
            writeln!(f, "{:<14} {:>8} {:>8}", r.omega, pct(r.sequence_accuracy), pct(r.video_accuracy))?;
        }
        writeln!(f)?;
        writeln!(f, "{:<14} {:>8} {:>8}", "condition", "S.Acc", "V.Acc")?;
        for r in &self.condition_rows {
            writeln!(f, "{:<14} {:>8} {:>8}", r.name, pct(r.sequence_accuracy), pct(r.video_accuracy))?;
        }
        Ok(())
    }
}

fn ablation_row(name: String, sigs: &[Signature], cfg: &RunConfig) -> Result<AblationRow> {
    let omega = sigs.first().map_or(cfg.omega, |s| s.omega);
    let empty = AblationRow {
        name: name.clone(),
        omega,
        n_train_sequences: 0,
        n_test_sequences: 0,
        sequence_accuracy: None,
        video_accuracy: None,
    };
    if sigs.is_empty() {
        log::warn!("{name}: no signatures at omega {omega}");
        return Ok(empty);
    }
    let run = RunConfig {
        omega,
        split: Split::RandomVideo7030,
        ..cfg.clone()
    };
    let (_, metrics) = train_split(sigs, &run)?;
    let fold = &metrics.folds[0];
    log::info!(
        "{name}: S.Acc {}, V.Acc {}",
        pct(fold.test.sequence_accuracy),
        pct(fold.test.video_accuracy(cfg.scheme))
    );
    Ok(AblationRow {
        n_train_sequences: fold.n_train_sequences,
        n_test_sequences: fold.n_test_sequences,
        sequence_accuracy: fold.test.sequence_accuracy,
        video_accuracy: fold.test.video_accuracy(cfg.scheme),
        ..empty
    })
}

/// The ω sweep and the feature-condition table on the tracks of one
/// directory, each cell trained and tested on the same 70/30 video split.
pub fn ablate(track_dir: &Path, cfg: &RunConfig) -> Result<AblationTable> {
    cfg.validate()?;
    let mut omega_rows = Vec::new();
    for omega in OMEGA_SWEEP {
        let (sigs, _) = build_signatures(track_dir, omega, cfg.d_plus_mm, &FeatureMask::all())?;
        omega_rows.push(ablation_row(omega.to_string(), &sigs, cfg)?);
    }
    let (base, _) = build_signatures(track_dir, cfg.omega, cfg.d_plus_mm, &FeatureMask::all())?;
    let mut condition_rows = Vec::new();
    for cond in AblationCondition::ALL {
        let mask = cond.cell_mask();
        let sigs: Vec<Signature> = base.iter().map(|s| s.masked(&mask)).collect();
        condition_rows.push(ablation_row(cond.name().to_string(), &sigs, cfg)?);
    }
    Ok(AblationTable {
        scheme: cfg.scheme,
        seed: cfg.seed,
        omega_rows,
        condition_rows,
    })
}

pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TEXT: &str = "ablation.txt";

/// Runs [`ablate`] and writes the table as JSON and text.
pub fn cmd_ablate(track_dir: &Path, cfg: &RunConfig) -> Result<AblationTable> {
    let table = ablate(track_dir, cfg)?;
    let dir = cfg.out_dir("ablate-out");
    ensure_dir(&dir)?;
    write_json(&table, &dir.join(ABLATION_JSON))?;
    let path = dir.join(ABLATION_TEXT);
    fs::write(&path, table.to_string()).map_err(io_error(&path))?;
    Ok(table)
}

// render

/// Binary PPM (P6) of a signature: 40 rows by ω columns, channels as RGB,
/// each value scaled by 255 and truncated.
pub fn render_ppm(sig: &Signature) -> Vec<u8> {
    let rows = crate::signature::ROWS;
    let mut out = format!("P6\n{} {}\n255\n", sig.omega, rows).into_bytes();
    out.extend(sig.tensor.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0) as u8));
    out
}

/// Writes one `<video>_<start>.ppm` per signature into the output directory.
pub fn cmd_render(sig_file: &Path, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sigs = read_signatures(sig_file)?;
    let dir = cfg.out_dir("render-out");
    ensure_dir(&dir)?;
    let mut written = Vec::with_capacity(sigs.len());
    for sig in &sigs {
        let name: String = sig
            .video_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let path = dir.join(format!("{name}_{:06}.ppm", sig.start_frame));
        fs::write(&path, render_ppm(sig)).map_err(io_error(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(id: &str, label: Label) -> Signature {
        Signature::zeros(4, id, label)
    }

    #[test]
    fn config_text_and_overrides() {
        let cfg = RunConfig::parse_text(
            "# comment\nomega = 16\nsplit = kfold_5\nscheme = majority\nfeature_mask = visual,temporal\nepochs = 7\nfakes = noise:1.5, smooth:5\n",
        )
        .unwrap();
        assert_eq!(cfg.omega, 16);
        assert_eq!(cfg.split, Split::Kfold5);
        assert_eq!(cfg.scheme, Scheme::Majority);
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.fakes.len(), 2);
        assert_eq!(cfg.train_config().omega, 16);
        assert!(RunConfig::parse_text("omega 16").is_err());
        assert!(RunConfig::parse_text("colour = red").is_err());
        assert_eq!(RunConfig::parse_text("split = thirds").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn split_is_by_video_and_stratified() {
        let mut sigs = Vec::new();
        for v in 0..20 {
            for _ in 0..3 {
                let label = if v % 2 == 0 { Label::Real } else { Label::Fake };
                sigs.push(sig(&format!("v{v}"), label));
            }
        }
        let folds = split_indices(&sigs, Split::RandomVideo7030, 1);
        assert_eq!(folds.len(), 1);
        let (train, test) = &folds[0];
        assert_eq!(train.len() + test.len(), sigs.len());
        let train_ids: std::collections::BTreeSet<_> = train.iter().map(|&i| &sigs[i].video_id).collect();
        assert!(test.iter().all(|&i| !train_ids.contains(&sigs[i].video_id)));
        assert_eq!(train_ids.len(), 14);
        let fakes = train_ids.iter().filter(|id| id[1..].parse::<u32>().unwrap() % 2 == 1).count();
        assert_eq!(fakes, 7);
        assert_eq!(folds, split_indices(&sigs, Split::RandomVideo7030, 1));

        let k = split_indices(&sigs, Split::Kfold5, 1);
        assert_eq!(k.len(), 5);
        let mut seen = vec![0; sigs.len()];
        for (_, test) in &k {
            test.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn summary_matches_lines() {
        let mut videos = BTreeMap::new();
        videos.insert("a".to_string(), (Label::Fake, vec![0.9, 0.4, 0.4]));
        videos.insert("b".to_string(), (Label::Real, vec![0.5, 0.5]));
        let lines = verdict_lines(&videos, &Scheme::ALL).unwrap();
        assert_eq!(lines.len(), 8);
        let s = summarize(&lines);
        assert_eq!(s.n_videos, 2);
        assert_eq!(s.n_sequences, 5);
        assert_eq!(s.sequence_accuracy, Some(3.0 / 5.0));
        assert_eq!(s.video_accuracy(Scheme::Majority), Some(0.5));
        assert_eq!(s.video_accuracy(Scheme::Mean), Some(1.0));
    }

    #[test]
    fn all_half_probs_give_real_prevalence() {
        let mut videos = BTreeMap::new();
        for (id, label) in [("r1", Label::Real), ("r2", Label::Real), ("r3", Label::Real), ("f1", Label::Fake)] {
            videos.insert(id.to_string(), (label, vec![0.5; 3]));
        }
        let s = summarize(&verdict_lines(&videos, &[Scheme::LogOdds]).unwrap());
        assert_eq!(s.video_accuracy(Scheme::LogOdds), Some(0.75));
    }

    #[test]
    fn ppm_layout() {
        let mut s = Signature::zeros(4, "v", Label::Real);
        let i = s.index(1, 2, 0);
        s.tensor[i] = 0.999;
        let ppm = render_ppm(&s);
        let header = b"P6\n4 40\n255\n";
        assert_eq!(&ppm[..header.len()], header);
        let pixels = &ppm[header.len()..];
        assert_eq!(pixels.len(), 40 * 4 * 3);
        assert_eq!(pixels[(4 + 2) * 3], 254);
        assert_eq!(pixels.iter().filter(|&&p| p != 0).count(), 1);
    }

    #[test]
    fn mean_std_uses_sample_deviation() {
        let m = MeanStd::of(&[0.9, 0.92, 0.88]);
        assert!((m.mean - 0.9).abs() < 1e-12);
        assert!((m.std - 0.02).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn summary_agrees_with_lines(
            videos in proptest::collection::vec((proptest::bool::ANY, proptest::collection::vec(0.0f64..=1.0, 1..6)), 1..12)
        ) {
            let map: BTreeMap<String, (Label, Vec<f64>)> = videos
                .iter()
                .enumerate()
                .map(|(k, (fake, probs))| {
                    let label = if *fake { Label::Fake } else { Label::Real };
                    (format!("v{k:02}"), (label, probs.clone()))
                })
                .collect();
            let lines = verdict_lines(&map, &Scheme::ALL).unwrap();
            let s = summarize(&lines);
            let n_seq: usize = videos.iter().map(|v| v.1.len()).sum();
            proptest::prop_assert_eq!(s.n_sequences, n_seq);
            proptest::prop_assert_eq!(s.n_videos, videos.len());
            let correct_seq = map
                .values()
                .flat_map(|(l, ps)| ps.iter().map(move |&p| threshold_label(p) == *l))
                .filter(|&c| c)
                .count();
            proptest::prop_assert_eq!(s.sequence_accuracy, Some(correct_seq as f64 / n_seq as f64));
            for scheme in Scheme::ALL {
                let correct = map
                    .iter()
                    .filter(|(id, (l, ps))| aggregate(id, ps, scheme).unwrap().label == *l)
                    .count();
                proptest::prop_assert_eq!(s.video_accuracy(scheme), Some(correct as f64 / videos.len() as f64));
            }
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Usage("x".into()).exit_code(), 1);
        assert_eq!(HarnessError::Data("x".into()).exit_code(), 2);
        assert_eq!(HarnessError::Internal("x".into()).exit_code(), 3);
        let e: HarnessError = ModelError::ShapeMismatch { expected: 1, found: 2 }.into();
        assert_eq!(e.exit_code(), 2);
    }
}
