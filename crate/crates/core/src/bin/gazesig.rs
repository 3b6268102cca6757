use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gazesig::harness::{self, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "gazesig", version, about = "Eye and gaze signatures for deep-fake detection")]
struct Cli {
    /// `key = value` run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    omega: Option<usize>,
    /// Voting scheme: mean, majority, confidence, log_odds.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Comma list of feature domains to keep, or `all`.
    #[arg(long, global = true)]
    mask: Option<String>,
    /// Output file (signatures) or directory (everything else).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate paired real and fake synthetic tracks.
    Synth {
        /// Tracks per class.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        /// Fake recipe, e.g. `noise:1.5,asymmetry:30,smooth:5`.
        #[arg(long)]
        fakes: Option<String>,
    },
    /// Build signatures for every track in a directory.
    Signatures { tracks: PathBuf },
    /// Train on a signature file with a video-level split.
    Train {
        signatures: PathBuf,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a signature file with a saved model.
    Eval { model: PathBuf, signatures: PathBuf },
    /// Window-length and feature-condition ablation over a track directory.
    Ablate {
        tracks: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write each signature as a PPM image.
    Render { signatures: PathBuf },
}

fn config(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut overrides: Vec<(&str, String)> = Vec::new();
    if let Some(v) = cli.seed {
        overrides.push(("seed", v.to_string()));
    }
    if let Some(v) = cli.omega {
        overrides.push(("omega", v.to_string()));
    }
    if let Some(v) = &cli.scheme {
        overrides.push(("scheme", v.clone()));
    }
    if let Some(v) = &cli.mask {
        overrides.push(("feature_mask", v.clone()));
    }
    match &cli.command {
        Command::Synth { n, frames, fakes } => {
            overrides.extend(n.map(|v| ("n_per_class", v.to_string())));
            overrides.extend(frames.map(|v| ("n_frames", v.to_string())));
            overrides.extend(fakes.clone().map(|v| ("fakes", v)));
        }
        Command::Train { split, epochs, .. } => {
            overrides.extend(split.clone().map(|v| ("split", v)));
            overrides.extend(epochs.map(|v| ("epochs", v.to_string())));
        }
        Command::Ablate { epochs, .. } => overrides.extend(epochs.map(|v| ("epochs", v.to_string()))),
        _ => {}
    }
    for (k, v) in overrides {
        cfg.set(k, &v)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.2}%", 100.0 * x))
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Synth { .. } => {
            let m = harness::cmd_synth(&cfg)?;
            println!("{} tracks", m.tracks.len());
        }
        Command::Signatures { tracks } => {
            let s = harness::cmd_signatures(tracks, &cfg)?;
            println!("{} signatures from {} tracks", s.total, s.per_track.len());
        }
        Command::Train { signatures, .. } => {
            let m = harness::cmd_train(signatures, &cfg)?;
            for f in &m.folds {
                println!(
                    "fold {}: S.Acc {} V.Acc {}",
                    f.fold,
                    pct(f.test.sequence_accuracy),
                    pct(f.test.video_accuracy(cfg.scheme))
                );
            }
            if let (Some(s), Some(v)) = (&m.sequence_accuracy, &m.video_accuracy) {
                println!(
                    "mean S.Acc {:.2}% (std {:.2}) V.Acc {:.2}% (std {:.2})",
                    100.0 * s.mean,
                    100.0 * s.std,
                    100.0 * v.mean,
                    100.0 * v.std
                );
            }
        }
        Command::Eval { model, signatures } => {
            let r = harness::cmd_eval(model, signatures, &cfg)?;
            println!("S.Acc {}", pct(r.summary.sequence_accuracy));
            for s in &r.summary.schemes {
                println!("V.Acc {:<10} {}", s.scheme.as_str(), pct(s.video_accuracy));
            }
        }
        Command::Ablate { tracks, .. } => print!("{}", harness::cmd_ablate(tracks, &cfg)?),
        Command::Render { signatures } => {
            println!("{} images", harness::cmd_render(signatures, &cfg)?.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gazesig: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
