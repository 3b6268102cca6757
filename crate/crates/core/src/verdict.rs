//! Video-level voting over per-sequence fake probabilities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trackio::Label;

/// Probabilities are clamped into `[ε, 1 − ε]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerdictError {
    #[error("video {0} has no sequence predictions")]
    EmptyPrediction(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Mean probability, fake above 0.5.
    Mean,
    /// Fake when more than half of the sequences vote fake.
    Majority,
    /// Mean signed confidence `2p − 1`, fake above 0.
    Confidence,
    /// Mean log-odds `log(p / (1 − p))`, fake above 0.
    #[default]
    LogOdds,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Mean, Scheme::Majority, Scheme::Confidence, Scheme::LogOdds];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mean => "mean",
            Scheme::Majority => "majority",
            Scheme::Confidence => "confidence",
            Scheme::LogOdds => "log_odds",
        }
    }

    /// Applies the scheme's decision rule to a score; ties resolve to real.
    pub fn decide(self, score: f64) -> Label {
        let threshold = match self {
            Scheme::Mean | Scheme::Majority => 0.5,
            Scheme::Confidence | Scheme::LogOdds => 0.0,
        };
        if score > threshold {
            Label::Fake
        } else {
            Label::Real
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s.trim())
            .ok_or_else(|| format!("unknown voting scheme '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoVerdict {
    pub video_id: String,
    pub scheme: Scheme,
    pub score: f64,
    pub label: Label,
    pub n_sequences: usize,
    pub sequence_probs: Vec<f64>,
}

fn log_odds(p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    p.ln() - (1.0 - p).ln()
}

/// Scores a list of sequence probabilities under `scheme`.
pub fn score(probs: &[f64], scheme: Scheme) -> f64 {
    let n = probs.len() as f64;
    match scheme {
        Scheme::Mean => probs.iter().sum::<f64>() / n,
        Scheme::Majority => probs.iter().filter(|&&p| p > 0.5).count() as f64 / n,
        Scheme::Confidence => probs.iter().map(|p| 2.0 * p - 1.0).sum::<f64>() / n,
        Scheme::LogOdds => probs.iter().map(|&p| log_odds(p)).sum::<f64>() / n,
    }
}

pub fn aggregate(video_id: &str, probs: &[f64], scheme: Scheme) -> Result<VideoVerdict, VerdictError> {
    if probs.is_empty() {
        return Err(VerdictError::EmptyPrediction(video_id.to_string()));
    }
    let score = score(probs, scheme);
    Ok(VideoVerdict {
        video_id: video_id.to_string(),
        scheme,
        score,
        label: scheme.decide(score),
        n_sequences: probs.len(),
        sequence_probs: probs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_is_a_tie_and_real() {
        let v = aggregate("v", &[0.5], Scheme::LogOdds).unwrap();
        assert_eq!(v.score, 0.0);
        assert_eq!(v.label, Label::Real);
    }

    #[test]
    fn confident_pair_log_odds() {
        let v = aggregate("v", &[0.9, 0.9], Scheme::LogOdds).unwrap();
        assert!((v.score - 9f64.ln()).abs() < 1e-12);
        assert!((v.score - 2.1972).abs() < 1e-4);
        assert_eq!(v.label, Label::Fake);
    }

    #[test]
    fn schemes_can_disagree() {
        let probs = [0.9, 0.4, 0.4];
        let maj = aggregate("v", &probs, Scheme::Majority).unwrap();
        assert_eq!(maj.label, Label::Real);
        let mean = aggregate("v", &probs, Scheme::Mean).unwrap();
        assert!((mean.score - 1.7 / 3.0).abs() < 1e-12);
        assert_eq!(mean.label, Label::Fake);
    }

    #[test]
    fn extreme_probs_clamped() {
        let v = aggregate("v", &[1.0, 0.0], Scheme::LogOdds).unwrap();
        assert!(v.score.is_finite());
        assert_eq!(v.label, Label::Real);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(
            aggregate("v", &[], Scheme::Mean).unwrap_err(),
            VerdictError::EmptyPrediction("v".into())
        );
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("vote".parse::<Scheme>().is_err());
    }

    fn probs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 1..20)
    }

    proptest! {
        #[test]
        fn permutation_invariant(p in probs(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut q = p.clone();
            q.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            for s in Scheme::ALL {
                let a = aggregate("v", &p, s).unwrap();
                let b = aggregate("v", &q, s).unwrap();
                prop_assert!((a.score - b.score).abs() <= 1e-9 * (1.0 + a.score.abs()));
                prop_assert_eq!(a.label, b.label);
            }
        }

        #[test]
        fn raising_a_prob_never_clears_a_fake(p in probs(), idx in any::<prop::sample::Index>(), bump in 0.0f64..1.0) {
            let i = idx.index(p.len());
            let mut q = p.clone();
            q[i] = (q[i] + bump).min(1.0);
            for s in Scheme::ALL {
                let before = aggregate("v", &p, s).unwrap();
                let after = aggregate("v", &q, s).unwrap();
                if before.label == Label::Fake {
                    prop_assert_eq!(after.label, Label::Fake, "{:?}", s);
                }
            }
        }

        #[test]
        fn log_odds_antisymmetric(p in prop::collection::vec(1e-5f64..=1.0 - 1e-5, 1..20)) {
            let flipped: Vec<f64> = p.iter().map(|x| 1.0 - x).collect();
            let a = score(&p, Scheme::LogOdds);
            let b = score(&flipped, Scheme::LogOdds);
            prop_assert!((a + b).abs() <= 1e-9);
        }

        #[test]
        fn label_matches_rule(p in probs()) {
            for s in Scheme::ALL {
                let v = aggregate("v", &p, s).unwrap();
                prop_assert_eq!(v.label, s.decide(v.score));
                prop_assert_eq!(v.n_sequences, v.sequence_probs.len());
            }
        }
    }
}
