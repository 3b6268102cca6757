//! Deep-fake portrait video detection from eye and gaze behavior.
//!
//! The pipeline turns per-frame eye tracks ([`trackio`]) into per-frame
//! visual ([`visual`]) and geometric ([`geometry`]) features, slices them
//! into fixed-length sequences and builds 40×ω×3 temporal/spectral
//! signatures ([`signal`], [`signature`]). A small dense network
//! ([`classifier`]) scores each sequence, and [`verdict`] aggregates the
//! sequence scores into a per-video real/fake decision. [`synth`] generates
//! labelled synthetic tracks and [`harness`] ties everything together behind
//! the `gazesig` command line.

pub mod classifier;
pub mod geometry;
pub mod harness;
pub mod signal;
pub mod signature;
pub mod synth;
pub mod trackio;
pub mod verdict;
pub mod visual;

pub use geometry::{geo_frame, intersect_gaze_rays, GeoFrame, VergenceSolution};
pub use signal::{slice_sequences, SequenceWindow, Signal};
pub use signature::{build_signature, read_signatures, write_signatures, Signature};
pub use trackio::{parse_track, write_track, Label, Track, TrackRecord};
pub use verdict::{aggregate, Scheme, VideoVerdict};
