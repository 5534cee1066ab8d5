//! Positional sound source localization for distributed microphone arrays.
//!
//! The crate bundles the complete pipeline for 2D localization of a sound
//! source with an ad-hoc set of microphones in a shoebox room:
//!
//! * [`dsp`] — framing, STFT phase features and GCC-PHAT cross-correlation;
//! * [`geometry`] — rooms, device placements, TDOAs, candidate grids and
//!   pair metadata vectors;
//! * [`srp`] — classical steered-response-power maps built from GCC-PHAT;
//! * [`sim`] — image-source room impulse responses and reproducible dataset
//!   synthesis;
//! * [`targets`] — Gaussian and hyperbolic training target grids plus the
//!   mean-absolute-error loss;
//! * [`neural`] — a pairwise CRNN with metadata late fusion whose per-pair
//!   likelihood grids are summed over microphone pairs, trained from scratch
//!   with Adam and two-stage (anechoic then reverberant) transfer learning;
//! * [`eval`] — localization-error metrics and benchmark tables.
//!
//! Every operation is deterministic given its seed; see the `examples/`
//! directory for one runnable program per capability and the `srp-locate`
//! binary for the batch CLI.

pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod likelihood;
pub mod neural;
pub mod sim;
pub mod srp;
pub mod targets;
pub mod wav;

pub use error::{Error, Result};
pub use geometry::{CandidateGrid, DevicePlacement, MetadataVector, Room};
pub use likelihood::LikelihoodGrid;

/// Sample rate used throughout the pipeline, in Hz.
pub const SAMPLE_RATE: f64 = 16_000.0;

/// Speed of sound in air, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Height of the 2D candidate plane, in meters.
pub const DEFAULT_Z_PLANE: f64 = 1.5;

/// Side length of the default candidate grid (grids are GRID_SIDE²).
pub const DEFAULT_GRID_SIDE: usize = 25;
