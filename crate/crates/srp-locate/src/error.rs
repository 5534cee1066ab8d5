//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {len} samples, frame length is {frame_len}")]
    SignalTooShort { len: usize, frame_len: usize },

    #[error("invalid framing: frame_len={frame_len}, hop={hop}")]
    InvalidFraming { frame_len: usize, hop: usize },

    #[error("signal length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("window length {0} is not a power of two")]
    WindowNotPowerOfTwo(usize),

    #[error("max lag {max_lag} must be smaller than the signal length {len}")]
    MaxLagTooLarge { max_lag: usize, len: usize },

    #[error("correlation covers lags up to {max_lag} samples but the pair geometry requires {required}")]
    InsufficientMaxLag { max_lag: usize, required: usize },

    #[error("grid side must be at least 2, got {0}")]
    GridTooSmall(usize),

    #[error("z-plane {z} m lies outside the room height {height} m")]
    ZPlaneOutsideRoom { z: f64, height: f64 },

    #[error("likelihood grid contains a non-finite value")]
    NonFiniteGrid,

    #[error("grid shape mismatch: {left}x{left} vs {right}x{right}")]
    GridShapeMismatch { left: usize, right: usize },

    #[error("at least 2 microphones are required, got {0}")]
    TooFewMics(usize),

    #[error("device at ({0:.3}, {1:.3}, {2:.3}) is on or outside a room surface")]
    DeviceOutsideRoom(f64, f64, f64),

    #[error("device placement rejection sampling exceeded {0} attempts")]
    PlacementRejection(usize),

    #[error("cannot reach {snr_db} dB SNR: propagated signal is all zero")]
    SilentSignal { snr_db: f64 },

    #[error("source corpus directory {0} contains no usable WAV files")]
    EmptyCorpus(PathBuf),

    #[error("shape mismatch at {layer}: expected {expected}, got {got}")]
    ShapeMismatch {
        layer: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),

    #[error("training diverged: loss is non-finite at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("weight file: {0}")]
    WeightFormat(String),

    #[error("weight file checksum mismatch")]
    ChecksumMismatch,

    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),

    #[error("wav: {0}")]
    Wav(String),

    #[error("empty evaluation group `{0}`")]
    EmptyGroup(String),

    #[error("method `neural` requested but no weights supplied")]
    MissingWeights,

    #[error("scene `{0}` not found in manifest")]
    SceneNotFound(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// One-word category used by the CLI's machine-parsable error line.
    pub fn category(&self) -> &'static str {
        use Error::*;
        match self {
            SignalTooShort { .. }
            | InvalidFraming { .. }
            | LengthMismatch { .. }
            | WindowNotPowerOfTwo(_)
            | MaxLagTooLarge { .. }
            | InsufficientMaxLag { .. }
            | GridTooSmall(_)
            | ZPlaneOutsideRoom { .. }
            | GridShapeMismatch { .. }
            | TooFewMics(_)
            | DeviceOutsideRoom(..)
            | ShapeMismatch { .. } => "invalid-input",
            NonFiniteGrid | NonFiniteGradient(_) | TrainingDiverged { .. } => "numeric",
            PlacementRejection(_) => "sampling",
            SilentSignal { .. } | EmptyCorpus(_) => "source-signal",
            WeightFormat(_) | ChecksumMismatch | UnsupportedVersion(_) => "weight-file",
            Wav(_) => "wav",
            EmptyGroup(_) | MissingWeights | SceneNotFound(_) => "evaluation",
            Config(_) => "config",
            Io { .. } | Json(_) => "io",
        }
    }
}
