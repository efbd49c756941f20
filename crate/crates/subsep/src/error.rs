//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal is empty")]
    EmptySignal,

    #[error("channel length mismatch: channel {channel} has {got} samples, expected {expected}")]
    ChannelLengthMismatch {
        channel: usize,
        got: usize,
        expected: usize,
    },

    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("invalid STFT configuration: {0}")]
    InvalidStftConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix at frequency bin {bin}")]
    SingularMatrix { bin: usize },

    #[error("non-positive model variance at (f={bin}, t={frame}, n={source})")]
    NonPositiveVariance {
        bin: usize,
        frame: usize,
        source: usize,
    },

    #[error("auxiliary state does not match method: {0}")]
    AuxStateMismatch(String),

    #[error("band [{lo}, {hi}] out of range for {n_bins} bins")]
    BandOutOfRange { lo: usize, hi: usize, n_bins: usize },

    #[error("permutation enumeration capped at {max} sources, got {n}")]
    TooManySources { n: usize, max: usize },

    #[error("reference signal {index} is silent")]
    SilentReference { index: usize },

    #[error("oracle sources carry zero total energy")]
    ZeroSourceEnergy,

    #[error("non-finite value produced at iteration {iteration}: {context}")]
    NonFinite { iteration: usize, context: String },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
