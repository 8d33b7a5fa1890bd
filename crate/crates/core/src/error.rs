use std::io;

use thiserror::Error;

/// Errors across simulation, stream IO and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("arrival out of order: {t_ps} ps after {prev_ps} ps")]
    OutOfOrder { t_ps: i64, prev_ps: i64 },

    #[error("bad stream magic (expected \"BELLTAG1\")")]
    BadMagic,

    #[error("unsupported stream version {0}")]
    BadVersion(u16),

    #[error("truncated stream: record {index} incomplete at byte offset {offset}")]
    Truncated { index: u64, offset: u64 },

    #[error("timestamps not monotonic at record {index}: {ts} < {prev}")]
    NonMonotonic { index: u64, ts: u64, prev: u64 },

    #[error("reserved flag bits set at record {index}: flags = {flags:#04x}")]
    ReservedBits { index: u64, flags: u8 },

    #[error("timestamp {ts_ps} ps is not on the {tick_unit_ps} ps output grid")]
    OffGrid { ts_ps: i64, tick_unit_ps: u32 },

    #[error("negative timestamp {ts_ps} ps; local clock readings must stay nonnegative")]
    NegativeTimestamp { ts_ps: i64 },

    #[error("empty tag stream")]
    EmptyStream,

    #[error("tag stream not sorted at index {index}")]
    UnsortedStream { index: usize },

    #[error("no coincidence peak: max bin {peak} vs background {background:.4} counts/bin")]
    NoPeak { peak: u64, background: f64 },

    #[error("correlation undefined: no coincidences for this setting pair")]
    UndefinedCorrelation,

    #[error("sinusoid fit failed: {0}")]
    FitFailed(String),

    #[error("unsupported entangled-state phase {0} rad; only \u{3c0} is implemented")]
    UnsupportedPhase(f64),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
