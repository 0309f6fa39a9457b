//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic bytes, expected \"PQDT\"")]
    BadMagic,

    #[error("unsupported format version {0}")]
    BadVersion(u32),

    #[error("unknown matrix kind byte {0}")]
    BadKind(u8),

    #[error("payload length mismatch: header promises {expected} values, file holds {got}")]
    PayloadMismatch { expected: u64, got: u64 },

    #[error("malformed csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("negative band value at ({row}, {col})")]
    NegativeBandValue { row: usize, col: usize },

    #[error("band of row {row} exceeds matrix columns: start {start} + len {len} > cols {cols}")]
    BandOutOfRange {
        row: usize,
        start: usize,
        len: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("byte count overflows u64 for dims M={m}, N={n}, D={d}")]
    MemOverflow { m: u64, n: u64, d: u64 },

    #[error("row {row} of Π violates the simplex constraints: {reason}")]
    PovmInvariant { row: usize, reason: String },

    #[error("row {row} of P sums to {sum}, expected 1 within {tol}")]
    OutcomeRowSum { row: usize, sum: f64, tol: f64 },

    #[error(
        "probe row {row} (mean photon number {mean_photons}) needs more than {cols} photon-number \
         entries to keep the omitted probability mass below {cutoff}"
    )]
    ProbeRowTooWide {
        row: usize,
        mean_photons: f64,
        cols: usize,
        cutoff: f64,
    },

    #[error("outcome count {n} is inconsistent with {bins} time bins (at most {max} outcomes)")]
    InconsistentOutcomes { n: usize, bins: usize, max: usize },

    #[error("exact outcome distribution of probe {row} sums to {sum}, expected 1 within 1e-9 (bad truncation)")]
    BadTruncation { row: usize, sum: f64 },

    #[error("detector fit is under-determined: {0}")]
    UnderDetermined(String),

    #[error("detector fit did not converge after {iterations} iterations (residual {residual:.3e})")]
    FitNonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<crate::detector::DetectorParams>,
    },

    #[error("conjugate gradient produced non-finite values (ill-conditioned system)")]
    IllConditioned,

    #[error("memory estimate {estimate} bytes exceeds the configured budget of {budget} bytes")]
    MemoryBudget { estimate: u64, budget: u64 },

    #[error("wide-float exponent overflow during Wigner recurrence at k={k}, z={z}")]
    WideOverflow { k: usize, z: f64 },
}
