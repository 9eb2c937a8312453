use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("DC sample is not real: |Im Z(0)| / |Z(0)| = {ratio:e}")]
    NonRealDc { ratio: f64 },

    #[error("frequency grids differ at sample {index}: {a} Hz vs {b} Hz")]
    GridMismatch { index: usize, a: f64, b: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("filter specification infeasible at order {order}; order {required_order} required")]
    InfeasibleSpec { order: usize, required_order: usize },

    #[error("band too narrow: f_max / f_min = {ratio} < 1.2")]
    BandTooNarrow { ratio: f64 },

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("coefficient alpha {coeffs} does not match map alpha {map}")]
    CoefficientMismatch { coeffs: f64, map: f64 },

    #[error("no singular-value gap below order {max_order}; spectrum head: {spectrum:?}")]
    OrderCapReached { max_order: usize, spectrum: Vec<f64> },

    #[error("normal system is ill-conditioned (cond = {cond:e}); try a lower order")]
    IllConditioned { cond: f64 },

    #[error("bad synthetic system specification: {0}")]
    BadSpec(String),

    #[error("pole of multiplicity {multiplicity} is not supported with a delay")]
    MultiplePole { multiplicity: u32 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("frequencies not strictly increasing at line {line}")]
    NonMonotonic { line: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
