pub mod bandlimit;
pub mod decomposition;
pub mod disc;
pub mod error;
pub mod frf;
pub mod interp;
pub mod io;
pub mod localfit;
pub mod pipeline;
pub mod poles;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
