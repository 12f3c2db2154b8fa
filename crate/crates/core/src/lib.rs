pub mod error;
pub mod eval;
pub mod features;
pub mod level;
pub mod ml;
pub mod scalar;
pub mod screen;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Float;

pub const FORMAT_VERSION: u32 = 1;
