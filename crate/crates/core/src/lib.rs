pub mod error;
pub mod init;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod solver;
pub mod synth;
pub mod types;

pub use error::{FuvarError, Result};
pub use types::*;
