//! File formats, batch orchestration and the command line for the scribble
//! simulator. All geometry and numerics live in `scribsim-core`.

pub mod cli;
pub mod convert;
pub mod error;
pub mod losscheck;
pub mod manifest;
pub mod pipeline;
pub mod png_io;
pub mod stats;
pub mod synthetic;
pub mod tensor_io;

pub use error::{Error, Result};
pub use scribsim_core;
