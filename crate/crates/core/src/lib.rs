//! Core of the scribble simulator: mask geometry, skeleton graphs, scribble
//! synthesis, distance-perception maps and reference loss kernels.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO. File formats,
//! batch orchestration and the command line live in the `scribsim` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod distmap;
pub mod error;
pub mod graph;
pub mod label;
pub mod loss;
pub mod mask;
pub mod rng;
pub mod skeleton;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use label::LabelMask;
pub use tensor::{ProbabilityMap, Tensor};
pub use mask::{BinaryMask, PointF, PointSequence};
pub use rng::SplitMix64;
