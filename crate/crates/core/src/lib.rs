//! Interactive foreground/background segmentation from user scribbles.

pub mod error;
pub mod eval;
pub mod features;
pub mod image;
pub mod robot;
pub mod segment;
pub mod ssl;
pub mod synth;
pub(crate) mod morphology;
pub(crate) mod simd;

pub use error::{Error, Result};
