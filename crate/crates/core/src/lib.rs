//! First-order ambisonics toolkit: encoding, STFT analysis, DirAC
//! parameters, a spatial-consistency training loss, vector quantization of
//! latents, synthetic scene generation and evaluation metrics.

mod error;
pub mod grid;
mod io_util;

pub mod cli;
pub mod dirac;
pub mod eval_metrics;
pub mod foa_signal;
pub mod scene_gen;
pub mod spatial_consistency;
pub mod tf_transform;
pub mod vector_quantizer;

pub use error::{Error, Result};
pub use io_util::KahanSum;
