//! Time-frequency images for signal classification.
//!
//! Signals are turned into time-frequency matrices ([`tft`]) or time-series
//! images ([`imaging`]), rasterized into normalized tensors ([`raster`]) and
//! classified by small trainable models ([`classify`]). [`pipeline`] wires
//! these into the staged radar classifier and the transient-stability
//! experiment.

mod binio;
pub mod classify;
pub mod error;
pub mod fft;
pub mod imaging;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod signal;
pub mod tft;
pub mod waveforms;

pub use error::{Error, Result};
pub use signal::{Signal, SignalMeta, Spectrum};
pub use tft::{TfMatrix, TransformKind, TransformParams, WindowSpec};
