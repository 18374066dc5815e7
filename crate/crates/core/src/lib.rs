//! Targeted event detection.
//!
//! A classifier trained on labeled data turns a (possibly high-dimensional)
//! data stream into a univariate score stream; event onsets then show up as a
//! positive level shift that simple window statistics can detect. This crate
//! provides the scoring procedures, the detection statistics, an event-oriented
//! ROC harness and the two simulation scenarios used to exercise them.

pub mod detection;
pub mod error;
pub mod evaluation;
pub mod frame;
pub mod io;
pub mod rng;
pub mod scenarios;
pub mod scoring;
pub mod types;

pub use error::{Error, Result};
pub use frame::Frame;
pub use rng::SimRng;
pub use types::{
    window_indices, DetectionStream, Label, LabeledStream, RocCurve, RocPoint, ScoreStream,
    ValueRange, WindowConfig,
};
