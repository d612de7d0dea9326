//! Span-level engagement tagging: corpus handling, candidate suggestion,
//! a span classifier with hand-written gradients, training and evaluation.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod label;
pub mod metrics;
pub mod spanmodel;
pub mod render;
pub mod suggester;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use label::Label;
