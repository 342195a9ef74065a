//! Error type for the core crate.

use alloc::string::String;

/// Errors surfaced by the core library's fallible entry points.
///
/// Internal graph construction panics on shape mismatches (those are
/// programming errors in the model code); the public API — gist algebra, fog
/// synthesis, model building, loss assembly, training steps — validates its
/// inputs and returns these instead.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// Tensor shapes are incompatible with the requested operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A configuration value is out of its documented range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A value left the domain an operation is defined on (e.g. a
    /// non-positive alignment map handed to the inverse mapping).
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// A non-finite value appeared where training must abort rather than
    /// continue silently. Carries the loss term or tensor it was seen in.
    #[error("non-finite value in {0}")]
    NonFinite(String),
}
