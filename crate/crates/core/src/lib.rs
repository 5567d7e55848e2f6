//! Constraint-aware decoding for temporal action segmentation.
//!
//! Constraints (start and end classes, a transition table with confidences
//! and per-class normalized duration bounds) are mined from training label
//! sequences with [`extract_constraints`] and then enforced while decoding
//! per-frame class probabilities with [`decode`]. Segmentation quality is
//! measured with [`metrics`], and [`synth`] generates corpora with known
//! structure for controlled experiments.

pub mod bench;
pub mod cli;
pub mod constraints;
pub mod decoder;
pub mod error;
pub mod io;
pub mod metrics;
pub mod probs;
pub mod sequence;
pub mod synth;

pub use constraints::{extract_constraints, ConstraintSet, DurationBound, DurationBounds, TransitionTable};
pub use decoder::{decode, validate, DecodeConfig, DecodeResult, Fallback, Mode, TransitionPrior, Violation};
pub use error::{Error, Result};
pub use metrics::{evaluate_corpus, EvalOptions, EvalReport};
pub use probs::FrameProbMatrix;
pub use sequence::{LabelSequence, Segment};
