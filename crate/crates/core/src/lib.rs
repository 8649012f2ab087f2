//! Core model and per-student feature extraction for e-book reading logs.
//!
//! The crate turns a raw interaction stream (page turns, jumps, opens,
//! closes, highlights, ...) into reading sessions, symbol-encoded
//! sequences, per-session behavioral metrics, a cohort-normalized
//! engagement indicator, and questionnaire scale scores. Everything here
//! is deterministic: the same input bytes always produce the same output.
//!
//! Pipeline order: [`ingest`] -> [`session`] -> [`encode`] -> [`metrics`],
//! with [`engagement`] and [`scales`] as parallel feature sources keyed by
//! student id.

pub mod encode;
pub mod engagement;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod scales;
pub mod session;

pub use model::{
    classify_interval, EncodedSequence, EventKind, IntervalClass, IntervalThresholds, MetricMeans,
    RawEvent, Session, SessionTerminal, StudentId, MaterialId, SequenceMetrics, StudentProfile,
    Symbol,
};
