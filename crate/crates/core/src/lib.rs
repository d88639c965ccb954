//! Offline behaviour analytics for reptile-enclosure detection logs.
//!
//! Per-frame detections of a bearded dragon, its heating lamp and feeder
//! crickets are parsed ([`ingest`]), reduced to tracks and gap-filled
//! ([`interpolate`]), classified frame by frame into idle / basking /
//! hunting ([`behaviour`]) and summarised ([`activity`]). [`eval`] scores
//! detector output against ground truth, and [`synthgen`] produces
//! reproducible synthetic clips.

pub mod activity;
pub mod analysis;
pub mod behaviour;
pub mod eval;
pub mod ingest;
pub mod interpolate;
pub mod model;
pub mod report;
pub mod synthgen;

pub use analysis::{analyze, AnalysisOutput, FrameRecord};
pub use behaviour::{BehaviourKind, Episode};
pub use ingest::RunConfig;
pub use model::{BBox, ClassLabel, Detection, FrameGeometry, Provenance, Timeline};
