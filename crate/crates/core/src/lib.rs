//! Scene-graph toolkit: a compact row-oriented codec, Hungarian object
//! matching, a hallucination-aware reward for RL fine-tuning of graph
//! generators, and strict/soft/ranked evaluation metrics.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The crate
//! root exposes `f64` aliases for everyday use and `…F32` aliases for
//! single precision.

pub mod assignment;
pub mod codec;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod matching;
pub mod metrics;
pub mod prep;
pub mod reward;
pub mod scalar;

pub use error::{Error, Result};
pub use graph::{Relation, RelationGroup, Schema, ValidationReport, Violation, Vocabulary};
pub use scalar::Scalar;

pub type BoundingBox = graph::BoundingBox<f64>;
pub type SceneObject = graph::SceneObject<f64>;
pub type SceneGraph = graph::SceneGraph<f64>;
pub type ParseOutcome = codec::ParseOutcome<f64>;
pub type MatchConfig = matching::MatchConfig<f64>;
pub type MatchResult = matching::MatchResult<f64>;
pub type RewardWeights = reward::RewardWeights<f64>;
pub type RewardBreakdown = reward::RewardBreakdown<f64>;
pub type SampleMetrics = metrics::SampleMetrics<f64>;
pub type MetricsReport = metrics::MetricsReport<f64>;
pub type RankedTriplet = metrics::RankedTriplet<f64>;
pub type Record = prep::Record<f64>;
pub type DatasetSplit = prep::DatasetSplit<f64>;

pub type BoundingBoxF32 = graph::BoundingBox<f32>;
pub type SceneGraphF32 = graph::SceneGraph<f32>;
pub type MatchConfigF32 = matching::MatchConfig<f32>;
pub type RewardWeightsF32 = reward::RewardWeights<f32>;
pub type RewardBreakdownF32 = reward::RewardBreakdown<f32>;
