//! Finite-resolution constructions of functions with prescribed cluster sets
//! on a closed nowhere dense boundary set, and tools to verify them.
//!
//! The boundary set `L`, the target multifunction `Phi` and an optional
//! domain sample `D` are read from a [`scene`]; [`construct`] builds a
//! function sample and [`verify`] compares its empirical cluster sets with
//! `Phi`. [`pipeline`] ties these together into the artifact files.

// Negated comparisons are how NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod construct;
pub mod limit_sequences;
pub mod metric;
pub mod multifunction;
pub mod nets;
pub mod pipeline;
pub mod scene;
pub mod verify;

pub use construct::{ConstructError, Construction, ConstructionRegistry, Scene};
pub use metric::{BoundingBox, Metric, Point, SampledSet};
pub use multifunction::{DeltaSchedule, FunctionSample, MultifunctionTable};
pub use verify::Mode;
