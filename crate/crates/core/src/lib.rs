//! Generalized Matérn thinning of Cox processes.
//!
//! Point patterns on rectangular windows, log-Gaussian Cox and Poisson samplers,
//! dependent thinning with pluggable competition rules, Palm-expectation
//! intensities, extremal storm constructions, and empirical estimators.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimators;
pub mod extremal;
pub mod field;
pub mod gauss;
pub mod geometry;
pub mod io;
pub mod palm;
pub mod pattern;
pub mod rng;
pub mod sampler;
pub mod shape;
pub mod stats;
pub mod thinning;

pub use error::{Error, Result};
pub use field::GridField;
pub use gauss::{CovarianceFamily, CovarianceModel, LgcpSpec, MeanFunction};
pub use geometry::{Grid, Window};
pub use pattern::{MarkKind, MarkValue, MarkedPointPattern, PointPattern};
pub use rng::RngStream;
pub use sampler::{MarkLaw, ScalarLaw};
pub use shape::{ShapeId, StormShape};
pub use stats::IntensityEstimate;
pub use thinning::{DistanceKernel, Interaction, Preset, ThinningModel};
pub use palm::{IntensitySource, PalmConfig};
pub use extremal::{ExtremalSurface, StormPoint};
