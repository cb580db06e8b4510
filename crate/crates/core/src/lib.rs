//! Continuous volume models and a CPU volume renderer built around them.
//!
//! The crate encodes discrete scalar volumes (structured grids or scattered
//! points) into compact tensor-product B-spline models, queries values and
//! analytical gradients anywhere in the domain, and ray-casts images whose
//! quality can be scored against analytic ground truths and classical local
//! reconstruction filters.
//!
//! All numeric kernels are generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the `*64` aliases below are the concrete types the CLI
//! and most callers use.

// axis loops index several fixed-size arrays at once; iterators hide that
#![allow(clippy::needless_range_loop)]

pub mod encode;
pub mod fields;
pub mod filters;
pub mod image;
pub mod metrics;
pub mod model;
pub mod render;
pub mod scalar;

pub use scalar::{real, Real, SplitMix64};

/// Concrete `f64` aliases for the main domain types.
pub type KnotVector64 = model::KnotVector<f64>;
pub type MfaModel64 = model::MfaModel<f64>;
pub type ParamPoint64 = model::ParamPoint<f64>;
pub type DomainBounds64 = model::DomainBounds<f64>;
pub type ScalarGrid64 = encode::ScalarGrid<f64>;
pub type PointCloud64 = encode::PointCloud<f64>;
pub type EncodeConfig64 = encode::EncodeConfig<f64>;
pub type FieldSpec64 = fields::FieldSpec<f64>;
pub type Camera64 = render::Camera<f64>;
pub type RenderConfig64 = render::RenderConfig<f64>;
pub type TransferFunctions64 = render::TransferFunctions<f64>;
