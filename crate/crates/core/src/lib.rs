//! Hausdorff content, ball-density certification and straight
//! decompositions of discrete measures, plus a finite-difference solver for
//! `-Δu + e^u - 1 = ν` with measure data.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix the scalar for the common cases.

// `!(a < b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decomposition;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod hausdorff;
pub mod measure;
pub mod oracle;
pub mod pde;
pub mod scalar;
pub mod special;
pub mod straightness;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Ball, Closure, Point, Segment};
pub use measure::{Atom, CarrierSubset, DiscreteMeasure, IntervalSet, SegmentPiece};
pub use scalar::Real;

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type Segment64 = Segment<f64>;
pub type Segment32 = Segment<f32>;
pub type Measure64 = DiscreteMeasure<f64>;
pub type Measure32 = DiscreteMeasure<f32>;
pub type Params64 = hausdorff::HausdorffParams<f64>;
pub type Params32 = hausdorff::HausdorffParams<f32>;
pub type Certificate64 = straightness::DensityCertificate<f64>;
pub type Certificate32 = straightness::DensityCertificate<f32>;
pub type Grid64 = pde::grid::GridField<f64>;
pub type Grid32 = pde::grid::GridField<f32>;
