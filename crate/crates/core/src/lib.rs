//! First passage percolation on Cayley graphs of `Z^d`.
//!
//! Random edge weights perturb the word metric of a lattice; this crate
//! computes the resulting passage times exactly, estimates their
//! expectation (the average distance), and measures how geodesic and how
//! convex the resulting balls are at finite scale.

pub mod average;
pub mod bounds;
pub mod engine;
pub mod error;
pub mod geodesicity;
pub mod geometry;
pub mod lattice;
pub mod scalar;
pub mod shape;
pub mod weights;

pub use error::{FppError, Result};
pub use geometry::{AuxNorm, PointCloud, Polytope};
pub use lattice::{CayleyLattice, EdgeKey, Point};
pub use scalar::{Rational, Real, Scalar};
pub use weights::{OmegaField, WeightLaw};

/// Weight law and field in single precision.
pub type WeightLaw32 = WeightLaw<f32>;
pub type OmegaField32 = OmegaField<f32>;
/// Weight law and field in double precision (the default everywhere).
pub type WeightLaw64 = WeightLaw<f64>;
pub type OmegaField64 = OmegaField<f64>;
