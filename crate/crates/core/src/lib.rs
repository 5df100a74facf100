//! Computational laboratory for low-temperature contour ensembles near a
//! wall: exact enumeration of decorated contours, pinned and free two-point
//! functions, irreducible decompositions with tilted step laws, and the
//! effective-random-walk quantities (constrained Green functions, ladder
//! statistics, contraction coefficients) used to compare pinning against
//! entropic repulsion.

pub mod cluster;
pub mod contour;
pub mod ensemble;
pub mod harness;
pub mod lattice;
pub mod numeric;
pub mod oracle;
pub mod potential;
pub mod renewal;
pub mod scalar;
pub mod walk;

/// Concrete scalar used by the public API; the numeric kernel itself is
/// generic over [`scalar::Scalar`].
pub type Real = f64;

pub use lattice::{pt, Point, Wall};
