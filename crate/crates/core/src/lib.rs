//! Stability analysis for actions of real reductive matrix groups.
//!
//! The crate classifies points of a representation space (or its
//! projectivization) as stable, polystable, semistable or unstable with
//! respect to a closed compatible subgroup `G = K exp(p)` of a reductive
//! matrix group, using the gradient map `mu_p`, the Kempf-Ness potential
//! and the maximal weight function on the sphere of `p`.
//!
//! Modules:
//! - [`liealg`]: Cartan-compatible structure data, brackets, ad-eigenspace
//!   splittings, parabolic and Levi subalgebras, centralizers.
//! - [`action`]: concrete linear and projective actions, fundamental vector
//!   fields, the gradient map and the Kempf-Ness function.
//! - [`maxweight`]: weight curves, maximal weights, the boundary weight
//!   function, zero-set search on the sphere and torus-closure dimensions.
//! - [`stability`]: Kempf-Ness flow, certificates and the classifier.

pub mod action;
pub mod error;
pub mod liealg;
pub mod linalg;
pub mod maxweight;
pub mod stability;

pub use action::{GroupElement, Point, Representation, Space};
pub use error::Error;
pub use liealg::{Direction, ReductiveStructure, StructureDiagnostics, SubalgebraSplit};
pub use maxweight::{MaxWeight, MaxWeightValue, WeightDecomposition};
pub use stability::{ClassifyOptions, FlowTermination, FlowTrace, StabilityLabel, StabilityReport};

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
