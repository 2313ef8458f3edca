//! FA2f kinetically constrained model on polluted Z² and Z³.
//!
//! Lattice state and the constraint live in [`lattice`]; [`bp`] is bootstrap
//! percolation, [`kcm`] the continuous-time dynamics, [`exact`] the small-system
//! linear algebra, [`moves`] certified move sequences, and [`z2`] / [`z3`] the
//! two infection-path constructions.

pub mod bits;
pub mod bp;
pub mod lattice;
pub mod exact;
pub mod kcm;
pub mod moves;
pub mod z2;
pub mod z3;

pub use lattice::{Boundary, Configuration, Environment, LatticeBox, ModelParams, Site, State};
