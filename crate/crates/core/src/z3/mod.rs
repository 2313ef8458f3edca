//! Bricks on Z³: geometry, sails, and legal-move constructions that carry an
//! infected seed from brick to brick until the origin is infected.
//!
//! Everything is computed in the standard frame of a brick and mapped to the
//! world through its anchor and flag. Sequences are checked move by move while
//! they are built; callers re-verify them with [`crate::moves::verify_legal`].

pub mod audit;
pub mod construct;
pub mod geometry;
pub mod paths;
pub mod sail;

use thiserror::Error;

use crate::lattice::Site;

pub use construct::{
    clean_above, infect_beyond_separator, infect_from_bottom, line_by_line, pass_to_next_brick, translate_infection,
    IbsParts, Translation,
};
pub use geometry::{base_brick, cleaning_route, points_to, translation_route, Brick, Route};
pub use paths::{find_supergood_brickpath, infect_origin_z3, BrickPath, OriginReport, SailBook};
pub use sail::{check_sail, find_sail, sail_intersection, Sail, SailOptions, SlabRule};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Z3Error {
    #[error("anchor {0:?} and flag {1:?} do not span a brick")]
    BadBrick(Site, Site),
    #[error("brick at anchor {0:?} leaves the lattice box")]
    OutsideBox(Site),
    #[error("brick at anchor {0:?} is not good")]
    NotGood(Site),
    #[error("bricks do not point to each other")]
    NotPointing,
    #[error("separator does not split the brick at anchor {0:?}")]
    NotSeparating(Site),
    #[error("target site {0:?} is not above the separator in the thick sail")]
    BadTarget(Site),
    #[error("layer {0} has no infected seed above it")]
    NoSeed(i32),
    #[error("layer {0} could not be completed")]
    Stuck(i32),
    #[error("illegal move at {0:?}")]
    Illegal(Site),
    #[error("no super-good brick on the path")]
    NotSupergood,
}
