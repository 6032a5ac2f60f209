//! Exact Haar measures of the strata of `GL2(Z_l)` subgroups cut out by the
//! shape of the 1-eigenspace.

pub mod cartan;
pub mod cli;
pub mod eigenspace;
pub mod error;
pub mod measure;
pub mod modarith;
pub mod problem;
pub mod subgroup;

pub use cartan::{AmbientGroup, AmbientKind, CartanParams, CartanType, TangentCard};
pub use error::{Error, Result};
pub use measure::{family, MeasureCell, MeasureFamily, NatSet};
pub use modarith::{MatMod, Prime, Rat};
pub use problem::ProblemSpec;
pub use subgroup::{Budget, FiniteSubgroup, SubgroupSpec};
