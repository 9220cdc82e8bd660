//! Expurgated error exponents for discrete memoryless multiple-access channels.
//!
//! The crate is organised bottom-up:
//!
//! * [`prob`]: alphabets, distributions, channels and base-2 information measures;
//! * [`types`]: exact empirical types, type-class sizes and conditional type-class sampling;
//! * [`exponent`]: packing functions, realizability constraints, the three
//!   expurgated exponent branches, the relaxed baseline and the capacity pentagon;
//! * [`code`]: constant-composition codebooks, packing tallies, expurgation and audits;
//! * [`sim`]: the minimum-equivocation decoder and exact / Monte Carlo error evaluation.

pub mod code;
pub mod error;
pub mod exponent;
pub mod prob;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use exponent::{
    baseline_exponent, branch_exponent, capacity_pentagon, expurgated_exponent, region_contains, region_search,
    Branch, DivergenceWeighting, ExponentBreakdown, ExponentResult, ExponentSolver, InputLaw, Pentagon, RatePair,
    SolverSpec,
};
pub use prob::{Alphabet, Channel, Dist, JointDist, Kernel};
pub use types::{Sequence, TypeVector};
