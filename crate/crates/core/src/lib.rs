//! Synthesis of control inputs satisfying signal temporal logic
//! specifications, computed directly from one measured input/output
//! trajectory of an unknown linear time-invariant system.
//!
//! The pipeline is: a Hankel-matrix dictionary of the data ([`behavior`])
//! replaces the model, the specification ([`stl`]) is encoded with big-M
//! constraints into a mixed-integer linear program ([`milp`]), and the
//! program is solved by the built-in branch-and-bound ([`solver`]).
//! [`synthesis`] ties these together and checks the result against a known
//! model ([`lti`]) when one is available.

pub mod behavior;
pub mod cli;
pub mod error;
pub mod lti;
pub mod milp;
pub mod numerics;
pub mod scenarios;
pub mod solver;
pub mod stl;
pub mod synthesis;

pub use error::{Error, Result};
