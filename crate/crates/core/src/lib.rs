//! Canonical-duality solvers for 0-1 knapsack problems, exhaustive oracles, a
//! plane-stress finite-element model and the bilevel volume-reduction loop that
//! couples them into a binary topology design method.

pub mod bilevel;
pub mod error;
pub mod fem2d;
pub mod knapsack;
pub mod oracle;

pub use error::{Error, Result};
