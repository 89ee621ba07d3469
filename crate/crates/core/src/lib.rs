//! Linear search for a hidden object on the half-line: cost functional,
//! variational recursion, separatrix construction, orbit classification and
//! the optimizer that turns them into an optimal search plan.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// reference tables keep every digit of their source
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod classification;
pub mod distributions;
pub mod error;
pub mod io;
pub mod numerics;
pub mod optimizer;
pub mod plan_cost;
pub mod recursion;
pub mod separatrix;
pub mod special;
pub mod validate;

pub use distributions::{DistSelector, TailDistribution};
pub use error::{Error, Result};
