//! Exact machinery for base-beta expansions at the golden ratio.
//!
//! The crate computes, with no floating-point error in any decision path:
//!
//! * arithmetic in the quadratic field Q(beta), beta = (1 + sqrt(5))/2
//!   ([`scalar`]);
//! * the admissible digit words of each length, their Fibonacci counts and
//!   lexicographic structure ([`words`]);
//! * the induced interval partitions of [0, 1) ([`partition`]);
//! * the base-beta transformation, digit extraction and decoding
//!   ([`dynamics`]);
//! * piecewise-polynomial densities, their pushforwards under the map, the
//!   one-step transfer operator, the invariant density, and L1 / total
//!   variation distances ([`density`]);
//! * runnable studies: exact invariance families, convergence-rate tables,
//!   and seeded Monte Carlo cross-checks ([`experiments`]).
//!
//! Floats appear only in reporting and in the explicitly named `_float`
//! fast paths.

mod error;

pub mod density;
pub mod dynamics;
pub mod experiments;
pub mod partition;
pub mod scalar;
pub mod words;

pub use error::{Error, Result};
pub use scalar::GoldenScalar;
pub use words::Word;
