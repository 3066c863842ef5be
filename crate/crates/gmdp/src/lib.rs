//! Approximate probabilistic simulation relations between Markov decision
//! processes, with controller refinement and grid-based safety verification.
//!
//! The crate works with two model classes — finite-state controlled Markov
//! chains and Gaussian linear time-invariant processes over a metric output
//! space — and provides:
//!
//! - exact and `δ`-liftings of probability vectors via an exact
//!   transportation solver ([`coupling`]);
//! - balanced-truncation model-order reduction ([`reduction`]);
//! - synthesis and certification of `ε,δ`-simulation relations between an
//!   abstract and a concrete LTI model, with trade-off curves ([`simrel`]);
//! - refinement of abstract control strategies onto the concrete model with
//!   recovery handling ([`refine`]);
//! - grid-based step-bounded safety value iteration with certified
//!   discretization error ([`safety`]);
//! - Monte-Carlo and exact-enumeration verification of the refinement
//!   guarantees ([`validate`]);
//! - the dense solvers backing all of the above ([`linalg`]).
//!
//! The `examples/` directory holds one runnable example per capability; the
//! `gmdp` binary exposes the same functionality as subcommands.

pub mod casedata;
pub mod coupling;
pub mod demo;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod reduction;
pub mod refine;
pub mod rng;
pub mod safety;
pub mod simrel;
pub mod validate;

pub use error::{GmdpError, Result};
