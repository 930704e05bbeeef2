//! Randomized group-testing detection of `k` active nodes among `N + k` over
//! a multiple-access channel.
//!
//! - [`scheme`]: the elimination scheme over an abstract disjunction oracle,
//!   node-level and surplus-chain simulators.
//! - [`bounds`]: slot budgets, expectation recursion and channel-use counts.
//! - [`channel`]: additive sub-gaussian noise MAC and the repetition
//!   disjunction code.
//! - [`harness`]: Monte Carlo experiments and CSV export.
//! - [`cli`]: the `mac-activity` command-line front end.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod error;
pub mod harness;
pub mod rng;
pub mod scheme;

pub use error::{Error, Result};
