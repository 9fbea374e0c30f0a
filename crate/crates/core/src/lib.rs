//! Martingales on finite filtered probability spaces.
//!
//! A filtration with finitely many atoms is a rooted tree: the level-`n`
//! nodes are the atoms of `F_n`. Everything here is computed exactly on such
//! trees, so inequalities between expectations become finite sums that can be
//! checked directly.

// `!(a <= b)` is used on purpose so that NaN lands on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bellman;
pub mod error;
pub mod generators;
pub mod io;
pub mod ops;
pub mod process;
pub mod registry;
pub mod rng;
pub mod stopping;
pub mod tree;

pub use error::{Error, Result};
pub use process::{Martingale, TreeProcess};
pub use stopping::StoppingRule;
pub use tree::FiltrationTree;
