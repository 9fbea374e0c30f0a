//! Itô integration on uniform time grids over finite filtrations.
//!
//! Continuous time is a grid `t_k = kT/N`; processes are right-continuous
//! step functions adapted to a tree filtration whose level `k` is time
//! `t_k`. Adapted partitions are sequences of stopping times. The Itô sums,
//! their discretised integrands and covariation sums are computed exactly,
//! so the algebraic identities between them hold to rounding; limits over
//! partitions become Cauchy diagnostics along dyadic refinements.


// `!(a <= b)` is used on purpose so that NaN lands on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_late_init)]

pub mod check;
pub mod error;
pub mod io;
pub mod partition;
pub mod refine;
pub mod space;
pub mod sums;

pub use check::{ito_bound_check, ito_bound_measure, BoundExponents, BoundMeasurement};
pub use error::{Error, Result};
pub use partition::{floor_index, AdaptedGridPartition};
pub use refine::{refine_converge, RefineConfig, RefineDiagnostics};
pub use space::{Enumeration, GridCadlagPath, SampleSpace, TimeGrid};
pub use sums::{covariation_sum, discretize, ito_sum};
