//! Rough-path layer: sampled paths and controls, the sewing map, Young and
//! rough integrals, controlled paths, and a Picard solver for
//! `dY = φ(Y) dX`.
//!
//! Everything lives on a fixed time grid. Two-parameter objects (`𝕏`,
//! remainders, germs) are indexed by grid positions `s ≤ t`.


// `!(a <= b)` is used on purpose so that NaN lands on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::len_without_is_empty)]
#![allow(clippy::wrong_self_convention)]
#![allow(clippy::needless_range_loop)]

pub mod control;
pub mod controlled;
pub mod error;
pub mod io;
pub mod path;
pub mod rde;
pub mod rough_path;
pub mod sewing;
pub mod smooth;

pub use control::{control_partition, two_param_variation, ChainControl, Control, FnControl, SumControl};
pub use controlled::{compose, composition_bounds, rough_integral, ControlledPath, RoughIntegral};
pub use error::{Error, Result};
pub use path::{Grid2, Interp, SampledPath};
pub use rde::{rde_solve, rde_stability, RdeConfig, RdeDiagnostics, RdeSolution, StabilityRecord};
pub use rough_path::{lift, lift_geometric, RoughPath};
pub use sewing::{sew, sewing_constant, young_integral, Germ, SewResult};
pub use smooth::{SmoothFunction, SmoothNorms};

/// Largest grid accepted by operations that store two-parameter arrays.
pub const MAX_TWO_PARAM_GRID: usize = 512;
