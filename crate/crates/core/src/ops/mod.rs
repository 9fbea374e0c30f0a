//! Pathwise functionals of processes on a tree.

pub mod davis;
pub mod functionals;
pub mod level_sets;
pub mod lepingle;
pub mod norms;
pub mod paraproduct;
pub mod variation;
pub mod weighted;

pub use davis::{davis_decompose, DavisParts};
pub use functionals::{
    conditional_variance, is_submartingale, max_increment, maximal, oscillation, predictable_square,
    square_function,
};
pub use lepingle::{lepingle_partition, lepingle_pathwise_bound, GreedyPartition};
pub use paraproduct::{paraproduct, paraproduct_deltaf, TwoParamProcess};
pub use variation::{chain_variation, variation, VariationResult};
