//! Discrete approximations of Bernoulli convolutions and homogeneous
//! diagonal self-affine measures, entropy with respect to non-conformal
//! dyadic partitions, average entropy, Bernoulli-pair decompositions and
//! the algebraic tools (Mahler measure, small-value polynomial search,
//! exact overlaps) that go with them.
//!
//! Entropies are in bits throughout.

pub mod algebraic;
pub mod decompose;
pub mod entropy;
pub mod error;
pub mod measures;
pub mod scales;
pub mod selfaffine;
mod util;

pub use algebraic::{
    approximate_parameters, count_roots_in_disk, mahler_measure, min_value_poly_search, reduce_mod_minpoly,
    AlgebraicNumber, IntPolynomial, Strategy,
};
pub use decompose::{bernoulli_decompose, entropy_increase_gap, tube_entropy_selfconv, Decomposition};
pub use entropy::{
    avg_cond_entropy, avg_entropy, conditional_entropy, partition_entropy, EntropyReport, Keying, QuadMethod,
    QuadratureSpec,
};
pub use error::{Error, Result};
pub use measures::{bernoulli_power, DiscreteMeasure, MergePolicy, Transform};
pub use scales::{en_key, grid_key, s_sequence, CellKey, SSequence, ScaleVector};
pub use selfaffine::{
    build_factor, build_level_n, dim_from_kappa, exact_overlap_depth, kappa_estimate, lyapunov_dimension,
    non_saturation_profile, rw_entropy_upper, separation_profile, Arithmetic, DimReport, MapSpec, SystemSpec,
};
