//! Integer polynomials, real algebraic numbers, Mahler measure, root
//! counting, exact-overlap detection and small-value polynomial search.

pub mod approx;
pub mod number;
pub mod poly;
pub mod roots;
pub mod search;

pub use number::{reduce_mod_minpoly, AlgebraicNumber, PowerTable};
pub use poly::IntPolynomial;
pub use roots::{count_roots_in_disk, mahler_measure};
pub use search::{min_value_poly_search, ranked_candidates, SearchBudget, SearchResult, Strategy};
pub use approx::{approximate_parameters, ApproxOptions, Approximation};
