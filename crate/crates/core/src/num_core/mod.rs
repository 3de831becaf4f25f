//! Numerical kernel: normal and chi-square distribution functions, small dense
//! linear algebra, and seeded random streams.

mod distributions;
mod linalg;
mod random;
mod real;

pub(crate) use distributions::{cdf, quantile, sf};
pub use distributions::{
    chi_square_sf, std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf,
};
pub use linalg::{
    cholesky_lower, symmetric_eigen, symmetric_eigenvalues, CorrelationMatrix, LowerTriangular,
    Matrix,
};
pub use random::{mix_seed, sample_mv_normal, sample_mv_normal_into, RandomStream};
pub use real::Real;
