//! Linear algebra kernels, random streams and the F distribution.

pub mod fdist;
pub mod linalg;
pub mod rng;

pub use fdist::{f_cdf, f_quantile};
pub use linalg::{ols_fit, orthonormal_basis, residual_norm_sq, Matrix, OlsFit, Qr};
pub use rng::{gaussian_vector, RngStream};
