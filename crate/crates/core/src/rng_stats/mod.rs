//! Seeded random streams and the distributional primitives used by the
//! sampler.

mod linalg;
mod normal;
mod rng;
mod sampling;

pub use linalg::Cholesky;
pub use normal::{log_std_normal_cdf, std_normal_cdf};
pub use rng::{RngStream, PRNG_ALGORITHM};
pub use sampling::{sample_gaussian_vector, sample_inverse_gamma, sample_truncated_normal};

pub(crate) use normal::{log_cdf, LN_SQRT_2PI};
pub(crate) use sampling::{inverse_gamma, std_normal, truncated_normal};
