pub mod error;
pub mod kernel;
pub mod lp;
pub mod numeric;

pub use error::{LcgmError, Result};
pub use kernel::{
    ae_equal, compose, feature_distribution, posterior, pushforward, support, FiniteDistribution,
    Lcgm, StochasticKernel,
};
pub use numeric::{NumericMode, Rational, Scalar};
pub mod blackwell;
pub mod reference;
pub mod transition;
pub mod assignment;
pub mod dictionary;
pub mod rng;
pub mod ica;
pub mod mixture;
pub mod sae;
pub mod io;
pub mod fixtures;
