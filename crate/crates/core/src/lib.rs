//! Shapley effects and Sobol indices for models with dependent inputs,
//! with Monte-Carlo and kriging-metamodel error quantification.

pub mod error;
pub mod input_model;
pub mod kriging;
pub mod model;
pub mod normal;
pub mod rng;
pub mod shapley;
pub mod sobol_rt;
pub mod test_models;
pub mod uncertainty;

pub use error::{GsaError, Result};
pub use input_model::{CorrelationMatrix, DistributionSpec, InputDistribution, MarginSpec, Ordering, RosenblattMap};
pub use model::{evaluate, Model, SampleMatrix};
