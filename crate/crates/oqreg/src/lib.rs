//! Bayesian quantile regression for ordinal outcomes.
//!
//! Two MCMC estimators: a Gibbs-within-Metropolis sampler for ordinal models
//! with three or more categories and free cut-points (`or1`), and a pure
//! Gibbs sampler for three-category models with fixed cut-points and a free
//! scale (`or2`). Model comparison via marginal likelihood and DIC, average
//! covariate effects by the method of composition, batch-means inefficiency
//! factors, and simulation data generators round out the toolkit.

pub mod cli;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod evidence;
pub mod model;
pub mod or1;
pub mod or2;
pub mod simulate;

mod optim;

pub use distributions::{QuantileSpec, RngStream};
pub use error::{Error, Result};
pub use model::{CutpointVector, DeltaVector, OrdinalDataset, PriorOr1, PriorOr2};
pub use or1::{Or1Config, Or1Draws, Or1Fit};
pub use or2::{Or2Config, Or2Draws, Or2Fit};
