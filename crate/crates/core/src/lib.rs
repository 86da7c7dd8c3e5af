//! Filtering laboratory for the scalar local-level state-space model
//!
//! ```text
//! y_t     = theta_t + v_t,       v_t ~ N(0, obs_var)
//! theta_t = theta_{t-1} + w_t,   w_t ~ N(0, state_var)
//! theta_0 ~ N(prior_mean, prior_var)
//! ```
//!
//! Four inference engines share the model: the exact Kalman recursions
//! ([`kalman`]), a Gibbs sampler with a forward-filtering backward-sampling
//! mode ([`gibbs`]), and particle filters in both the propagate-first and
//! update-first arrangements plus SIS and the auxiliary particle filter
//! ([`particle`]). [`diagnostics`] holds the Doob decomposition, martingale
//! checks and engine-vs-oracle metrics.

pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod kalman;
pub mod model;
pub mod numeric;
pub mod particle;
pub mod rng;

pub use error::{Error, Result};
pub use kalman::{FilterRecord, FilterTrace, GaussianBelief};
pub use model::{Ar1Params, LocalLevelParams, ObservationSeries};
