//! Importance sampling and particle filters for the local-level model.
//!
//! Weights live in the log domain; linear weights are always the
//! max-subtracted exponentials of the stored log-weights, normalized to one.

mod filter;
mod resample;
mod weights;

pub use filter::{
    apf_step, pf_step_propagate_first, pf_step_update_first, run_filter, sis_step, Execution,
    ParticleRecord, ParticleTrace, PfConfig, Protocol, StepOutcome,
};
pub use resample::{resample, resample_indices, ResampleTrigger, ResamplingPolicy, ResamplingScheme};
pub use weights::{ess, importance_estimate, normalized_weights, ParticleEnsemble};
