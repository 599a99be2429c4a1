//! Discrete barrier functions, stability and error envelopes, and the
//! empirical stability harness.

mod barrier;
mod envelope;
mod stability;

pub use barrier::{
    build_barrier, build_stacked_barrier, verify_barrier_bound, BarrierProfile, StackLevel,
    DEFAULT_BARRIER_OFFSET, STACK_TRUNCATION,
};
pub use envelope::{
    error_envelope, error_envelope_value, stability_envelope, stability_envelope_value,
    EnvelopeBranch, EnvelopeKind, EnvelopeProfile, ErrorEnvelopeKind,
};
pub use stability::{empirical_stability_check, stability_preconditions_hold, StabilityCheck};
