use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation (bad Fock number, negative
    /// rate, non-normalised initial state, ...).
    #[error("input out of domain: {0}")]
    Domain(String),

    /// Inconsistent or infeasible configuration (pulse layout, step size).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// The integrator produced a non-finite amplitude.
    #[error("integration diverged at step {step} (t = {time}): {reason}")]
    Diverged { step: usize, time: f64, reason: String },

    /// A conditioned quantity was requested from a state with zero norm.
    #[error("undefined result: {0}")]
    Undefined(String),

    /// Laser amplitudes do not satisfy the tuning that closes the effective
    /// three-level model; `residual` is the largest coupling to states
    /// outside span(|A⟩, |11⟩, |α⟩).
    #[error("laser tuning violated: residual coupling {residual:.3e} outside the effective subspace")]
    TuningViolated { residual: f64 },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("sweep produced no successful cells")]
    EmptySweep,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
