use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix series did not converge: {0}")]
    NonConvergent(String),
    #[error("point outside chart: {0}")]
    OutOfChart(String),
    #[error("value left the Lie algebra span (residual {0:.3e})")]
    SpanViolation(f64),
    #[error("arrows are not composable (mismatch {0:.3e})")]
    NotComposable(f64),
    #[error("sampled action axioms fail (residual {0:.3e})")]
    NotAnAction(f64),
    #[error("structure group mismatch: {0}")]
    GroupMismatch(String),
    #[error("incoherent quasi data, first failing label ({0})")]
    IncoherentData(String),
    #[error("torsor division failed: {0}")]
    DivisionFailure(String),
    #[error("map is not a section (residual {0:.3e})")]
    NotASection(f64),
    #[error("equivariance hypothesis fails (residual {0:.3e})")]
    EquivarianceFailure(f64),
    #[error("connection hypothesis s*w = t*w fails (residual {0:.3e})")]
    HypothesisFailure(f64),
    #[error("endpoint mismatch at index {0}")]
    EndpointMismatch(usize),
    #[error("path is not constant (deviation {0:.3e})")]
    NotConstant(f64),
    #[error("arrow is not an identity (deviation {0:.3e})")]
    NotIdentity(f64),
    #[error("lifted path does not start over the given path (deviation {0:.3e})")]
    SourceMismatch(f64),
    #[error("thin deformation boundary mismatch: {0}")]
    BoundaryMismatch(String),
    #[error("fiber mismatch: {0}")]
    FiberMismatch(String),
    #[error("probes disagree on quotient membership")]
    ProbeDisagreement,
    #[error("ODE state became non-finite at step {0}")]
    NonFiniteState(usize),
    #[error("linear action is invalid (residual {0:.3e})")]
    ActionInvalid(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
