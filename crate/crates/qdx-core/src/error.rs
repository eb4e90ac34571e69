use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("|q| must exceed 1, got |q| = {0}")]
    QModulusNotExpanding(f64),
    #[error("dilation factor must be nonzero")]
    ZeroDilation,
    #[error("evaluation point must be nonzero")]
    ZeroEvaluationPoint,
    #[error("theta argument must be nonzero")]
    ZeroArgument,
    #[error("points of E_q must be nonzero")]
    ZeroPoint,
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("bracketing failed: no sign change located")]
    BracketingFailed,
    #[error("pole on or near the sampling circle (max sample {0:.3e})")]
    PoleOnCircle(f64),
    #[error("gauge transform not invertible in this window")]
    SingularGauge,
    #[error("operator has no coefficients")]
    EmptyOperator,
    #[error("singular layer system at block ({i},{j}), coefficient {exp}")]
    ResonantNormalization { i: usize, j: usize, exp: i64 },
    #[error("forbidden summation direction: min |q^m c^δ − λ| relative gap {0:.3e}")]
    ForbiddenDirection(f64),
    #[error("series window exceeds the configured cap")]
    WindowOverflow,
    #[error("base point on a theta zero spiral, |θ| = {0:.3e}")]
    BasePointOnSpiral(f64),
    #[error("bad value of q: canonical independence matrix is singular")]
    BadQValue,
    #[error("cocycle not closed: ‖G^(r) ⋯ G − I‖ = {0:.3e}")]
    CocycleNotClosed(f64),
    #[error("descent failed: τ-invariance residual {0:.3e}")]
    DescentFailed(f64),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown verification suite: {0}")]
    UnknownSuite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
