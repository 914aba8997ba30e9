use thiserror::Error;

/// Every failure the toolkit can report. Check failures are verdicts, not errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by a jet whose constant term is zero")]
    DivisionByZeroConstantTerm,
    #[error("{func} is undefined at constant term {value}")]
    DomainError { func: &'static str, value: f64 },
    #[error("singular system: best pivot {pivot:e} is below the threshold")]
    SingularSystem { pivot: f64 },
    #[error("jets of order {have} supplied, order {need} required")]
    OrderTooLow { have: usize, need: usize },
    #[error("valence mismatch: {0}")]
    ValenceMismatch(String),
    #[error("metric is not positive definite at the evaluation point")]
    NotPositiveDefinite,
    #[error("J is not almost complex: |J^2 + id| = {residual:e}")]
    NotAlmostComplex { residual: f64 },
    #[error("2-form is degenerate at the evaluation point")]
    DegenerateForm,
    #[error("unknown gauge `{0}`")]
    UnknownGauge(String),
    #[error("density weight {0} is not supported")]
    UnsupportedWeight(i32),
    #[error("gauge mismatch: structure is `{structure}`, momentum is `{momentum}`")]
    GaugeMismatch { structure: String, momentum: String },
    #[error("Newton projection did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("rank deficiency: smallest singular value {sigma_min:e}")]
    RankDeficiency { sigma_min: f64 },
    #[error("section leaves the zero set: |mu(s)| = {residual:e}")]
    SectionOffZeroSet { residual: f64 },
    #[error("all weights have the same sign")]
    AllWeightsSameSign,
    #[error("point lies outside the chart `{0}`")]
    OutsideDomain(String),
    #[error("field only accepts identity-seeded coordinate jets")]
    SeededInputRequired,
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
