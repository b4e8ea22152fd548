use thiserror::Error;

pub type Result<T> = std::result::Result<T, IsacError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IsacError {
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix has a negative eigenvalue {0:.3e}")]
    NegativeEigenvalue(f64),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("covariance has zero trace")]
    ZeroTrace,
    #[error("covariance is identically zero")]
    DegenerateCovariance,
    #[error("no sign change found while bracketing the root")]
    BracketFailure,
    #[error("subproblem is infeasible: {0}")]
    InfeasibleSubproblem(String),
    #[error("no feasible design: {}", format_reasons(.0))]
    Infeasible(Vec<(usize, String)>),
    #[error("solver hit the iteration cap ({0} Newton steps)")]
    MaxIterations(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

fn format_reasons(reasons: &[(usize, String)]) -> String {
    reasons
        .iter()
        .map(|(l, why)| format!("L={l}: {why}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl IsacError {
    /// True for the errors that signal an unsatisfiable problem rather than a numerical breakdown.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, IsacError::Infeasible(_) | IsacError::InfeasibleSubproblem(_))
    }
}
