use thiserror::Error;

/// Errors raised by the forward and inverse pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fractional order must satisfy 0 < alpha <= 1, got {0}")]
    InvalidOrder(f64),

    #[error("{what} = {value} lies outside the admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("d_alpha-mean of p is {mean:.3e}, exceeds tolerance {tol:.1e} (p must satisfy the zero-mean normalization)")]
    MeanNotZero { mean: f64, tol: f64 },

    #[error("p is constant on [0, pi] (sample variance {variance:.3e}); a non-constant p is required unless the calibration override is set")]
    ConstantP { variance: f64 },

    #[error("integration overflow at lambda = {lambda}, reached t = {t}")]
    Overflow { lambda: f64, t: f64 },

    #[error("no sign change of the characteristic function while locating lambda_{n}; scan found {scanned} zeros below the bracket")]
    Indexing { n: i64, scanned: usize },

    #[error("eigenfunction {n} has {actual} interior nodes, expected {expected}; refine the grid")]
    NodalCount {
        n: i64,
        expected: usize,
        actual: usize,
    },

    #[error("index n = {n} needs at least {needed} grid points, have {have}; refine the grid")]
    Resolution { n: i64, needed: usize, have: usize },

    #[error("asymptotic node formula failed for n = {n}, j = {j}")]
    AsymptoticFailure { n: i64, j: usize },

    #[error("step-4 denominator alpha*Q(x) - x^alpha*(p(pi)+p(0)) is not resolved (max {max_abs:.3e}, floor {floor:.3e}); p is indistinguishable from a constant and the mean of q cannot be recovered")]
    DegenerateDenominator { max_abs: f64, floor: f64 },

    #[error("nodal data: {0}")]
    Data(String),

    #[error("missing node list for index n = {0}")]
    MissingIndex(i64),

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    /// Constraint-class errors (bad input data) versus numeric failures.
    pub fn is_constraint(&self) -> bool {
        matches!(
            self,
            Error::InvalidOrder(_)
                | Error::Domain { .. }
                | Error::Constraint(_)
                | Error::MeanNotZero { .. }
                | Error::ConstantP { .. }
                | Error::DegenerateDenominator { .. }
                | Error::Data(_)
                | Error::MissingIndex(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
