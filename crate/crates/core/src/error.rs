use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller supplied something malformed or out of range.
    Input,
    /// A numerical routine failed (non-finite values, stagnation, ...).
    Numerical,
    /// A mathematical hypothesis or constraint does not hold.
    Hypothesis,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("compact box required: the space is unbounded and no nest index was given")]
    CompactBoxRequired,

    #[error("cannot normalize: integral is {0}")]
    CannotNormalize(f64),

    #[error("restriction has null mass on the requested box")]
    NullRestriction,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("boundary point: {0:?} is not in the interior of the parameter space")]
    BoundaryPoint(Vec<f64>),

    #[error("non-finite value in {context} at {at:?}")]
    NonFinite { context: String, at: Vec<f64> },

    #[error("divergent integrand: jeffreys density vanishes at {0:?} where the prior is positive")]
    DivergentIntegrand(Vec<f64>),

    #[error("too many excluded samples: {excluded} of {total} density ratios were non-finite")]
    TooManyExclusions { excluded: usize, total: usize },

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("constraints are not linearly independent on the grid (condition number {0:.3e})")]
    DependentConstraints(f64),

    #[error("newton stagnation after {iterations} iterations, residuals {residuals:?}")]
    Stagnation { iterations: usize, residuals: Vec<f64> },

    #[error("tail not power-law in window: regression residual {0:.4} exceeds 0.05")]
    TailNotPowerLaw(f64),

    #[error("decay regime not covered: {0}")]
    DecayRegime(String),

    #[error("enlarge search interval: maximizer {0} sits on the interval edge")]
    EnlargeSearchInterval(f64),

    #[error("hypothesis failed for {integral}: {detail}")]
    HypothesisFailed { integral: String, detail: String },

    #[error("g must vanish at the improper boundary (g ratio {0:.3e} along the nest)")]
    GMustVanish(f64),

    #[error("g must be positive, found {value} at {at:?}")]
    NonPositiveG { value: f64, at: Vec<f64> },

    #[error("compactify first: marginalized likelihood is not finite at {0:?}")]
    CompactifyFirst(Vec<f64>),

    #[error("stuck chain: all proposals rejected for {0} consecutive sweeps")]
    StuckChain(usize),

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::CompactBoxRequired
            | Error::GridMismatch(_)
            | Error::BoundaryPoint(_) => ErrorKind::Input,
            Error::Infeasible(_)
            | Error::DependentConstraints(_)
            | Error::DecayRegime(_)
            | Error::HypothesisFailed { .. }
            | Error::GMustVanish(_)
            | Error::NonPositiveG { .. }
            | Error::TailNotPowerLaw(_)
            | Error::StructureMismatch(_) => ErrorKind::Hypothesis,
            Error::CannotNormalize(_)
            | Error::NullRestriction
            | Error::NonFinite { .. }
            | Error::DivergentIntegrand(_)
            | Error::TooManyExclusions { .. }
            | Error::Stagnation { .. }
            | Error::EnlargeSearchInterval(_)
            | Error::CompactifyFirst(_)
            | Error::StuckChain(_)
            | Error::DegenerateChain(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn non_finite(context: impl Into<String>, at: &[f64]) -> Self {
        Error::NonFinite {
            context: context.into(),
            at: at.to_vec(),
        }
    }
}
