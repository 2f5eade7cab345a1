use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular matrix in {0}")]
    SingularMatrix(&'static str),

    #[error("degenerate case: kappa(beta*) = {kappa_star:e}, kappa~(beta*) = {kappa_tilde_star:e} (theory inapplicable)")]
    Degenerate {
        kappa_star: f64,
        kappa_tilde_star: f64,
    },

    #[error("Hopf analysis does not apply in region {0}")]
    HopfNotApplicable(&'static str),

    #[error("beta is on the wrong side of beta* (omega = {omega:e} <= 0)")]
    WrongSideOfBetaStar { omega: f64 },

    #[error("no sign change of the spectral abscissa on [{tau_lo}, {tau_hi}] ({lo_value:e}, {hi_value:e})")]
    NoCrossing {
        tau_lo: f64,
        tau_hi: f64,
        lo_value: f64,
        hi_value: f64,
    },

    #[error("solution blew up at t = {time}")]
    Blowup { time: f64 },

    #[error("insufficient data: tail window spans {available} time units, needs {needed}")]
    InsufficientData { needed: f64, available: f64 },

    #[error("eigensolver failure: {0}")]
    EigenSolver(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Config(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
