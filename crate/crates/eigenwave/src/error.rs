//! Crate-wide error type.

use std::fmt;

/// Alias for results produced by this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the analytic kernels, policy derivations, and the
/// Monte Carlo simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the operation's domain.
    Domain(String),
    /// The antenna configuration is too large for the permutation expansion
    /// (m > 6, or a factorial beyond 170! would be required).
    ConfigTooLarge(String),
    /// A root-finding bracket does not contain the target value. Carries the
    /// bracket endpoints and the function values there.
    NoBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    /// An iterative method (bisection, continued fraction, eigen-solver)
    /// exhausted its iteration budget.
    Convergence(&'static str),
    /// The stream is effectively always in outage (transmit probability
    /// below 1e-12), so policy constants cannot be derived.
    Degenerate(String),
    /// The BER target violates the feasibility ceiling (xi/2)(lambda_out/lambda_mea);
    /// the suboptimal allocation with lambda_0 = lambda_out does not exist.
    Infeasible { target_ber: f64, ceiling: f64 },
    /// A closed-form term with exponent N = 0 was encountered where the
    /// analytic log-tail kernel is undefined; the caller should fall back
    /// to quadrature.
    AnalyticFormUnavailable,
    /// A computed probability or density violates its mathematical bounds
    /// by more than roundoff tolerance.
    NumericConsistency(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::ConfigTooLarge(msg) => write!(f, "configuration too large: {msg}"),
            Error::NoBracket { lo, hi, f_lo, f_hi } => write!(
                f,
                "target not bracketed in [{lo:e}, {hi:e}] (values {f_lo:e}, {f_hi:e})"
            ),
            Error::Convergence(what) => write!(f, "iteration budget exhausted in {what}"),
            Error::Degenerate(msg) => write!(f, "degenerate configuration: {msg}"),
            Error::Infeasible { target_ber, ceiling } => write!(
                f,
                "infeasible spec: target BER {target_ber:e} exceeds ceiling {ceiling:e}"
            ),
            Error::AnalyticFormUnavailable => {
                write!(f, "analytic form unavailable (exponent-zero term)")
            }
            Error::NumericConsistency(msg) => write!(f, "numeric consistency error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
