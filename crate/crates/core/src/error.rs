use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A rational term of the kinetics has a zero (or non-finite) denominator.
    #[error("domain error: denominator {denominator} is {value} at state {state}")]
    Domain {
        denominator: &'static str,
        value: f64,
        state: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("leading coefficient is zero; polynomial degree is degenerate")]
    DegenerateDegree,

    #[error("root refinement did not converge for candidate v = {root}: {reason}")]
    Convergence { root: f64, reason: String },

    #[error("solution blew up at t = {time} (cell {cell}, field {field})")]
    BlowUp {
        time: f64,
        cell: usize,
        field: &'static str,
    },

    #[error("field {field} went negative ({value:e}) at t = {time}, cell {cell}")]
    Negative {
        time: f64,
        cell: usize,
        field: &'static str,
        value: f64,
    },

    #[error("bisection bracket [{lo}, {hi}] does not enclose a sign change (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("coexistence branch lost; last valid p2 = {last_p2}")]
    BranchLost { last_p2: f64 },

    #[error("time step {dt} exceeds the explicit stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image encoding failed: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// Whether the failure is numerical (blow-up, non-convergence) rather than a usage problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Convergence { .. }
                | Error::BlowUp { .. }
                | Error::Negative { .. }
                | Error::BranchLost { .. }
        )
    }
}
