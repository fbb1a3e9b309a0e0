use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no root: residual does not change sign on [{lo}, {hi}] (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})")]
    NoRoot {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("time {t} is before the flare start {t0}")]
    TimeBeforeStart { t: f64, t0: f64 },

    #[error("time {t} is outside the span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudgetExceeded { max_steps: usize, t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("vector field returned a non-finite value at t = {t}")]
    NonFiniteRhs { t: f64 },

    #[error("Riccati solution became non-finite at t = {t}")]
    RiccatiBlowUp { t: f64 },

    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
