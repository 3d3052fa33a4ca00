use thiserror::Error;

/// Every failure the engine can report. Numerical kernels and the model
/// layers share one enum so callers can route on the failing stage.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("step size underflow at t = {t} (h = {h:e}); system is stiff or blowing up")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite rate at t = {t}")]
    NonFiniteRate { t: f64 },

    #[error("integrator exceeded {max_steps} steps before t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no sign change on bracket [{lo}, {hi}] (g(lo) = {g_lo:e}, g(hi) = {g_hi:e})")]
    NoSignChange { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("time {t} lies outside the trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("compartment {compartment} went negative ({value:e}) at t = {t}")]
    NegativeCompartment {
        compartment: &'static str,
        value: f64,
        t: f64,
    },

    #[error("singular linear system in {0}")]
    SingularSystem(&'static str),

    #[error("bank {bank} liquidated more than its trading book (Pi = {pi}) at t = {t}")]
    TotalLiquidation { bank: String, pi: f64, t: f64 },

    #[error("market exhausted at t = {t}: non-bank sales exceed market depth (value down to {fraction:e} of start)")]
    MarketExhausted { t: f64, fraction: f64 },

    #[error("degenerate denominator in {0}")]
    Degenerate(String),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
