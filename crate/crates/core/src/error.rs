use thiserror::Error;

/// Failure modes shared by every module of the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Fock truncation violated: tail population {population:.3e} exceeds tolerance {tolerance:.3e}")]
    Truncation { population: f64, tolerance: f64 },

    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state lies outside the logical code space (leakage {leakage:.3e})")]
    OutsideCodeSpace { leakage: f64 },

    #[error("spin state is not a Bell ray (best overlap {best_overlap:.12})")]
    NotBellRay { best_overlap: f64 },

    #[error("resonant denominator `{denominator}` vanishes at R = {r_um} um")]
    Resonance {
        denominator: &'static str,
        r_um: f64,
    },

    #[error("time step too coarse: {what} = {value:.3e} per step (limit {limit})")]
    TimeStep {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("records do not share a time grid: {0}")]
    MismatchedGrids(String),

    #[error("empty averaging window starting at t = {t_start} s")]
    EmptyWindow { t_start: f64 },

    #[error("no steady state detected in the overlap record")]
    NoSteadyState,

    #[error("zero variance input to {0}")]
    ZeroVariance(&'static str),

    #[error("norm drifted to {norm} in {context}")]
    Norm { norm: f64, context: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
