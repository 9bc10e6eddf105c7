use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial A must be monic, got leading coefficient {0}")]
    NonMonic(f64),
    #[error("leading input coefficient b0 must be nonzero")]
    ZeroLeadingInput,
    #[error("delay must be at least 1, got {0}")]
    InvalidDelay(usize),
    #[error("plant is not minimum phase: zero {re:+.6}{im:+.6}i has modulus {modulus:.6} (zeros of B must lie strictly inside the unit disk)")]
    NonMinimumPhase { re: f64, im: f64, modulus: f64 },
    #[error("adaptation gain gamma = {0} violates 0 < gamma < 2, gamma != 1")]
    InvalidGamma(f64),
    #[error("history too shallow: need {need} {what} samples, have {have}")]
    HistoryDepth {
        what: &'static str,
        need: usize,
        have: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("zero divisor in control law: estimate of b0 is zero (update guard violated)")]
    ZeroDivisor,
    #[error("impulse times violate minimum gap {min_gap}: {prev} then {next}")]
    ImpulseGap {
        min_gap: usize,
        prev: usize,
        next: usize,
    },
    #[error("invalid disturbance train: {0}")]
    Disturbance(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("empty sample window")]
    EmptyWindow,
    #[error("switch log must alternate directions: last was {last}, got {got} at k = {k}")]
    SwitchAlternation {
        last: &'static str,
        got: &'static str,
        k: u64,
    },
    #[error("switch instants must be strictly increasing: {prev} then {next}")]
    SwitchOrder { prev: u64, next: u64 },
    #[error("reset direction {direction} inconsistent with parity p = {parity}")]
    ResetParity {
        parity: usize,
        direction: &'static str,
    },
    #[error("event-triggered delay {delay} for application {app} exceeds d2 = {d2}")]
    DelayBudget { app: usize, delay: u64, d2: usize },
    #[error("invalid bus configuration: {0}")]
    BusConfig(String),
    #[error("unknown application {0}")]
    UnknownApp(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reference generator: {0}")]
    Reference(String),
    #[error("divergence at k = {k}: y = {value}")]
    Divergence { k: u64, value: f64 },
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
