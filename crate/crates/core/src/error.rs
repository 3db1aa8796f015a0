use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("zero wrench has no motion direction")]
    ZeroWrench,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pusher finger {finger} starts inside the object (gap {gap:.3e} m)")]
    PusherInsideObject { finger: usize, gap: f64 },

    #[error("pusher speed {speed:.4} m/s exceeds the quasi-static limit {limit:.4} m/s")]
    NonQuasiStatic { speed: f64, limit: f64 },

    #[error("contact solver failed at t = {t:.4} s: no consistent contact mode")]
    ContactSolve { t: f64 },

    #[error("timestamp {t} is not after the previous step {last}")]
    OutOfOrder { t: f64, last: f64 },

    #[error("linear system is underdetermined (singular information at node {node})")]
    Underdetermined { node: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("no visual sample available before t = {0}")]
    NoVisualYet(f64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
