use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("point {point:?} lies outside the domain {domain:?}")]
    Domain { point: Vec<f64>, domain: Vec<(f64, f64)> },
    #[error("kernel construction failed: {0}")]
    Construction(String),
    #[error("kernel tail too heavy: mass {tail_mass:.3e} beyond radius {radius}")]
    DecayViolation { tail_mass: f64, radius: f64 },
    #[error("delta {delta} is not a gap of the sampling set")]
    Coverage { delta: f64 },
    #[error("no contraction certificate: certified {certified:.4}, measured {measured:.4}")]
    NoCertificate { certified: f64, measured: f64 },
    #[error("iteration diverged at step {step} (ratio {ratio:.4})")]
    Divergence { step: usize, ratio: f64, trace: Box<crate::reconstruct::IterationTrace> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
