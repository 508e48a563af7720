use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or malformed input.
    #[error("domain error: {0}")]
    Domain(String),
    /// The queue load `V` is not below the capacity `Ĉ`.
    #[error("unstable regime: speed {v} is not below capacity {c_hat}")]
    Unstable { v: f64, c_hat: f64 },
    /// Drift too close to zero for the asymmetric formulas.
    #[error("degenerate drift: |V - Ĉ| = {0:e}")]
    DegenerateDrift(f64),
    /// A numeric routine failed to converge or bracket.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("infeasible relay plan: {0}")]
    Infeasible(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
