use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("potential not in L1_s: {0}")]
    NotIntegrable(String),
    #[error("tail bound violated on branch {branch}: {value:.3e} >= {tol:.1e}")]
    Tail { branch: usize, value: f64, tol: f64 },
    #[error("Volterra iteration did not converge after {iterations} sweeps (last change {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("|1/T| = {0:.3e} at z = {1}: too close to a pole")]
    PoleProximity(f64, String),
    #[error("degenerate Wronskian |W| = {0:.3e}")]
    DegenerateWronskian(f64),
    #[error("numerical quality check failed: {0}")]
    Quality(String),
    #[error("spectral parameter out of domain: {0}")]
    Domain(String),
    #[error("quadrature flagged: {0}")]
    Quadrature(String),
    #[error("Born series precondition violated: lambda0 = {lambda0} must exceed {required}")]
    SeriesPrecondition { lambda0: f64, required: f64 },
    #[error("memory guard: {0} kernel entries requested")]
    MemoryGuard(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
