use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("intractable constellation product: {pairs} difference pairs exceed budget {budget}")]
    Intractable { pairs: f64, budget: f64 },

    #[error("interference nulling infeasible: {n_t} antennas cannot null {k} users")]
    InfeasibleNulling { n_t: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
