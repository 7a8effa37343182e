use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative order {0} exceeds the supported maximum of 6")]
    UnsupportedOrder(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("match order {match_order} exceeds jet order {jet_order}")]
    OrderMismatch { match_order: u8, jet_order: u8 },

    #[error("non-finite state at time node {node} (t = {time})")]
    BlowUp { node: usize, time: f64 },

    #[error("unknown {what}: {name}")]
    Unknown { what: &'static str, name: String },

    #[error("image format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
