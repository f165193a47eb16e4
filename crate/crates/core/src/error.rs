use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("channel overlap: spacing {spacing_hz:.4e} Hz is below the symbol rate {symbol_rate:.4e} Bd")]
    ChannelOverlap { spacing_hz: f64, symbol_rate: f64 },
    #[error("no accepted samples while estimating {0}")]
    NoAcceptedSamples(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("receiver: {0}")]
    Receiver(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
