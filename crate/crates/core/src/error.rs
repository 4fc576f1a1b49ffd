use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("value {value} outside the domain of `{name}` (cardinality {card})")]
    ValueOutOfDomain { name: String, value: usize, card: usize },

    #[error("`{0}` must be binary")]
    NotBinary(String),

    #[error("kappa {0} outside the admissible range")]
    KappaOutOfRange(f64),

    #[error("mismatched supports: {0}")]
    MismatchedSupport(String),

    #[error("conditional undefined at {0}: conditioning event has zero probability")]
    Unsupported(String),

    #[error("renderer error: {0}")]
    Render(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("input not separable: best achieved margin {0}")]
    NotSeparable(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
