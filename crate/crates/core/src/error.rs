use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid damage scenario {id}: {reason}")]
    InvalidScenario { id: u32, reason: String },

    #[error("invalid perturbation spec: {0}")]
    InvalidSpec(String),

    #[error("model definition error: {0}")]
    ModelDefinition(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("simulation diverged at step {step}: {reason}")]
    SimulationDivergence { step: usize, reason: String },

    #[error("simulation failed for scenario {scenario}, impulse {impulse}: {source}")]
    Generation {
        scenario: u32,
        impulse: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("vocabulary mismatch: {0}")]
    Vocabulary(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint does not match network at layer {layer} ({name}): {reason}")]
    LayerMismatch {
        layer: usize,
        name: String,
        reason: String,
    },

    #[error("corrupt dataset: {0}")]
    CorruptDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
