use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown agent `{0}`")]
    UnknownAgent(String),

    #[error("agent index {index} out of range for {n} agents")]
    AgentOutOfRange { index: usize, n: usize },

    #[error("agent {0} is already a member of the coalition")]
    AgentInCoalition(usize),

    #[error("component has {n} agents but the exact solver is limited to {limit}; use `bounds` or a sampler (`fpras`, `range-sample`) instead, or raise --limit")]
    ComponentTooLarge { n: usize, limit: usize },

    #[error("coalition size {size} out of range for {n} agents")]
    CoalitionSizeOutOfRange { size: usize, n: usize },

    #[error("inconsistent profile sizes: l={l}, p={p}, z={z} do not add up to n-1 with n={n}")]
    InconsistentProfile {
        l: usize,
        p: usize,
        z: usize,
        n: usize,
    },

    #[error("{name} must lie in the open interval (0, 1), got {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("relative mode needs a positive lower bound for every agent, but agent `{agent}` has lower bound {lower}; run `bounds` first to obtain lower bounds, or use absolute mode")]
    NonPositiveLowerBound { agent: String, lower: f64 },

    #[error("reports cover different agent sets: {0}")]
    MismatchedAgents(String),

    #[error("subgraph size {size} exceeds the {n} available agents")]
    SubgraphTooLarge { size: usize, n: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(serde_json::Error),
}

// Not `#[from]`: that would also expose the parser error as the source, and
// error chains would print its message twice.
impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
