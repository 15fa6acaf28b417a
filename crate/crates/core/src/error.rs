use thiserror::Error;

/// Errors produced by graph construction, loss evaluation, parsing and the
/// synthetic lab.
#[derive(Debug, Error)]
pub enum Error {
    /// No alignment of the requested length fits the label graph.
    #[error("empty intersection: no alignment of {num_frames} frame(s) fits the label graph")]
    EmptyIntersection { num_frames: usize },

    #[error("cycle detected in explicit arcs")]
    CycleDetected,

    #[error("graph is empty after trimming")]
    EmptyGraph,

    #[error("empty pronunciation")]
    EmptyPronunciation,

    #[error("more than {limit} accepted sequences")]
    LimitExceeded { limit: usize },

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("brute-force search space {size} exceeds guard {guard}")]
    TooLarge { size: u128, guard: u128 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown word(s): {}", .0.join(", "))]
    UnknownWords(Vec<String>),

    #[error("empty reference: no reference phonemes to score against")]
    EmptyReference,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid emissions: {0}")]
    InvalidEmissions(String),

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
