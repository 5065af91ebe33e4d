use thiserror::Error;

use crate::fst::StateId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("right operand of composition has an input-epsilon arc at state {state}")]
    InputEpsilonInRightOperand { state: StateId },

    #[error("machine has a cycle through state {state}")]
    Cycle { state: StateId },

    #[error("machine has no accepting path")]
    NoAcceptingPath,

    #[error("transcript cannot be aligned to {frames} frames")]
    UnrealizableTranscript { frames: usize },

    #[error("utterance {utterance}: transcript cannot be aligned to {frames} frames")]
    UnrealizableUtterance { utterance: usize, frames: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid emission matrix: {0}")]
    Emission(String),

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    #[error("invalid transcript: {0}")]
    Transcript(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("instance too large to enumerate: {0}")]
    TooLarge(String),

    #[error("invalid model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
