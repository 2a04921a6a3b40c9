use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    /// A row of an input file could not be parsed. `row` is 1-based.
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: {message}")]
    InvalidBook { row: usize, message: String },

    #[error("row count mismatch: {messages} message rows vs {books} orderbook rows")]
    RowCountMismatch { messages: usize, books: usize },

    #[error("metadata mismatch: {0}")]
    Metadata(String),

    #[error("book error: {0}")]
    Book(String),

    #[error("undefined mid-quote: {0}")]
    UndefinedMid(&'static str),

    #[error("series too short: need {needed} prices, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("no price change in series")]
    NoPriceChange,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown feature set: {0}")]
    UnknownFeatureSet(String),

    #[error("depth {requested} exceeds available depth {available}")]
    DepthExceeded { requested: usize, available: usize },

    #[error("imbalance undefined at level {level}")]
    UndefinedImbalance { level: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("class {class} has {count} samples, need at least {needed}")]
    ClassTooSmall {
        class: i8,
        count: usize,
        needed: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("config error: {0}")]
    Config(String),

    /// Wraps a failure from one pipeline stage of an experiment run.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(row: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
