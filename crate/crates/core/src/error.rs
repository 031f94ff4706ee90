use std::path::PathBuf;

use thiserror::Error;

use crate::model::FeatureKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Policy(#[from] PolicyError),

    #[error(transparent)]
    Header(#[from] HeaderError),

    #[error(transparent)]
    Fetch(#[from] FetchError),

    #[error(transparent)]
    Corpus(#[from] CorpusError),

    #[error("unknown media element id {0}")]
    UnknownMedia(usize),

    #[error("invalid {what}: {reason}")]
    InvalidConfig { what: &'static str, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("feature {0} listed more than once")]
    DuplicateKind(FeatureKind),
    #[error("feature {0} requires a positive parameter")]
    MissingParameter(FeatureKind),
    #[error("feature {0} takes no parameter")]
    UnexpectedParameter(FeatureKind),
    #[error("feature {0} has non-positive parameter {1}")]
    NonPositiveParameter(FeatureKind, String),
    #[error(
        "lossless-images-strict-max-bpp ({strict}) exceeds lossless-images-max-bpp ({lenient})"
    )]
    StrictExceedsLenient { strict: String, lenient: String },
    #[error("unknown feature name {0:?}")]
    UnknownFeature(String),
    #[error("malformed parameter {0:?}: expected a decimal with at most 3 fractional digits")]
    MalformedParameter(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("malformed structured header: {0}")]
    Syntax(String),
    #[error("feature {feature} has a value of the wrong type: {value}")]
    ValueType { feature: FeatureKind, value: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{url} is unreachable: {reason}")]
    Unreachable { url: String, reason: String },
    #[error("{0} is not an absolute http(s) URL")]
    BadUrl(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("ranked list line {line}: {reason}")]
    RankedList { line: usize, reason: String },
    #[error("bin {bin} holds {available} domains, fewer than the {wanted} requested")]
    BinTooSmall {
        bin: String,
        available: usize,
        wanted: usize,
    },
    #[error("bins must be disjoint and ascending: {0}")]
    BadBins(String),
    #[error("malformed corpus spec: {0}")]
    Spec(String),
    #[error("cannot aggregate an empty set of reports")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
