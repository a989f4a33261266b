use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Parse failure located by byte offset rather than line.
    #[error("{}: parse error at byte {offset}: {msg}", path.display())]
    ParseAt {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("feature vector for id {id:?} has {found} values, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("story {story_id:?}: {msg}")]
    Structure { story_id: String, msg: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("origin error: {0}")]
    Origin(String),

    #[error("annotated image {0:?} has no feature vector")]
    Join(String),

    #[error("brute-force enumeration refused: {distinct} distinct items exceeds the limit of {limit}")]
    UniverseTooLarge { distinct: usize, limit: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("frequent itemset table is not downward closed: antecedent {0:?} missing")]
    ClosureViolation(Vec<u32>),

    #[error("incompatible rule stores: {0}")]
    IncompatibleStore(String),

    #[error("rule stores use different vocabularies ({0}); remap one store before merging")]
    RemapRequired(String),

    #[error("{}: unsupported rule file format {found:?} (expected {expected:?})", path.display())]
    Version {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("expected {expected} images per stream, got {found}")]
    Arity { expected: usize, found: usize },

    #[error("inferences and references are misaligned: {0}")]
    Alignment(String),

    #[error("bounds error: {0}")]
    Bounds(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
