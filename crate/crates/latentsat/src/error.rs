use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {context} at offset {offset}")]
    NonFinite { context: String, offset: usize },

    #[error("value out of range in {context} at offset {offset}: {value}")]
    OutOfRange {
        context: String,
        offset: usize,
        value: f32,
    },

    #[error("bad magic bytes in {path:?}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: [u8; 4] },

    #[error("unsupported format version {found} in {path:?} (supported: {supported})")]
    UnsupportedVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("file truncated: {path:?} while reading {context}")]
    Truncated { path: PathBuf, context: String },

    #[error("entry {name:?}: data length {len} does not match shape {shape:?}")]
    EntryLengthMismatch {
        name: String,
        shape: Vec<usize>,
        len: usize,
    },

    #[error("duplicate entry name {0:?}")]
    DuplicateEntry(String),

    #[error("missing weight entry {name:?} required by layer {layer:?}")]
    MissingEntry { name: String, layer: String },

    #[error("manifest parse error at line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
