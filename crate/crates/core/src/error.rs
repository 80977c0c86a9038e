use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("unsupported channel count {0}, only mono is accepted")]
    UnsupportedChannels(u16),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),

    #[error("invalid sample rate: {0}")]
    InvalidRate(String),
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal has {len} samples, at least {required} are needed")]
    SignalTooShort { len: usize, required: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("uniform resampling needs at least 2 frequency bins, got {0}")]
    TooFewBins(usize),
    #[error("uniform grid has {grid} points, at least {required} are needed")]
    GridTooSmall { grid: usize, required: usize },

    #[error("{frames} frames cannot support {components} mixture components")]
    TooFewFrames { frames: usize, components: usize },
    #[error("degenerate training data: all frames are identical")]
    DegenerateData,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("feature matrix has no frames")]
    EmptyFeatures,
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("manifest {0} has no entries")]
    EmptyManifest(String),
    #[error("{}:{line}: {reason}", path.display())]
    ManifestParse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("empty score population: {0}")]
    EmptyPopulation(String),
    #[error("no spoof trials for system(s): {0}")]
    NoSpoofSystems(String),
    #[error("no opinion ratings for system {0}")]
    NoRatings(String),

    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("model schema error: {0}")]
    Schema(String),
    #[error("feature cache error: {0}")]
    Cache(String),

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Attach the offending file path to an error raised while processing it.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::FileNotFound(_) | Error::Io { .. } | Error::InFile { .. }) => e,
            e => Error::InFile {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, skipping `InFile` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit status for the CLI: 2 for data/validation errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::DegenerateData | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
