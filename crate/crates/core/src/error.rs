use std::fmt;

/// Pipeline stage names used to tag errors surfacing from [`crate::pipeline::run_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Strip,
    Histogram,
    Threshold,
    Segment,
    Extract,
    Score,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Strip => "artifact removal",
            Stage::Histogram => "histogram",
            Stage::Threshold => "thresholding",
            Stage::Segment => "MRF-EM segmentation",
            Stage::Extract => "lesion extraction",
            Stage::Score => "scoring",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported depth: maxval {0} (only 255 is accepted)")]
    UnsupportedDepth(u32),
    #[error("size error: expected {expected} bytes of pixel data, found {actual}")]
    Size { expected: usize, actual: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    Dimension {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("empty region: {0}")]
    EmptyRegion(&'static str),
    #[error("degenerate histogram: fewer than two occupied bins")]
    DegenerateHistogram,
    #[error("exhaustive search supports at most 3 cuts, got {0}")]
    OracleScope(usize),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ambiguous lesion class: classes {0} and {1} share the highest mean")]
    AmbiguousClass(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyScope,
    #[error("no results to aggregate")]
    EmptyCorpus,
    #[error("phantom spec error: {0}")]
    Spec(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Strips any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
