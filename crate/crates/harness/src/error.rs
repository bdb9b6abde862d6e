use std::path::{Path, PathBuf};

use eegeval_core::edf::EdfError;
use eegeval_core::efficiency::EfficiencyError;
use eegeval_core::metrics::MetricError;
use eegeval_core::montage::MontageError;
use eegeval_core::preprocess::PreprocessError;
use eegeval_core::probe::ProbeError;
use eegeval_core::sampling::SamplingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    /// Unpaired efficiency cells or a budget the data cannot meet.
    #[error("{0}")]
    Insufficient(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Data(_) | HarnessError::Io { .. } => 3,
            HarnessError::Insufficient(_) => 4,
        }
    }

    /// Prefix the message with where it happened, keeping the category.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            HarnessError::Usage(m) => HarnessError::Usage(format!("{what}: {m}")),
            HarnessError::Data(m) => HarnessError::Data(format!("{what}: {m}")),
            HarnessError::Insufficient(m) => HarnessError::Insufficient(format!("{what}: {m}")),
            e @ HarnessError::Io { .. } => HarnessError::Data(format!("{what}: {e}")),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    EdfError,
    PreprocessError,
    MontageError,
    ProbeError,
    MetricError,
    csv::Error,
    serde_json::Error
);

impl From<SamplingError> for HarnessError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::InvalidBudget(_) => HarnessError::Usage(e.to_string()),
            _ => HarnessError::Insufficient(e.to_string()),
        }
    }
}

impl From<EfficiencyError> for HarnessError {
    fn from(e: EfficiencyError) -> Self {
        match e {
            EfficiencyError::UnpairedCells(_) => HarnessError::Insufficient(e.to_string()),
            _ => HarnessError::Data(e.to_string()),
        }
    }
}
