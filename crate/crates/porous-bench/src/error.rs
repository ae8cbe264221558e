use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: porous_stokes::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for porous_stokes::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| BenchError::Stage { stage, source })
    }
}
