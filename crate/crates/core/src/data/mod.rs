//! Manifests, landmark files, PGM images, the feature store, the model
//! archive container and the synthetic data generator.

pub mod archive;
pub mod landmarks;
pub mod manifest;
pub mod pgm;
pub mod store;
pub mod synthetic;
mod wire;

pub use archive::{load_model, save_model, ArchiveError, ModelArchive, ARCHIVE_VERSION};
pub use landmarks::{parse_landmarks, LandmarkSet, LANDMARK_COUNT};
pub use manifest::{parse_manifest, DatasetManifest, ManifestEntry};
pub use pgm::{parse_pgm, GrayImage};
pub use store::{FeatureStore, SampleFeatures};
pub use synthetic::{
    generate_images, generate_planted, generate_synthetic, PlantedSpec, SyntheticData,
    SyntheticImageSample, SyntheticImageSpec, SyntheticSpec, SyntheticTruth,
};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("{path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        DataError::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
