use std::path::Path;

use rayon::prelude::*;

use super::{PipelineConfig, PipelineError};
use crate::data::{
    parse_landmarks, parse_pgm, DataError, DatasetManifest, FeatureStore, SampleFeatures,
};
use crate::features::{extract_face, FacialPointTemplate, GaborBank, POINTS_PER_HALF};

/// Extract jets for every manifest entry, in manifest order. Relative image
/// and landmark paths resolve against `base_dir`.
pub fn extract_store(
    config: &PipelineConfig,
    manifest: &DatasetManifest,
    base_dir: &Path,
) -> Result<FeatureStore, PipelineError> {
    let template = FacialPointTemplate::builtin();
    let bank = GaborBank::new(config.gabor.clone()).map_err(crate::features::FeatureError::from)?;
    let samples = manifest
        .entries
        .par_iter()
        .map(|e| {
            let image_path = base_dir.join(&e.image_path);
            let landmark_path = base_dir.join(&e.landmark_path);
            let bytes =
                std::fs::read(&image_path).map_err(|err| DataError::io(&image_path, err))?;
            let image = parse_pgm(&bytes)?;
            let text = std::fs::read_to_string(&landmark_path)
                .map_err(|err| DataError::io(&landmark_path, err))?;
            let landmarks = parse_landmarks(&text)?;
            let jets = extract_face(
                &image,
                &landmarks,
                &template,
                &bank,
                config.warp.deformation_factor,
            )
            .map_err(|source| PipelineError::Sample {
                id: e.sample_id.clone(),
                source,
            })?;
            Ok(SampleFeatures {
                sample_id: e.sample_id.clone(),
                subject_id: e.subject_id.clone(),
                modality: e.modality,
                jets,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let store = FeatureStore {
        jet_dim: config.gabor.jet_len(),
        n_points: POINTS_PER_HALF,
        samples,
    };
    store.validate()?;
    Ok(store)
}
