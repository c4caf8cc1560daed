//! Facial-point placement and Gabor jets.

pub mod gabor;
pub mod template;
pub mod warp;

pub use gabor::{mirror_jet, GaborBank, GaborBankSpec, GaborError};
pub use template::{FacialPointTemplate, POINTS_PER_HALF};
pub use warp::{fit_warp, fit_warp_points, WarpError, WarpModel, DEFORMATION_FACTOR};

use crate::data::{GrayImage, LandmarkSet};
use crate::types::{Half, Modality};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Gabor(#[from] GaborError),
}

/// Gabor magnitudes at one facial point of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureJet {
    pub values: Vec<f64>,
    pub point_index: usize,
    pub half: Half,
    pub modality: Modality,
}

/// Jets of one face: `jets[half.index()][point]`.
///
/// Right-half jets are stored with the mirror orientation permutation
/// applied, so that point `i` of both halves is described in the same
/// (left-half) orientation frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceJets {
    pub jets: [Vec<Vec<f64>>; 2],
}

impl FaceJets {
    /// One half as a single vector, points in index order.
    pub fn half_vector(&self, half: Half) -> Vec<f64> {
        self.jets[half.index()].iter().flatten().copied().collect()
    }

    pub fn to_feature_jets(&self, modality: Modality) -> Vec<FeatureJet> {
        Half::BOTH
            .iter()
            .flat_map(|&half| {
                self.jets[half.index()]
                    .iter()
                    .enumerate()
                    .map(move |(i, v)| FeatureJet {
                        values: v.clone(),
                        point_index: i,
                        half,
                        modality,
                    })
            })
            .collect()
    }
}

/// Place the template points on an image through its landmarks and
/// extract one jet per point. The warp kernel width is
/// `deformation_factor` times the template's eye distance, since the warp
/// is evaluated in template coordinates.
pub fn extract_face(
    image: &GrayImage,
    landmarks: &LandmarkSet,
    template: &FacialPointTemplate,
    bank: &GaborBank,
    deformation_factor: f64,
) -> Result<FaceJets, FeatureError> {
    landmarks
        .validate()
        .map_err(|e| WarpError::Landmarks(e.to_string()))?;
    let eye = template.landmarks.eye_distance();
    if !(deformation_factor.is_finite() && deformation_factor > 0.0) {
        return Err(WarpError::BadEyeDistance(eye).into());
    }
    let warp = fit_warp_points(
        &template.landmarks.points,
        &landmarks.points,
        deformation_factor * eye,
    )?;
    let perm = bank.spec.mirror_permutation();
    let mut jets: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for half in Half::BOTH {
        for &p in &template.points[half.index()] {
            let jet = bank.jet(image, warp.apply(p))?;
            let jet = match half {
                Half::Left => jet,
                Half::Right => perm.iter().map(|&i| jet[i]).collect(),
            };
            jets[half.index()].push(jet);
        }
    }
    Ok(FaceJets { jets })
}
