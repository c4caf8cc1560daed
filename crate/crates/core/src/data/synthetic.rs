//! Synthetic cross-modal data with known ground truth.
//!
//! Every subject draws a latent identity `z ~ N(0, I)`. At point `p` a
//! sample of modality `M` is
//!
//! `x = o_{M,p} + P_{M,p} z + α tanh(Q_{M,p} z) + N_{M,p} η + σ ε`
//!
//! with `P_{M,p} = sqrt(1 - ρ) S_p + sqrt(ρ) R_{M,p}`: `S_p` is shared by
//! both modalities and `R_{M,p}` is modality specific. With point
//! specificity `λ > 0` point `p` sees `sqrt(1 - λ) z + sqrt(λ) u_p` instead
//! of `z`, where `u_p` is a further per-subject latent local to the point. `η` is a per-sample
//! nuisance vector shared by all points of a sample and `ε` independent
//! noise. Both halves use the same maps with independent `η` and `ε`.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry};
use super::pgm::GrayImage;
use super::store::{FeatureStore, SampleFeatures};
use super::{DataError, LandmarkSet};
use crate::features::template::{FacialPointTemplate, TEMPLATE_CENTER_X};
use crate::features::FaceJets;
use crate::math::derive_seed;
use crate::types::{Half, Modality};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub samples_per_subject_per_modality: usize,
    pub latent_dim: usize,
    /// `α`.
    pub nonlinearity_strength: f64,
    /// `σ`.
    pub noise_sigma: f64,
    pub seed: u64,
    pub n_points: usize,
    pub jet_dim: usize,
    /// Standard deviation of the per-point modality offsets `o_{M,p}`.
    pub modality_offset: f64,
    /// `ρ` in `[0, 1]`: weight of the modality-specific linear maps.
    pub modality_specificity: f64,
    pub nuisance_dim: usize,
    /// Overall scale of the nuisance maps `N_{M,p}`.
    pub nuisance_strength: f64,
    /// `λ` in `[0, 1]`: share of each point's latent that is local to it.
    pub point_specificity: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_subjects: 50,
            samples_per_subject_per_modality: 2,
            latent_dim: 8,
            nonlinearity_strength: 0.5,
            noise_sigma: 0.3,
            seed: 0,
            n_points: 16,
            jet_dim: 40,
            modality_offset: 2.0,
            modality_specificity: 0.5,
            nuisance_dim: 2,
            nuisance_strength: 1.0,
            point_specificity: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Invalid(m));
        if self.n_subjects == 0
            || self.samples_per_subject_per_modality == 0
            || self.n_points == 0
            || self.jet_dim == 0
        {
            return bad("synthetic counts must be at least 1".into());
        }
        if self.latent_dim < 2 {
            return bad(format!(
                "latent_dim must be at least 2, got {}",
                self.latent_dim
            ));
        }
        for (name, v) in [
            ("nonlinearity_strength", self.nonlinearity_strength),
            ("noise_sigma", self.noise_sigma),
            ("modality_offset", self.modality_offset),
            ("nuisance_strength", self.nuisance_strength),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.modality_specificity) {
            return bad("modality_specificity must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.point_specificity) {
            return bad("point_specificity must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Generating parameters, indexed `[point][modality.index()]` where relevant.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub latents: Vec<DVector<f64>>,
    /// Latent seen at each point, `[subject][point]`.
    pub point_latents: Vec<Vec<DVector<f64>>>,
    pub offsets: Vec<[DVector<f64>; 2]>,
    pub linear_maps: Vec<[DMatrix<f64>; 2]>,
    pub nonlinear_maps: Vec<[DMatrix<f64>; 2]>,
    pub nuisance_maps: Vec<[DMatrix<f64>; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub manifest: DatasetManifest,
    pub store: FeatureStore,
    pub truth: SyntheticTruth,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize, std: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

pub fn subject_id(subject: usize) -> String {
    format!("s{subject:03}")
}

pub fn sample_id(subject: usize, modality: Modality, k: usize) -> String {
    format!("s{subject:03}_{modality}_{k}")
}

fn placeholder_entry(subject: usize, modality: Modality, k: usize) -> ManifestEntry {
    let id = sample_id(subject, modality, k);
    ManifestEntry {
        sample_id: id.clone(),
        subject_id: subject_id(subject),
        modality,
        image_path: PathBuf::from(format!("images/{id}.pgm")),
        landmark_path: PathBuf::from(format!("landmarks/{id}.txt")),
    }
}

/// Generate a manifest and per-sample jets directly, without images. Pure
/// function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, DataError> {
    spec.validate()?;
    let (d, l, q) = (spec.jet_dim, spec.latent_dim, spec.nuisance_dim);
    let mut maps_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    let map_std = 1.0 / (l as f64).sqrt();
    let shared_w = (1.0 - spec.modality_specificity).sqrt();
    let specific_w = spec.modality_specificity.sqrt();
    let mut offsets = Vec::with_capacity(spec.n_points);
    let mut linear_maps = Vec::with_capacity(spec.n_points);
    let mut nonlinear_maps = Vec::with_capacity(spec.n_points);
    let mut nuisance_maps = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let shared = gaussian_matrix(&mut maps_rng, d, l, map_std);
        let mut lin = Vec::with_capacity(2);
        let mut off = Vec::with_capacity(2);
        let mut nl = Vec::with_capacity(2);
        let mut nu = Vec::with_capacity(2);
        for _ in 0..2 {
            let specific = gaussian_matrix(&mut maps_rng, d, l, map_std);
            lin.push(&shared * shared_w + specific * specific_w);
            off.push(gaussian_vector(&mut maps_rng, d, spec.modality_offset));
            nl.push(gaussian_matrix(&mut maps_rng, d, l, 2.0 * map_std));
            let nuisance_std = if q == 0 {
                0.0
            } else {
                spec.nuisance_strength / (q as f64).sqrt()
            };
            nu.push(gaussian_matrix(&mut maps_rng, d, q, nuisance_std));
        }
        let pair = |mut v: Vec<DMatrix<f64>>| -> [DMatrix<f64>; 2] {
            let b = v.pop().expect("two");
            [v.pop().expect("two"), b]
        };
        linear_maps.push(pair(lin));
        nonlinear_maps.push(pair(nl));
        nuisance_maps.push(pair(nu));
        let b = off.pop().expect("two");
        offsets.push([off.pop().expect("two"), b]);
    }

    let mut latent_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let latents: Vec<DVector<f64>> = (0..spec.n_subjects)
        .map(|_| gaussian_vector(&mut latent_rng, l, 1.0))
        .collect();
    let mut local_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 3));
    let (keep, local) = (
        (1.0 - spec.point_specificity).sqrt(),
        spec.point_specificity.sqrt(),
    );
    let point_latents: Vec<Vec<DVector<f64>>> = latents
        .iter()
        .map(|z| {
            (0..spec.n_points)
                .map(|_| {
                    let u = gaussian_vector(&mut local_rng, l, 1.0);
                    if spec.point_specificity == 0.0 {
                        z.clone()
                    } else {
                        z * keep + u * local
                    }
                })
                .collect()
        })
        .collect();

    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2));
    let mut entries = Vec::new();
    let mut samples = Vec::new();
    for (s, zs) in point_latents.iter().enumerate() {
        // identity part of every point, computed once per subject
        let clean: Vec<[DVector<f64>; 2]> = (0..spec.n_points)
            .map(|p| {
                let z = &zs[p];
                let one = |m: usize| {
                    let nl =
                        (&nonlinear_maps[p][m] * z).map(f64::tanh) * spec.nonlinearity_strength;
                    &offsets[p][m] + &linear_maps[p][m] * z + nl
                };
                [one(0), one(1)]
            })
            .collect();
        for modality in [Modality::A, Modality::B] {
            let m = modality.index();
            for k in 0..spec.samples_per_subject_per_modality {
                let mut jets: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
                for half in Half::BOTH {
                    let eta = gaussian_vector(&mut sample_rng, q, 1.0);
                    for p in 0..spec.n_points {
                        let mut x = &clean[p][m] + &nuisance_maps[p][m] * &eta;
                        for v in x.iter_mut() {
                            let e: f64 = StandardNormal.sample(&mut sample_rng);
                            *v += spec.noise_sigma * e;
                        }
                        jets[half.index()].push(x.iter().copied().collect());
                    }
                }
                entries.push(placeholder_entry(s, modality, k));
                samples.push(SampleFeatures {
                    sample_id: sample_id(s, modality, k),
                    subject_id: subject_id(s),
                    modality,
                    jets: FaceJets { jets },
                });
            }
        }
    }
    Ok(SyntheticData {
        manifest: DatasetManifest { entries },
        store: FeatureStore {
            jet_dim: d,
            n_points: spec.n_points,
            samples,
        },
        truth: SyntheticTruth {
            latents,
            point_latents,
            offsets,
            linear_maps,
            nonlinear_maps,
            nuisance_maps,
        },
    })
}

/// Data with a planted cross-modal distortion confined to `offset_dim`
/// directions of dominant variance.
///
/// A sample of modality `M` is `x = B z + V (±μ·1 + λ u) + σ ε`, one
/// point per half, where `B` spreads the identity over `identity_dim`
/// orthogonal directions with geometrically decaying scales, `V` spans
/// `offset_dim` further orthogonal directions, the sign of the mean shift
/// `μ` depends on the modality and `u ~ N(0, I)` is drawn per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedSpec {
    pub n_subjects: usize,
    pub samples_per_subject_per_modality: usize,
    pub ambient_dim: usize,
    pub identity_dim: usize,
    /// Ratio between consecutive identity scales.
    pub identity_decay: f64,
    pub offset_dim: usize,
    /// `μ`.
    pub offset_shift: f64,
    /// `λ`.
    pub offset_spread: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n_subjects: 120,
            samples_per_subject_per_modality: 1,
            ambient_dim: 40,
            identity_dim: 12,
            identity_decay: 0.9,
            offset_dim: 3,
            offset_shift: 2.0,
            offset_spread: 4.0,
            noise_sigma: 0.3,
            seed: 0,
        }
    }
}

pub fn generate_planted(spec: &PlantedSpec) -> Result<SyntheticData, DataError> {
    if spec.n_subjects == 0 || spec.samples_per_subject_per_modality == 0 {
        return Err(DataError::Invalid(
            "planted counts must be at least 1".into(),
        ));
    }
    if spec.identity_dim == 0 || spec.identity_dim + spec.offset_dim > spec.ambient_dim {
        return Err(DataError::Invalid(format!(
            "identity_dim + offset_dim must be between 1 and ambient_dim ({})",
            spec.ambient_dim
        )));
    }
    for v in [
        spec.identity_decay,
        spec.offset_shift,
        spec.offset_spread,
        spec.noise_sigma,
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(DataError::Invalid(
                "planted scales must be finite and non-negative".into(),
            ));
        }
    }
    let d = spec.ambient_dim;
    let mut maps_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    let raw = gaussian_matrix(&mut maps_rng, d, spec.identity_dim + spec.offset_dim, 1.0);
    let basis = raw.qr().q();
    let mut identity = basis.columns(0, spec.identity_dim).into_owned();
    for (i, mut c) in identity.column_iter_mut().enumerate() {
        c *= spec.identity_decay.powi(i as i32);
    }
    let offset = basis
        .columns(spec.identity_dim, spec.offset_dim)
        .into_owned();

    let mut latent_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let latents: Vec<DVector<f64>> = (0..spec.n_subjects)
        .map(|_| gaussian_vector(&mut latent_rng, spec.identity_dim, 1.0))
        .collect();
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2));
    let mut entries = Vec::new();
    let mut samples = Vec::new();
    for (s, z) in latents.iter().enumerate() {
        let clean = &identity * z;
        for modality in [Modality::A, Modality::B] {
            let sign = if modality == Modality::A { 1.0 } else { -1.0 };
            for k in 0..spec.samples_per_subject_per_modality {
                let mut jets: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
                for half in Half::BOTH {
                    let u = gaussian_vector(&mut sample_rng, spec.offset_dim, spec.offset_spread)
                        .add_scalar(sign * spec.offset_shift);
                    let mut x = &clean + &offset * u;
                    for v in x.iter_mut() {
                        let e: f64 = StandardNormal.sample(&mut sample_rng);
                        *v += spec.noise_sigma * e;
                    }
                    jets[half.index()].push(x.iter().copied().collect());
                }
                entries.push(placeholder_entry(s, modality, k));
                samples.push(SampleFeatures {
                    sample_id: sample_id(s, modality, k),
                    subject_id: subject_id(s),
                    modality,
                    jets: FaceJets { jets },
                });
            }
        }
    }
    let zeros = || [DVector::zeros(d), DVector::zeros(d)];
    Ok(SyntheticData {
        manifest: DatasetManifest { entries },
        store: FeatureStore {
            jet_dim: d,
            n_points: 1,
            samples,
        },
        truth: SyntheticTruth {
            point_latents: latents.iter().map(|z| vec![z.clone()]).collect(),
            latents,
            offsets: vec![zeros()],
            linear_maps: vec![[identity.clone(), identity]],
            nonlinear_maps: vec![],
            nuisance_maps: vec![[offset.clone(), offset]],
        },
    })
}

/// Image mode: flat textured faces with landmarks, for exercising the
/// feature layer end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticImageSpec {
    pub n_subjects: usize,
    pub samples_per_subject_per_modality: usize,
    /// Side length of the square images in pixels.
    pub size: usize,
    /// Number of mirrored grating pairs per face.
    pub n_components: usize,
    pub pixel_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticImageSpec {
    fn default() -> Self {
        Self {
            n_subjects: 4,
            samples_per_subject_per_modality: 1,
            size: 160,
            n_components: 12,
            pixel_noise: 4.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImageSample {
    pub entry: ManifestEntry,
    pub image: GrayImage,
    pub landmarks: LandmarkSet,
}

struct Grating {
    k: [f64; 2],
    phase: f64,
    amp: f64,
}

/// Render faces whose texture is a left-right symmetric sum of gratings
/// drawn per subject. Modality B inverts and compresses the contrast. Each
/// sample places the template under a small random similarity transform.
pub fn generate_images(
    spec: &SyntheticImageSpec,
    template: &FacialPointTemplate,
) -> Result<Vec<SyntheticImageSample>, DataError> {
    if spec.n_subjects == 0 || spec.samples_per_subject_per_modality == 0 || spec.n_components == 0
    {
        return Err(DataError::Invalid(
            "image synthesis counts must be at least 1".into(),
        ));
    }
    // the 128-pixel template frame plus scale and shift jitter must fit
    if spec.size < 136 || spec.size > 2048 {
        return Err(DataError::Invalid(
            "image size must lie in 136..=2048".into(),
        ));
    }
    if !(spec.pixel_noise.is_finite() && spec.pixel_noise >= 0.0) {
        return Err(DataError::Invalid(
            "pixel_noise must be non-negative".into(),
        ));
    }
    let mut face_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    let faces: Vec<Vec<Grating>> = (0..spec.n_subjects)
        .map(|_| {
            (0..spec.n_components)
                .map(|_| {
                    let f = face_rng.gen_range(0.1..0.8);
                    let a = face_rng.gen_range(0.0..std::f64::consts::PI);
                    Grating {
                        k: [f * a.cos(), f * a.sin()],
                        phase: face_rng.gen_range(0.0..std::f64::consts::TAU),
                        amp: face_rng.gen_range(5.0..20.0),
                    }
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let margin = (spec.size as f64 - 128.0) / 2.0;
    let mut out = Vec::new();
    for (s, gratings) in faces.iter().enumerate() {
        for modality in [Modality::A, Modality::B] {
            for k in 0..spec.samples_per_subject_per_modality {
                let scale = rng.gen_range(0.95..1.05);
                let theta = rng.gen_range(-0.05..0.05);
                let shift = [
                    margin + rng.gen_range(-3.0..3.0),
                    margin + rng.gen_range(-3.0..3.0),
                ];
                let landmarks = template.landmarks.transformed(scale, theta, shift);
                let (sn, cs) = theta.sin_cos();
                let noise: Vec<f64> = (0..spec.size * spec.size)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        spec.pixel_noise * e
                    })
                    .collect();
                let image = GrayImage::from_fn(spec.size, spec.size, |x, y| {
                    // back to template coordinates, centred on the symmetry axis
                    let (u, v) = (x as f64 - shift[0], y as f64 - shift[1]);
                    let tx = (cs * u + sn * v) / scale - TEMPLATE_CENTER_X;
                    let ty = (-sn * u + cs * v) / scale;
                    let texture: f64 = gratings
                        .iter()
                        .map(|g| {
                            g.amp
                                * ((g.k[0] * tx + g.k[1] * ty + g.phase).cos()
                                    + (-g.k[0] * tx + g.k[1] * ty + g.phase).cos())
                        })
                        .sum();
                    let base = match modality {
                        Modality::A => 128.0 + texture,
                        Modality::B => 128.0 - 0.6 * texture,
                    };
                    (base + noise[y * spec.size + x]).clamp(0.0, 255.0)
                });
                out.push(SyntheticImageSample {
                    entry: placeholder_entry(s, modality, k),
                    image,
                    landmarks,
                });
            }
        }
    }
    Ok(out)
}
