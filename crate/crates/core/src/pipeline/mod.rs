//! End-to-end matching: RBM bank, per-half PCA heads, fused cosine scores.

mod extract;
mod protocol;

pub use extract::extract_store;
pub use protocol::{run_protocol, run_sweep, split_metrics, tune_removed_k, SweepRow};

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bank::{infer_bank_rows, train_bank, BankConfig, PointPairs, RbmBank};
use crate::data::{
    DataError, FeatureStore, PlantedSpec, SampleFeatures, SyntheticImageSpec, SyntheticSpec,
};
use crate::eval::{EvalError, SplitPlan, DEFAULT_FAR};
use crate::features::{FeatureError, GaborBankSpec, DEFORMATION_FACTOR};
use crate::head::{cosine_matrix, fit_head, zscore_normalize, HeadError, ProjectionHead};
use crate::multimodal::InferenceConfig;
use crate::rbm::RbmError;
use crate::types::{Half, Modality};

/// Components removed after the RBM stage.
pub const REMOVED_K_RBM: usize = 11;
/// Components removed when PCA runs directly on the jets.
pub const REMOVED_K_BASELINE: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("data")]
    Data(#[from] DataError),
    #[error("features")]
    Features(#[from] FeatureError),
    #[error("features of sample {id}")]
    Sample { id: String, source: FeatureError },
    #[error("rbm bank")]
    Bank(#[from] RbmError),
    #[error("head")]
    Head(#[from] HeadError),
    #[error("eval")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpSettings {
    /// RBF kernel width as a fraction of the template eye distance.
    pub deformation_factor: f64,
}

impl Default for WarpSettings {
    fn default() -> Self {
        Self {
            deformation_factor: DEFORMATION_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub gabor: GaborBankSpec,
    pub warp: WarpSettings,
    pub bank: BankConfig,
    pub inference: InferenceConfig,
    /// Run the RBM stage; off gives the jets-plus-PCA baseline.
    pub use_rbm: bool,
    /// Run the PCA head; off scores raw features directly.
    pub use_pca: bool,
    /// Overrides the stage-dependent default of removed components.
    pub removed_k: Option<usize>,
    pub energy_cutoff: Option<f64>,
    /// Sum the two half scores; off scores the left half only.
    pub fusion: bool,
    pub zscore: bool,
    /// Train a separate bank per half instead of one bank fed by both halves.
    pub per_half_banks: bool,
    /// Also score each split's training subjects.
    pub train_metrics: bool,
    pub far: f64,
    pub plan: SplitPlan,
    pub synthetic: SyntheticSpec,
    pub planted: PlantedSpec,
    pub images: SyntheticImageSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gabor: GaborBankSpec::default(),
            warp: WarpSettings::default(),
            bank: BankConfig::default(),
            inference: InferenceConfig::default(),
            use_rbm: true,
            use_pca: true,
            removed_k: None,
            energy_cutoff: None,
            fusion: true,
            zscore: false,
            per_half_banks: false,
            train_metrics: true,
            far: DEFAULT_FAR,
            plan: SplitPlan::default(),
            synthetic: SyntheticSpec::default(),
            planted: PlantedSpec::default(),
            images: SyntheticImageSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Apply one master seed to every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.bank.train.seed = seed;
        self.inference.seed = seed;
        self.plan.seed = seed;
        self.synthetic.seed = seed;
        self.planted.seed = seed;
        self.images.seed = seed;
    }

    pub fn effective_removed_k(&self) -> usize {
        self.removed_k.unwrap_or(if self.use_rbm {
            REMOVED_K_RBM
        } else {
            REMOVED_K_BASELINE
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.gabor.validate().map_err(FeatureError::from)?;
        if !(self.warp.deformation_factor.is_finite() && self.warp.deformation_factor > 0.0) {
            return bad("warp.deformation_factor must be positive".into());
        }
        self.bank.train.validate()?;
        if self.bank.n_hidden == 0 || self.bank.global_hidden == 0 {
            return bad("bank hidden sizes must be at least 1".into());
        }
        if self.inference.method == crate::multimodal::InferenceMethod::Gibbs
            && self.inference.sweeps < 2
        {
            return bad("Gibbs inference needs at least 2 sweeps".into());
        }
        if !(0.0..=1.0).contains(&self.far) {
            return bad(format!("far {} outside [0, 1]", self.far));
        }
        if let Some(f) = self.energy_cutoff {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("energy_cutoff {f} outside (0, 1]"));
            }
        }
        if self.per_half_banks && !self.use_rbm {
            return bad("per_half_banks needs use_rbm".into());
        }
        self.synthetic.validate()?;
        Ok(())
    }
}

/// Everything fitted on training subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchModel {
    /// Empty without the RBM stage, one shared bank, or one bank per half.
    pub banks: Vec<RbmBank>,
    /// One head per half, absent without the PCA stage.
    pub heads: Option<[ProjectionHead; 2]>,
}

impl MatchModel {
    fn bank_for(&self, half: Half) -> Option<&RbmBank> {
        match self.banks.len() {
            0 => None,
            1 => Some(&self.banks[0]),
            _ => Some(&self.banks[half.index()]),
        }
    }

    /// Dimension of the vectors entering the head for the given store shape.
    pub fn feature_dim(&self, store: &FeatureStore) -> usize {
        self.bank_for(Half::Left)
            .map_or(store.jet_dim * store.n_points, |b| b.output_dim())
    }
}

/// Samples sorted by id, so downstream results never depend on input order.
pub fn sorted_samples<'a>(
    samples: impl IntoIterator<Item = &'a SampleFeatures>,
) -> Vec<&'a SampleFeatures> {
    let mut v: Vec<&SampleFeatures> = samples.into_iter().collect();
    v.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    v
}

/// Per-point training pairs: every (A, B) sample combination of each
/// subject. With `half = None` both halves are stacked, left first.
pub fn training_pairs(
    store: &FeatureStore,
    train: &[&SampleFeatures],
    half: Option<Half>,
) -> Vec<PointPairs> {
    let mut by_subject: std::collections::BTreeMap<&str, [Vec<&SampleFeatures>; 2]> =
        Default::default();
    for s in train {
        by_subject.entry(s.subject_id.as_str()).or_default()[s.modality.index()].push(s);
    }
    let mut pa: Vec<&SampleFeatures> = Vec::new();
    let mut pb: Vec<&SampleFeatures> = Vec::new();
    for [a, b] in by_subject.values() {
        for sa in a {
            for sb in b {
                pa.push(sa);
                pb.push(sb);
            }
        }
    }
    let halves: Vec<Half> = half.map_or(Half::BOTH.to_vec(), |h| vec![h]);
    (0..store.n_points)
        .map(|p| {
            let stack = |side: &[&SampleFeatures]| {
                let blocks: Vec<DMatrix<f64>> = halves
                    .iter()
                    .map(|&h| store.point_matrix(side, h, p))
                    .collect();
                let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
                let mut m = DMatrix::zeros(rows, store.jet_dim);
                let mut at = 0;
                for b in &blocks {
                    m.rows_mut(at, b.nrows()).copy_from(b);
                    at += b.nrows();
                }
                m
            };
            PointPairs {
                a: stack(&pa),
                b: stack(&pb),
            }
        })
        .collect()
}

/// Pre-head features of one half, one row per sample in the given order.
pub fn represent(
    config: &PipelineConfig,
    model: &MatchModel,
    store: &FeatureStore,
    samples: &[&SampleFeatures],
    half: Half,
) -> Result<DMatrix<f64>, PipelineError> {
    let Some(bank) = model.bank_for(half) else {
        return Ok(store.half_matrix(samples, half));
    };
    let mut out = DMatrix::zeros(samples.len(), bank.output_dim());
    for modality in [Modality::A, Modality::B] {
        let idx: Vec<usize> = (0..samples.len())
            .filter(|&i| samples[i].modality == modality)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let subset: Vec<&SampleFeatures> = idx.iter().map(|&i| samples[i]).collect();
        let jets: Vec<DMatrix<f64>> = (0..store.n_points)
            .map(|p| store.point_matrix(&subset, half, p))
            .collect();
        let reps = infer_bank_rows(bank, &jets, modality, &config.inference)?;
        for (r, &i) in idx.iter().enumerate() {
            out.set_row(i, &reps.row(r));
        }
    }
    Ok(out)
}

fn check_store(store: &FeatureStore, train: &[&SampleFeatures]) -> Result<(), PipelineError> {
    if train.is_empty() {
        return Err(PipelineError::Config("no training samples".into()));
    }
    if store.n_points == 0 || store.jet_dim == 0 {
        return Err(PipelineError::Config("feature store has no jets".into()));
    }
    Ok(())
}

/// Fit banks and heads on `train` only. The heads keep the full attainable
/// rank with no components removed; see [`MatchModel`] users for
/// `with_removed`.
pub fn fit_model_unremoved(
    config: &PipelineConfig,
    store: &FeatureStore,
    train: &[&SampleFeatures],
) -> Result<MatchModel, PipelineError> {
    check_store(store, train)?;
    let train = sorted_samples(train.iter().copied());
    let banks = if !config.use_rbm {
        Vec::new()
    } else if config.per_half_banks {
        Half::BOTH
            .iter()
            .map(|&h| train_bank(&training_pairs(store, &train, Some(h)), &config.bank))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        vec![train_bank(
            &training_pairs(store, &train, None),
            &config.bank,
        )?]
    };
    if let Some(b) = banks.first() {
        if b.jet_dim != store.jet_dim || b.point_count() != store.n_points {
            return Err(PipelineError::Config(
                "bank shape disagrees with the feature store".into(),
            ));
        }
    }
    let mut model = MatchModel { banks, heads: None };
    if config.use_pca {
        let left = fit_head(
            &represent(config, &model, store, &train, Half::Left)?,
            0,
            config.energy_cutoff,
        )?;
        let right = fit_head(
            &represent(config, &model, store, &train, Half::Right)?,
            0,
            config.energy_cutoff,
        )?;
        model.heads = Some([left, right]);
    }
    Ok(model)
}

/// Fit with the configured number of removed components.
pub fn fit_model(
    config: &PipelineConfig,
    store: &FeatureStore,
    train: &[&SampleFeatures],
) -> Result<MatchModel, PipelineError> {
    let model = fit_model_unremoved(config, store, train)?;
    with_removed(&model, config.effective_removed_k())
}

pub fn with_removed(model: &MatchModel, removed_k: usize) -> Result<MatchModel, PipelineError> {
    let heads = match &model.heads {
        Some([l, r]) => Some([l.with_removed(removed_k)?, r.with_removed(removed_k)?]),
        None => None,
    };
    Ok(MatchModel {
        banks: model.banks.clone(),
        heads,
    })
}

/// Fused `probes × gallery` cosine scores, optionally z-scored per probe.
pub fn score(
    config: &PipelineConfig,
    model: &MatchModel,
    store: &FeatureStore,
    probes: &[&SampleFeatures],
    gallery: &[&SampleFeatures],
) -> Result<DMatrix<f64>, PipelineError> {
    let halves: &[Half] = if config.fusion {
        &Half::BOTH
    } else {
        &[Half::Left]
    };
    let mut total = DMatrix::zeros(probes.len(), gallery.len());
    for &half in halves {
        let mut p = represent(config, model, store, probes, half)?;
        let mut g = represent(config, model, store, gallery, half)?;
        if let Some(heads) = &model.heads {
            p = heads[half.index()].project_rows(&p)?;
            g = heads[half.index()].project_rows(&g)?;
        }
        total += cosine_matrix(&p, &g)?;
    }
    if config.zscore {
        total = zscore_normalize(&total)?;
    }
    Ok(total)
}

/// Gallery (modality A) and probe (modality B) samples of the given subjects.
pub fn gallery_and_probes<'a>(
    store: &'a FeatureStore,
    subjects: &[String],
) -> (Vec<&'a SampleFeatures>, Vec<&'a SampleFeatures>) {
    let chosen = sorted_samples(
        store
            .samples
            .iter()
            .filter(|s| subjects.binary_search(&s.subject_id).is_ok()),
    );
    let gallery = chosen
        .iter()
        .copied()
        .filter(|s| s.modality == Modality::A)
        .collect();
    let probes = chosen
        .iter()
        .copied()
        .filter(|s| s.modality == Modality::B)
        .collect();
    (gallery, probes)
}

/// Regime label used in reports.
pub fn describe(config: &PipelineConfig) -> String {
    match (config.use_rbm, config.use_pca) {
        (true, true) => format!(
            "jets+rbm[{}]+pca(-{})",
            config.bank.regime,
            config.effective_removed_k()
        ),
        (true, false) => format!("jets+rbm[{}]", config.bank.regime),
        (false, true) => format!("jets+pca(-{})", config.effective_removed_k()),
        (false, false) => "jets".to_string(),
    }
}
