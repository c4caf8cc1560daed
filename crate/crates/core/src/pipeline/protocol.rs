use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{
    fit_model_unremoved, gallery_and_probes, represent, MatchModel, PipelineConfig, PipelineError,
};
use crate::data::{FeatureStore, SampleFeatures};
use crate::eval::{
    auc, cmc, rank1, roc, separation, split_scores, vr_at_far, EvalError, EvalReport, SplitMetrics,
    SplitPlan,
};
use crate::head::{cosine_matrix, zscore_normalize};
use crate::types::Half;

/// Identification and verification metrics of one score matrix.
pub fn split_metrics(
    scores: &DMatrix<f64>,
    probe_labels: &[&str],
    gallery_labels: &[&str],
    far: f64,
) -> Result<SplitMetrics, EvalError> {
    let (genuine, impostor) = split_scores(scores, probe_labels, gallery_labels)?;
    Ok(SplitMetrics {
        rank1: rank1(scores, probe_labels, gallery_labels)?,
        vr_at_far: vr_at_far(&genuine, &impostor, far)?.vr,
        separation: separation(&genuine, &impostor)?,
        auc: auc(&genuine, &impostor)?,
        roc: roc(&genuine, &impostor)?,
        cmc: cmc(scores, probe_labels, gallery_labels)?,
        train_rank1: None,
        train_separation: None,
        train_auc: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub removed_k: usize,
    pub report: EvalReport,
}

/// Pre-head features of a gallery/probe set, per half.
struct Reps<'a> {
    gallery: Vec<&'a SampleFeatures>,
    probes: Vec<&'a SampleFeatures>,
    g: Vec<DMatrix<f64>>,
    p: Vec<DMatrix<f64>>,
}

impl<'a> Reps<'a> {
    fn new(
        config: &PipelineConfig,
        model: &MatchModel,
        store: &'a FeatureStore,
        subjects: &[String],
    ) -> Result<Self, PipelineError> {
        let (gallery, probes) = gallery_and_probes(store, subjects);
        if gallery.is_empty() || probes.is_empty() {
            return Err(EvalError::Empty("gallery or probe samples in a split").into());
        }
        let halves: &[Half] = if config.fusion {
            &Half::BOTH
        } else {
            &[Half::Left]
        };
        let mut g = Vec::new();
        let mut p = Vec::new();
        for &h in halves {
            g.push(represent(config, model, store, &gallery, h)?);
            p.push(represent(config, model, store, &probes, h)?);
        }
        Ok(Self {
            gallery,
            probes,
            g,
            p,
        })
    }

    fn metrics(
        &self,
        config: &PipelineConfig,
        model: &MatchModel,
        removed_k: usize,
    ) -> Result<SplitMetrics, PipelineError> {
        let mut total = DMatrix::zeros(self.probes.len(), self.gallery.len());
        for (i, (p, g)) in self.p.iter().zip(&self.g).enumerate() {
            let s = match &model.heads {
                Some(heads) => {
                    let head = heads[i].with_removed(removed_k)?;
                    cosine_matrix(&head.project_rows(p)?, &head.project_rows(g)?)?
                }
                None => cosine_matrix(p, g)?,
            };
            total += s;
        }
        if config.zscore {
            total = zscore_normalize(&total)?;
        }
        let pl: Vec<&str> = self.probes.iter().map(|s| s.subject_id.as_str()).collect();
        let gl: Vec<&str> = self.gallery.iter().map(|s| s.subject_id.as_str()).collect();
        Ok(split_metrics(&total, &pl, &gl, config.far)?)
    }
}

/// Evaluate every split for each removed-component count in `ks`. The
/// bank and the PCA basis are fitted once per split; only the number of
/// dropped leading components varies between rows.
pub fn run_sweep(
    config: &PipelineConfig,
    store: &FeatureStore,
    plan: &SplitPlan,
    ks: &[usize],
) -> Result<Vec<SweepRow>, PipelineError> {
    config.validate()?;
    if ks.is_empty() {
        return Err(PipelineError::Config("empty removed-k sweep".into()));
    }
    if ks.iter().any(|&k| k > 0) && !config.use_pca {
        return Err(PipelineError::Config(
            "removing components needs use_pca".into(),
        ));
    }
    store.validate()?;
    let splits = plan.splits(&store.subjects())?;
    let per_split: Vec<Vec<SplitMetrics>> = splits
        .par_iter()
        .map(|split| {
            let train: Vec<&SampleFeatures> = store
                .samples
                .iter()
                .filter(|s| split.train.binary_search(&s.subject_id).is_ok())
                .collect();
            let model = fit_model_unremoved(config, store, &train)?;
            let test = Reps::new(config, &model, store, &split.test)?;
            let train_reps = if config.train_metrics {
                Some(Reps::new(config, &model, store, &split.train)?)
            } else {
                None
            };
            ks.iter()
                .map(|&k| {
                    let mut m = test.metrics(config, &model, k)?;
                    if let Some(t) = &train_reps {
                        let tm = t.metrics(config, &model, k)?;
                        m.train_rank1 = Some(tm.rank1);
                        m.train_separation = Some(tm.separation);
                        m.train_auc = Some(tm.auc);
                    }
                    Ok(m)
                })
                .collect::<Result<Vec<_>, PipelineError>>()
        })
        .collect::<Result<_, _>>()?;
    ks.iter()
        .enumerate()
        .map(|(i, &k)| {
            let rows: Vec<SplitMetrics> = per_split.iter().map(|s| s[i].clone()).collect();
            Ok(SweepRow {
                removed_k: k,
                report: EvalReport::aggregate(rows, plan.dev_split, config.far)?,
            })
        })
        .collect()
}

/// Repeated-split evaluation at the configured number of removed components.
pub fn run_protocol(
    config: &PipelineConfig,
    store: &FeatureStore,
    plan: &SplitPlan,
) -> Result<EvalReport, PipelineError> {
    let k = if config.use_pca {
        config.effective_removed_k()
    } else {
        0
    };
    let mut rows = run_sweep(config, store, plan, &[k])?;
    Ok(rows.remove(0).report)
}

/// Pick the removed-component count with the best rank-1 on the plan's dev
/// split (smallest `k` on ties). Returns the choice and the full sweep.
pub fn tune_removed_k(
    config: &PipelineConfig,
    store: &FeatureStore,
    plan: &SplitPlan,
    ks: &[usize],
) -> Result<(usize, Vec<SweepRow>), PipelineError> {
    let dev = plan
        .dev_split
        .ok_or_else(|| PipelineError::Config("tuning needs a dev split".into()))?;
    let rows = run_sweep(config, store, plan, ks)?;
    let mut best = (ks[0], f64::NEG_INFINITY);
    for row in &rows {
        let r1 = row.report.per_split[dev].rank1;
        if r1 > best.1 {
            best = (row.removed_k, r1);
        }
    }
    Ok((best.0, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    #[test]
    fn separable_data_is_perfect() {
        let mut cfg = PipelineConfig {
            use_rbm: false,
            removed_k: Some(0),
            ..PipelineConfig::default()
        };
        cfg.train_metrics = false;
        let spec = SyntheticSpec {
            n_subjects: 30,
            n_points: 2,
            noise_sigma: 0.0,
            nonlinearity_strength: 0.0,
            nuisance_strength: 0.0,
            modality_specificity: 0.0,
            modality_offset: 0.0,
            ..SyntheticSpec::default()
        };
        let store = generate_synthetic(&spec).unwrap().store;
        let plan = SplitPlan {
            n_repeats: 1,
            ..SplitPlan::default()
        };
        let r = run_protocol(&cfg, &store, &plan).unwrap();
        assert_eq!(r.rank1_mean, 1.0);
        assert_eq!(r.rank1_std, 0.0);
    }

    #[test]
    fn sweep_row_matches_single_run() {
        let cfg = PipelineConfig {
            use_rbm: false,
            ..PipelineConfig::default()
        };
        let spec = SyntheticSpec {
            n_subjects: 12,
            n_points: 2,
            jet_dim: 6,
            ..SyntheticSpec::default()
        };
        let store = generate_synthetic(&spec).unwrap().store;
        let plan = SplitPlan {
            n_repeats: 2,
            ..SplitPlan::default()
        };
        let rows = run_sweep(&cfg, &store, &plan, &[0, 1, 2, 3]).unwrap();
        assert_eq!(rows.len(), 4);
        let single = run_protocol(
            &PipelineConfig {
                removed_k: Some(2),
                ..cfg
            },
            &store,
            &plan,
        )
        .unwrap();
        assert_eq!(rows[2].report, single);
    }

    #[test]
    fn tuning_uses_only_the_dev_split() {
        let cfg = PipelineConfig {
            use_rbm: false,
            train_metrics: false,
            ..PipelineConfig::default()
        };
        let spec = SyntheticSpec {
            n_subjects: 12,
            n_points: 2,
            jet_dim: 6,
            ..SyntheticSpec::default()
        };
        let store = generate_synthetic(&spec).unwrap().store;
        let plan = SplitPlan {
            n_repeats: 3,
            dev_split: Some(1),
            ..SplitPlan::default()
        };
        let ks = [0, 1, 2, 3];
        let (k, rows) = tune_removed_k(&cfg, &store, &plan, &ks).unwrap();
        let best = rows
            .iter()
            .map(|r| r.report.per_split[1].rank1)
            .fold(f64::NEG_INFINITY, f64::max);
        let first = rows
            .iter()
            .find(|r| r.report.per_split[1].rank1 == best)
            .unwrap();
        assert_eq!(k, first.removed_k);
        assert!(tune_removed_k(
            &cfg,
            &store,
            &SplitPlan {
                dev_split: None,
                ..plan
            },
            &ks
        )
        .is_err());
    }
}
