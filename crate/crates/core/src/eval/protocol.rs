use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::OperatingPoint;
use super::EvalError;
use crate::math::{mean, sample_std};

/// How subjects are divided into training and test sets across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPlan {
    pub n_repeats: usize,
    /// Fraction of subjects used for training in each repeat.
    pub train_fraction: f64,
    pub seed: u64,
    /// Split reserved for tuning; excluded from the reported mean and std.
    pub dev_split: Option<usize>,
    /// Explicit training subjects per split; overrides the random draw.
    pub train_subjects: Option<Vec<Vec<String>>>,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            n_repeats: 10,
            train_fraction: 0.5,
            seed: 0,
            dev_split: None,
            train_subjects: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub index: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitPlan {
    /// Subject-level splits. Subjects are sorted before shuffling, so input
    /// order never matters.
    pub fn splits(&self, subjects: &[String]) -> Result<Vec<Split>, EvalError> {
        let mut all: Vec<String> = subjects.to_vec();
        all.sort();
        all.dedup();
        if let Some(lists) = &self.train_subjects {
            return lists
                .iter()
                .enumerate()
                .map(|(index, train)| {
                    let mut train = train.clone();
                    train.sort();
                    train.dedup();
                    if let Some(s) = train.iter().find(|s| all.binary_search(s).is_err()) {
                        return Err(EvalError::Plan(format!(
                            "split {index}: unknown training subject `{s}`"
                        )));
                    }
                    let test: Vec<String> = all
                        .iter()
                        .filter(|s| train.binary_search(s).is_err())
                        .cloned()
                        .collect();
                    if test.is_empty() {
                        return Err(EvalError::Plan(format!(
                            "split {index} has no test subjects"
                        )));
                    }
                    Ok(Split { index, train, test })
                })
                .collect();
        }
        if self.n_repeats == 0 {
            return Err(EvalError::Plan("n_repeats must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::Plan(format!(
                "train_fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        let n_train = (self.train_fraction * all.len() as f64).round() as usize;
        if n_train < 1 || n_train >= all.len() {
            return Err(EvalError::Plan(format!(
                "{} subjects cannot be split with train fraction {}",
                all.len(),
                self.train_fraction
            )));
        }
        if let Some(d) = self.dev_split {
            if d >= self.n_repeats {
                return Err(EvalError::Plan(format!("dev split {d} out of range")));
            }
            if self.n_repeats == 1 {
                return Err(EvalError::Plan(
                    "a dev split needs at least one other split to report".into(),
                ));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.n_repeats)
            .map(|index| {
                let mut order = all.clone();
                order.shuffle(&mut rng);
                let mut train = order[..n_train].to_vec();
                let mut test = order[n_train..].to_vec();
                train.sort();
                test.sort();
                Split { index, train, test }
            })
            .collect())
    }
}

/// Metrics of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMetrics {
    pub rank1: f64,
    pub vr_at_far: f64,
    pub separation: f64,
    /// Area under the ROC.
    pub auc: f64,
    pub roc: Vec<OperatingPoint>,
    pub cmc: Vec<(usize, f64)>,
    /// Rank-1 and separation of the model scored on its own training subjects.
    pub train_rank1: Option<f64>,
    pub train_separation: Option<f64>,
    pub train_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub far_target: f64,
    pub rank1_mean: f64,
    pub rank1_std: f64,
    pub vr_at_far_mean: f64,
    pub vr_at_far_std: f64,
    pub separation_mean: f64,
    pub auc_mean: f64,
    pub train_rank1_mean: Option<f64>,
    pub train_separation_mean: Option<f64>,
    pub train_auc_mean: Option<f64>,
    /// Per-split metrics in split order, including the dev split.
    pub per_split: Vec<SplitMetrics>,
    /// Indices of the splits that enter the means.
    pub reported: Vec<usize>,
    /// ROC of the first reported split.
    pub roc: Vec<OperatingPoint>,
    /// CMC averaged over the reported splits, truncated to the shortest gallery.
    pub cmc: Vec<(usize, f64)>,
}

impl EvalReport {
    /// Aggregate per-split metrics; splits equal to `dev_split` are skipped.
    pub fn aggregate(
        per_split: Vec<SplitMetrics>,
        dev_split: Option<usize>,
        far_target: f64,
    ) -> Result<Self, EvalError> {
        let reported: Vec<usize> = (0..per_split.len())
            .filter(|&i| Some(i) != dev_split)
            .collect();
        if reported.is_empty() {
            return Err(EvalError::Empty("reported splits"));
        }
        let pick = |f: &dyn Fn(&SplitMetrics) -> f64| -> Vec<f64> {
            reported.iter().map(|&i| f(&per_split[i])).collect()
        };
        let r1 = pick(&|m| m.rank1);
        let vr = pick(&|m| m.vr_at_far);
        let sep = pick(&|m| m.separation);
        let aucs = pick(&|m| m.auc);
        let opt_mean = |f: &dyn Fn(&SplitMetrics) -> Option<f64>| -> Option<f64> {
            let v: Option<Vec<f64>> = reported.iter().map(|&i| f(&per_split[i])).collect();
            v.map(|v| mean(&v))
        };
        let train_rank1_mean = opt_mean(&|m| m.train_rank1);
        let train_separation_mean = opt_mean(&|m| m.train_separation);
        let train_auc_mean = opt_mean(&|m| m.train_auc);
        let shortest = reported
            .iter()
            .map(|&i| per_split[i].cmc.len())
            .min()
            .unwrap_or(0);
        let cmc = (0..shortest)
            .map(|r| {
                let v: Vec<f64> = reported.iter().map(|&i| per_split[i].cmc[r].1).collect();
                (r + 1, mean(&v))
            })
            .collect();
        Ok(Self {
            far_target,
            rank1_mean: mean(&r1),
            rank1_std: sample_std(&r1),
            vr_at_far_mean: mean(&vr),
            vr_at_far_std: sample_std(&vr),
            separation_mean: mean(&sep),
            auc_mean: mean(&aucs),
            train_rank1_mean,
            train_separation_mean,
            train_auc_mean,
            roc: per_split[reported[0]].roc.clone(),
            cmc,
            reported,
            per_split,
        })
    }
}
