use nalgebra::DMatrix;

use super::EvalError;

fn check_shape<T>(scores: &DMatrix<f64>, probes: &[T], gallery: &[T]) -> Result<(), EvalError> {
    if scores.nrows() != probes.len() {
        return Err(EvalError::Shape {
            what: "probe labels",
            expected: scores.nrows(),
            got: probes.len(),
        });
    }
    if scores.ncols() != gallery.len() {
        return Err(EvalError::Shape {
            what: "gallery labels",
            expected: scores.ncols(),
            got: gallery.len(),
        });
    }
    if scores.iter().any(|x| x.is_nan()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

/// Position of gallery entry `j` in the probe's ranking (1-based). Higher
/// scores rank first; equal scores rank the lower gallery index first.
fn position(row: &[f64], j: usize) -> usize {
    let s = row[j];
    1 + row
        .iter()
        .enumerate()
        .filter(|&(k, &x)| x > s || (x == s && k < j))
        .count()
}

/// Rank of the best-placed genuine gallery entry for every probe.
pub fn genuine_ranks<T: PartialEq + std::fmt::Debug>(
    scores: &DMatrix<f64>,
    probe_labels: &[T],
    gallery_labels: &[T],
) -> Result<Vec<usize>, EvalError> {
    check_shape(scores, probe_labels, gallery_labels)?;
    let mut ranks = Vec::with_capacity(probe_labels.len());
    for (i, label) in probe_labels.iter().enumerate() {
        let row: Vec<f64> = scores.row(i).iter().copied().collect();
        let best = gallery_labels
            .iter()
            .enumerate()
            .filter(|(_, g)| *g == label)
            .map(|(j, _)| position(&row, j))
            .min()
            .ok_or_else(|| EvalError::MissingSubject(format!("{label:?}")))?;
        ranks.push(best);
    }
    Ok(ranks)
}

/// Fraction of probes whose top-scoring gallery entry (lowest index among
/// ties) has the probe's label.
pub fn rank1<T: PartialEq + std::fmt::Debug>(
    scores: &DMatrix<f64>,
    probe_labels: &[T],
    gallery_labels: &[T],
) -> Result<f64, EvalError> {
    let ranks = genuine_ranks(scores, probe_labels, gallery_labels)?;
    if ranks.is_empty() {
        return Err(EvalError::Empty("probes"));
    }
    Ok(ranks.iter().filter(|&&r| r == 1).count() as f64 / ranks.len() as f64)
}

/// Cumulative match characteristic: `(rank, hit rate)` for ranks 1 to the
/// gallery size.
pub fn cmc<T: PartialEq + std::fmt::Debug>(
    scores: &DMatrix<f64>,
    probe_labels: &[T],
    gallery_labels: &[T],
) -> Result<Vec<(usize, f64)>, EvalError> {
    let ranks = genuine_ranks(scores, probe_labels, gallery_labels)?;
    if ranks.is_empty() {
        return Err(EvalError::Empty("probes"));
    }
    let g = gallery_labels.len();
    let mut counts = vec![0usize; g + 1];
    for r in ranks.iter() {
        counts[*r] += 1;
    }
    let mut out = Vec::with_capacity(g);
    let mut acc = 0;
    for (r, c) in counts.iter().enumerate().skip(1) {
        acc += c;
        out.push((r, acc as f64 / ranks.len() as f64));
    }
    Ok(out)
}

/// Split a score matrix into genuine (same label) and impostor scores,
/// exhaustively, in row-major order.
pub fn split_scores<T: PartialEq>(
    scores: &DMatrix<f64>,
    probe_labels: &[T],
    gallery_labels: &[T],
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    check_shape(scores, probe_labels, gallery_labels)?;
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (i, p) in probe_labels.iter().enumerate() {
        for (j, g) in gallery_labels.iter().enumerate() {
            if p == g {
                genuine.push(scores[(i, j)]);
            } else {
                impostor.push(scores[(i, j)]);
            }
        }
    }
    Ok((genuine, impostor))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Accept when `score >= threshold`.
    pub threshold: f64,
    pub far: f64,
    pub vr: f64,
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn count_at_least(desc: &[f64], t: f64) -> usize {
    desc.partition_point(|&x| x >= t)
}

fn check_lists(genuine: &[f64], impostor: &[f64]) -> Result<(), EvalError> {
    if genuine.is_empty() {
        return Err(EvalError::Empty("genuine scores"));
    }
    if impostor.is_empty() {
        return Err(EvalError::Empty("impostor scores"));
    }
    if genuine.iter().chain(impostor).any(|x| x.is_nan()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

/// Verification rate at the smallest threshold (over all observed scores
/// and `+∞`) whose false accept rate does not exceed `far_target`.
pub fn vr_at_far(
    genuine: &[f64],
    impostor: &[f64],
    far_target: f64,
) -> Result<OperatingPoint, EvalError> {
    check_lists(genuine, impostor)?;
    if !(0.0..=1.0).contains(&far_target) {
        return Err(EvalError::BadFar(far_target));
    }
    let g = sorted_desc(genuine);
    let imp = sorted_desc(impostor);
    let n_imp = imp.len() as f64;
    let mut candidates: Vec<f64> = g.iter().chain(imp.iter()).copied().collect();
    candidates.sort_by(|a, b| a.total_cmp(b));
    candidates.dedup();
    let mut best = OperatingPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        vr: 0.0,
    };
    // FAR is non-increasing in the threshold, so the first admissible
    // candidate in ascending order is the smallest one
    for &t in &candidates {
        let far = count_at_least(&imp, t) as f64 / n_imp;
        if far <= far_target {
            best = OperatingPoint {
                threshold: t,
                far,
                vr: count_at_least(&g, t) as f64 / g.len() as f64,
            };
            break;
        }
    }
    Ok(best)
}

/// ROC as operating points for every distinct observed score plus `+∞`,
/// ordered by increasing FAR.
pub fn roc(genuine: &[f64], impostor: &[f64]) -> Result<Vec<OperatingPoint>, EvalError> {
    check_lists(genuine, impostor)?;
    let g = sorted_desc(genuine);
    let imp = sorted_desc(impostor);
    let mut candidates: Vec<f64> = g.iter().chain(imp.iter()).copied().collect();
    candidates.push(f64::INFINITY);
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    Ok(candidates
        .into_iter()
        .map(|t| OperatingPoint {
            threshold: t,
            far: count_at_least(&imp, t) as f64 / imp.len() as f64,
            vr: count_at_least(&g, t) as f64 / g.len() as f64,
        })
        .collect())
}

/// Decidability index `|μ_g - μ_i| / sqrt((σ_g² + σ_i²) / 2)` with
/// population variances; infinite when both distributions are degenerate
/// and distinct.
pub fn separation(genuine: &[f64], impostor: &[f64]) -> Result<f64, EvalError> {
    check_lists(genuine, impostor)?;
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
        (m, var)
    };
    let (mg, vg) = stats(genuine);
    let (mi, vi) = stats(impostor);
    let spread = ((vg + vi) / 2.0).sqrt();
    let gap = mg - mi;
    if spread == 0.0 {
        return Ok(if gap == 0.0 {
            0.0
        } else {
            gap.signum() * f64::INFINITY
        });
    }
    Ok(gap / spread)
}

/// Area under the ROC: P(genuine > impostor) with ties counted as one half.
pub fn auc(genuine: &[f64], impostor: &[f64]) -> Result<f64, EvalError> {
    check_lists(genuine, impostor)?;
    let mut imp = impostor.to_vec();
    imp.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &g in genuine {
        let below = imp.partition_point(|&x| x < g);
        let not_above = imp.partition_point(|&x| x <= g);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(wins / (genuine.len() as f64 * imp.len() as f64))
}
