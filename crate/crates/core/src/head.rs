//! PCA projection with leading-component removal, cosine scoring, sum-rule
//! fusion of the two halves, and optional per-probe z-score normalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HeadError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("need at least 2 training vectors, got {0}")]
    TooFewSamples(usize),
    #[error("cannot remove {removed_k} components from a rank-{rank} basis")]
    RankDeficient { removed_k: usize, rank: usize },
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("score row {row} has zero standard deviation")]
    ZeroStd { row: usize },
    #[error("z-score needs at least 2 gallery columns, got {0}")]
    SmallGallery(usize),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("invalid energy cutoff {0}")]
    BadCutoff(f64),
}

/// Relative eigenvalue threshold below which a direction counts as null.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub mean: DVector<f64>,
    /// Principal directions as columns, eigenvalue-descending.
    pub basis: DMatrix<f64>,
    /// Population variance along each basis column.
    pub eigenvalues: DVector<f64>,
    /// Leading columns excluded from the projection.
    pub removed_k: usize,
}

impl ProjectionHead {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn kept_dim(&self) -> usize {
        self.rank() - self.removed_k
    }

    pub fn kept_basis(&self) -> DMatrix<f64> {
        self.basis
            .columns(self.removed_k, self.kept_dim())
            .into_owned()
    }

    /// Same basis with a different number of removed components.
    pub fn with_removed(&self, removed_k: usize) -> Result<Self, HeadError> {
        if removed_k >= self.rank() {
            return Err(HeadError::RankDeficient {
                removed_k,
                rank: self.rank(),
            });
        }
        Ok(Self {
            removed_k,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<(), HeadError> {
        let d = self.dim();
        if self.basis.nrows() != d {
            return Err(HeadError::DimensionMismatch {
                what: "basis rows",
                expected: d,
                got: self.basis.nrows(),
            });
        }
        if self.eigenvalues.len() != self.rank() {
            return Err(HeadError::DimensionMismatch {
                what: "eigenvalue count",
                expected: self.rank(),
                got: self.eigenvalues.len(),
            });
        }
        if self.removed_k >= self.rank() {
            return Err(HeadError::RankDeficient {
                removed_k: self.removed_k,
                rank: self.rank(),
            });
        }
        if self
            .mean
            .iter()
            .chain(self.basis.iter())
            .chain(self.eigenvalues.iter())
            .any(|x| !x.is_finite())
        {
            return Err(HeadError::NonFinite("projection head"));
        }
        Ok(())
    }

    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>, HeadError> {
        if v.len() != self.dim() {
            return Err(HeadError::DimensionMismatch {
                what: "projected vector",
                expected: self.dim(),
                got: v.len(),
            });
        }
        let centered = v - &self.mean;
        Ok(self
            .basis
            .columns(self.removed_k, self.kept_dim())
            .tr_mul(&centered))
    }

    /// Project every row of `rows`; returns one projected row per input row.
    pub fn project_rows(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>, HeadError> {
        if rows.ncols() != self.dim() {
            return Err(HeadError::DimensionMismatch {
                what: "projected rows",
                expected: self.dim(),
                got: rows.ncols(),
            });
        }
        let mut centered = rows.clone();
        for mut r in centered.row_iter_mut() {
            r -= self.mean.transpose();
        }
        Ok(centered * self.basis.columns(self.removed_k, self.kept_dim()))
    }

    /// Map reduced coordinates back into the input space.
    pub fn reconstruct(&self, reduced: &DVector<f64>) -> Result<DVector<f64>, HeadError> {
        if reduced.len() != self.kept_dim() {
            return Err(HeadError::DimensionMismatch {
                what: "reduced vector",
                expected: self.kept_dim(),
                got: reduced.len(),
            });
        }
        Ok(self.basis.columns(self.removed_k, self.kept_dim()) * reduced + &self.mean)
    }
}

/// PCA of `train` (one vector per row), dropping the `removed_k` leading
/// components. When there are fewer samples than dimensions the
/// eigenproblem is solved on the Gram matrix instead of the covariance.
///
/// With `energy_cutoff = Some(f)`, trailing components beyond the fraction
/// `f` of cumulative variance are discarded as well.
pub fn fit_head(
    train: &DMatrix<f64>,
    removed_k: usize,
    energy_cutoff: Option<f64>,
) -> Result<ProjectionHead, HeadError> {
    let (n, d) = train.shape();
    if n < 2 {
        return Err(HeadError::TooFewSamples(n));
    }
    if train.iter().any(|x| !x.is_finite()) {
        return Err(HeadError::NonFinite("training vectors"));
    }
    if let Some(f) = energy_cutoff {
        if !(f > 0.0 && f <= 1.0) {
            return Err(HeadError::BadCutoff(f));
        }
    }
    let mean = train.row_mean().transpose();
    let mut centered = train.clone();
    for mut r in centered.row_iter_mut() {
        r -= mean.transpose();
    }

    if n < d {
        let eig = SymmetricEigen::new(&centered * centered.transpose());
        finish(
            mean,
            &eig.eigenvalues,
            &eig.eigenvectors,
            n,
            removed_k,
            energy_cutoff,
            Some(&centered),
        )
    } else {
        let eig = SymmetricEigen::new(centered.tr_mul(&centered));
        finish(
            mean,
            &eig.eigenvalues,
            &eig.eigenvectors,
            n,
            removed_k,
            energy_cutoff,
            None,
        )
    }
}

fn finish(
    mean: DVector<f64>,
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    n: usize,
    removed_k: usize,
    energy_cutoff: Option<f64>,
    gram_data: Option<&DMatrix<f64>>,
) -> Result<ProjectionHead, HeadError> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let lmax = values[order[0]].max(0.0);
    let mut kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| lmax > 0.0 && values[i] > RANK_TOLERANCE * lmax)
        .collect();
    if let Some(f) = energy_cutoff {
        let total: f64 = kept.iter().map(|&i| values[i]).sum();
        let mut acc = 0.0;
        let mut keep = 0;
        for &i in &kept {
            keep += 1;
            acc += values[i];
            if acc >= f * total {
                break;
            }
        }
        kept.truncate(keep);
    }
    let rank = kept.len();
    if removed_k >= rank {
        return Err(HeadError::RankDeficient { removed_k, rank });
    }
    let d = mean.len();
    let mut basis = DMatrix::zeros(d, rank);
    for (c, &i) in kept.iter().enumerate() {
        let col = match gram_data {
            // Xᵀu / sqrt(λ) is a unit eigenvector of XᵀX for eigenpair (λ, u) of XXᵀ
            Some(x) => x.tr_mul(&vectors.column(i)) / values[i].sqrt(),
            None => vectors.column(i).into_owned(),
        };
        basis.set_column(c, &col);
    }
    let eigenvalues = DVector::from_iterator(rank, kept.iter().map(|&i| values[i] / n as f64));
    Ok(ProjectionHead {
        mean,
        basis,
        eigenvalues,
        removed_k,
    })
}

pub fn cosine(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64, HeadError> {
    if x.len() != y.len() {
        return Err(HeadError::DimensionMismatch {
            what: "cosine operands",
            expected: x.len(),
            got: y.len(),
        });
    }
    let nx = x.norm();
    let ny = y.norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(HeadError::ZeroVector);
    }
    Ok((x.dot(y) / (nx * ny)).clamp(-1.0, 1.0))
}

/// Cosine similarity between every row of `probes` and every row of `gallery`.
pub fn cosine_matrix(
    probes: &DMatrix<f64>,
    gallery: &DMatrix<f64>,
) -> Result<DMatrix<f64>, HeadError> {
    if probes.ncols() != gallery.ncols() {
        return Err(HeadError::DimensionMismatch {
            what: "cosine operands",
            expected: probes.ncols(),
            got: gallery.ncols(),
        });
    }
    let unit = |m: &DMatrix<f64>| -> Result<DMatrix<f64>, HeadError> {
        let mut out = m.clone();
        for mut r in out.row_iter_mut() {
            let norm = r.norm();
            if norm == 0.0 {
                return Err(HeadError::ZeroVector);
            }
            r /= norm;
        }
        Ok(out)
    };
    let mut s = unit(probes)? * unit(gallery)?.transpose();
    s.apply(|x| *x = x.clamp(-1.0, 1.0));
    Ok(s)
}

/// Sum-rule fusion of the two half-face scores.
pub fn fuse_halves(left: f64, right: f64) -> f64 {
    left + right
}

/// Per-probe standardization of a probes × gallery score matrix using the
/// population standard deviation of each row.
pub fn zscore_normalize(scores: &DMatrix<f64>) -> Result<DMatrix<f64>, HeadError> {
    let g = scores.ncols();
    if g < 2 {
        return Err(HeadError::SmallGallery(g));
    }
    let mut out = scores.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let mean = row.mean();
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / g as f64;
        let std = var.sqrt();
        if std == 0.0 || !std.is_finite() {
            return Err(HeadError::ZeroStd { row: i });
        }
        row.apply(|x| *x = (*x - mean) / std);
    }
    Ok(out)
}
