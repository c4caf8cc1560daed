use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::RbmError;
use crate::math::all_finite_mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhiteningKind {
    /// Symmetric whitening `U Λ^-1/2 U'`; keeps the input axes.
    Zca,
    /// Rotated whitening `Λ^-1/2 U'`, components ordered by decreasing variance.
    Wpca,
}

/// Affine whitening `v̂ = T (v - mean)` fitted so the fitting data has unit
/// variance in every output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNormalizer {
    pub mean: DVector<f64>,
    pub transform: DMatrix<f64>,
    pub kind: WhiteningKind,
}

/// Eigenvalues below `DEFAULT_FLOOR * λ_max` are clamped before inversion.
pub const DEFAULT_FLOOR: f64 = 1e-6;

impl GaussianNormalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            transform: DMatrix::identity(dim, dim),
            kind: WhiteningKind::Zca,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fit on `data` (one sample per row) using the population covariance.
    pub fn fit(data: &DMatrix<f64>, kind: WhiteningKind, floor: f64) -> Result<Self, RbmError> {
        let (n, d) = data.shape();
        if n < 2 {
            return Err(RbmError::InvalidConfig(format!(
                "whitening needs at least 2 samples, got {n}"
            )));
        }
        if !all_finite_mat(data) {
            return Err(RbmError::NonFinite("whitening data"));
        }
        let mean = data.row_mean().transpose();
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.tr_mul(&centered) / n as f64;
        let eig = SymmetricEigen::new(cov);
        let lmax = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        if lmax <= 0.0 {
            return Err(RbmError::Degenerate(
                "whitening data has zero variance".into(),
            ));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let scale: Vec<f64> = order
            .iter()
            .map(|&i| 1.0 / eig.eigenvalues[i].max(floor * lmax).sqrt())
            .collect();
        // rows of `rotated` are scaled eigenvectors, largest variance first
        let rotated = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(c, order[r])] * scale[r]);
        let transform = match kind {
            WhiteningKind::Wpca => rotated,
            WhiteningKind::Zca => {
                let u = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
                u * rotated
            }
        };
        Ok(Self {
            mean,
            transform,
            kind,
        })
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>, RbmError> {
        if v.len() != self.dim() {
            return Err(RbmError::dims("normalizer input", self.dim(), v.len()));
        }
        Ok(&self.transform * (v - &self.mean))
    }

    /// Whiten every row of `data`.
    pub fn apply_rows(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>, RbmError> {
        if data.ncols() != self.dim() {
            return Err(RbmError::dims("normalizer input", self.dim(), data.ncols()));
        }
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.transform.transpose())
    }

    /// Map a whitened vector back to the input space.
    pub fn invert(&self, v_hat: &DVector<f64>) -> Result<DVector<f64>, RbmError> {
        let lu = self.transform.clone().lu();
        let x = lu
            .solve(v_hat)
            .ok_or_else(|| RbmError::Degenerate("whitening transform is singular".into()))?;
        Ok(x + &self.mean)
    }
}
