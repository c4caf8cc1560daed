//! Landmark-driven RBF warping with an affine term.
//!
//! `W(p) = Σ_i w_i φ(|p - s_i|) + A [p; 1]` with the Gaussian kernel
//! `φ(r) = exp(-r²/(2 w²))`. The weights satisfy `W(s_i) = d_i` at every
//! control pair and the side condition `Σ w_i [s_i; 1] = 0`.

use nalgebra::{DMatrix, LU};

use crate::data::LandmarkSet;

/// Kernel width as a fraction of the eye distance.
pub const DEFORMATION_FACTOR: f64 = 0.1;

/// Largest control-point residual accepted after solving.
pub const MAX_RESIDUAL: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WarpError {
    #[error("control point sets differ in size ({0} vs {1})")]
    CountMismatch(usize, usize),
    #[error("need at least 3 control points, got {0}")]
    TooFew(usize),
    #[error("control points {0} and {1} coincide")]
    Duplicate(usize, usize),
    #[error("eye distance must be positive and finite, got {0}")]
    BadEyeDistance(f64),
    #[error("RBF system is singular or ill-conditioned (residual {0:e})")]
    Singular(f64),
    #[error("non-finite control point")]
    NonFinite,
    #[error("invalid landmarks: {0}")]
    Landmarks(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpModel {
    pub control_src: Vec<[f64; 2]>,
    pub control_dst: Vec<[f64; 2]>,
    pub kernel_width: f64,
    /// One row `(w_x, w_y)` per control point.
    pub rbf_weights: DMatrix<f64>,
    /// `2 × 3` affine part acting on `[x, y, 1]`.
    pub affine: DMatrix<f64>,
}

fn phi(r2: f64, width: f64) -> f64 {
    (-r2 / (2.0 * width * width)).exp()
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Fit from raw control point lists with an explicit kernel width.
pub fn fit_warp_points(
    src: &[[f64; 2]],
    dst: &[[f64; 2]],
    kernel_width: f64,
) -> Result<WarpModel, WarpError> {
    if src.len() != dst.len() {
        return Err(WarpError::CountMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 3 {
        return Err(WarpError::TooFew(n));
    }
    if src.iter().chain(dst).flatten().any(|v| !v.is_finite()) {
        return Err(WarpError::NonFinite);
    }
    if !(kernel_width.is_finite() && kernel_width > 0.0) {
        return Err(WarpError::BadEyeDistance(kernel_width / DEFORMATION_FACTOR));
    }
    let scale = src.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if dist2(src[i], src[j]).sqrt() <= 1e-9 * scale {
                return Err(WarpError::Duplicate(j, i));
            }
        }
    }

    let size = n + 3;
    let mut system = DMatrix::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            system[(i, j)] = phi(dist2(src[i], src[j]), kernel_width);
        }
        let row = [src[i][0], src[i][1], 1.0];
        for (k, v) in row.iter().enumerate() {
            system[(i, n + k)] = *v;
            system[(n + k, i)] = *v;
        }
    }
    let mut rhs = DMatrix::zeros(size, 2);
    for i in 0..n {
        rhs[(i, 0)] = dst[i][0];
        rhs[(i, 1)] = dst[i][1];
    }
    let sol = LU::new(system)
        .solve(&rhs)
        .ok_or(WarpError::Singular(f64::INFINITY))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(WarpError::Singular(f64::INFINITY));
    }
    let rbf_weights = sol.rows(0, n).into_owned();
    let affine = sol.rows(n, 3).transpose();
    let model = WarpModel {
        control_src: src.to_vec(),
        control_dst: dst.to_vec(),
        kernel_width,
        rbf_weights,
        affine,
    };
    let residual = model.max_residual();
    if !(residual < MAX_RESIDUAL) {
        return Err(WarpError::Singular(residual));
    }
    Ok(model)
}

/// Warp taking the template landmarks `l_s` onto the image landmarks `l`,
/// with kernel width `0.1 × eye_distance`.
pub fn fit_warp(
    l_s: &LandmarkSet,
    l: &LandmarkSet,
    eye_distance: f64,
) -> Result<WarpModel, WarpError> {
    if !(eye_distance.is_finite() && eye_distance > 0.0) {
        return Err(WarpError::BadEyeDistance(eye_distance));
    }
    fit_warp_points(&l_s.points, &l.points, DEFORMATION_FACTOR * eye_distance)
}

impl WarpModel {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let a = &self.affine;
        let mut out = [
            a[(0, 0)] * p[0] + a[(0, 1)] * p[1] + a[(0, 2)],
            a[(1, 0)] * p[0] + a[(1, 1)] * p[1] + a[(1, 2)],
        ];
        for (i, s) in self.control_src.iter().enumerate() {
            let k = phi(dist2(p, *s), self.kernel_width);
            out[0] += self.rbf_weights[(i, 0)] * k;
            out[1] += self.rbf_weights[(i, 1)] * k;
        }
        out
    }

    pub fn warp_points(&self, points: &[[f64; 2]]) -> Vec<[f64; 2]> {
        points.iter().map(|&p| self.apply(p)).collect()
    }

    /// Largest distance between `W(src_i)` and `dst_i`.
    pub fn max_residual(&self) -> f64 {
        self.control_src
            .iter()
            .zip(&self.control_dst)
            .map(|(s, d)| dist2(self.apply(*s), *d).sqrt())
            .fold(0.0, f64::max)
    }
}
