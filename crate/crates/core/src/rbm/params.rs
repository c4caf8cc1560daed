use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RbmError;
use crate::math::{all_finite_mat, all_finite_vec, logistic, softplus};

/// Visible unit type of a single-modality RBM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibleKind {
    Binary,
    /// Real-valued visibles with unit variance; inputs are expected to be whitened.
    GaussianUnitVariance,
}

/// Parameters of a bipartite RBM: visible biases, hidden biases and the
/// `visible x hidden` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    pub visible_bias: DVector<f64>,
    pub hidden_bias: DVector<f64>,
    pub weights: DMatrix<f64>,
    pub kind: VisibleKind,
}

/// Energy in natural units; lower is more probable.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EnergyValue(pub f64);

impl RbmParams {
    pub fn zeros(kind: VisibleKind, n_visible: usize, n_hidden: usize) -> Self {
        Self {
            visible_bias: DVector::zeros(n_visible),
            hidden_bias: DVector::zeros(n_hidden),
            weights: DMatrix::zeros(n_visible, n_hidden),
            kind,
        }
    }

    /// Weights drawn from `Normal(0, std^2)`, biases zero.
    pub fn random<R: Rng + ?Sized>(
        kind: VisibleKind,
        n_visible: usize,
        n_hidden: usize,
        std: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(kind, n_visible, n_hidden);
        if std > 0.0 {
            let normal = Normal::new(0.0, std).expect("positive std");
            p.weights = DMatrix::from_fn(n_visible, n_hidden, |_, _| normal.sample(rng));
        }
        p
    }

    pub fn n_visible(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn validate(&self) -> Result<(), RbmError> {
        let (m, n) = self.weights.shape();
        if m != self.n_visible() {
            return Err(RbmError::dims("weight rows", self.n_visible(), m));
        }
        if n != self.n_hidden() {
            return Err(RbmError::dims("weight columns", self.n_hidden(), n));
        }
        if !(all_finite_vec(&self.visible_bias)
            && all_finite_vec(&self.hidden_bias)
            && all_finite_mat(&self.weights))
        {
            return Err(RbmError::NonFinite("parameters"));
        }
        Ok(())
    }

    pub(crate) fn check_visible(&self, v: &DVector<f64>) -> Result<(), RbmError> {
        if v.len() != self.n_visible() {
            return Err(RbmError::dims("visible vector", self.n_visible(), v.len()));
        }
        if !all_finite_vec(v) {
            return Err(RbmError::NonFinite("visible vector"));
        }
        Ok(())
    }

    pub(crate) fn check_hidden(&self, h: &DVector<f64>) -> Result<(), RbmError> {
        if h.len() != self.n_hidden() {
            return Err(RbmError::dims("hidden vector", self.n_hidden(), h.len()));
        }
        Ok(())
    }

    /// `-a'v - b'h - v'Wh` for binary visibles.
    pub fn energy_binary(
        &self,
        v: &DVector<f64>,
        h: &DVector<f64>,
    ) -> Result<EnergyValue, RbmError> {
        if self.kind != VisibleKind::Binary {
            return Err(RbmError::WrongKind {
                expected: VisibleKind::Binary,
            });
        }
        self.check_visible(v)?;
        self.check_hidden(h)?;
        let e = -self.visible_bias.dot(v) - self.hidden_bias.dot(h) - v.dot(&(&self.weights * h));
        Ok(EnergyValue(e))
    }

    /// `0.5 |v - a|^2 - b'h - v'Wh` for whitened real-valued visibles.
    pub fn energy_gaussian(
        &self,
        v: &DVector<f64>,
        h: &DVector<f64>,
    ) -> Result<EnergyValue, RbmError> {
        if self.kind != VisibleKind::GaussianUnitVariance {
            return Err(RbmError::WrongKind {
                expected: VisibleKind::GaussianUnitVariance,
            });
        }
        self.check_visible(v)?;
        self.check_hidden(h)?;
        let diff = v - &self.visible_bias;
        let e = 0.5 * diff.dot(&diff) - self.hidden_bias.dot(h) - v.dot(&(&self.weights * h));
        Ok(EnergyValue(e))
    }

    pub fn energy(&self, v: &DVector<f64>, h: &DVector<f64>) -> Result<EnergyValue, RbmError> {
        match self.kind {
            VisibleKind::Binary => self.energy_binary(v, h),
            VisibleKind::GaussianUnitVariance => self.energy_gaussian(v, h),
        }
    }

    /// `P(h_j = 1 | v) = logistic(b_j + v'W[:, j])`.
    pub fn hidden_probs(&self, v: &DVector<f64>) -> Result<DVector<f64>, RbmError> {
        self.check_visible(v)?;
        Ok(self.hidden_probs_unchecked(v))
    }

    pub(crate) fn hidden_probs_unchecked(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut act = self.weights.tr_mul(v);
        act += &self.hidden_bias;
        act.map(logistic)
    }

    /// Gaussian kind: the conditional mean `a + Wh` (unit variance).
    /// Binary kind: `P(v_i = 1 | h) = logistic(a_i + W[i, :]h)`.
    pub fn visible_given_hidden(&self, h: &DVector<f64>) -> Result<DVector<f64>, RbmError> {
        self.check_hidden(h)?;
        Ok(self.visible_given_hidden_unchecked(h))
    }

    pub(crate) fn visible_given_hidden_unchecked(&self, h: &DVector<f64>) -> DVector<f64> {
        let mut act = &self.weights * h;
        act += &self.visible_bias;
        match self.kind {
            VisibleKind::Binary => act.map(logistic),
            VisibleKind::GaussianUnitVariance => act,
        }
    }

    pub fn sample_hidden<R: Rng + ?Sized>(
        &self,
        v: &DVector<f64>,
        rng: &mut R,
    ) -> Result<(DVector<f64>, DVector<f64>), RbmError> {
        let probs = self.hidden_probs(v)?;
        let sample = bernoulli(&probs, rng);
        Ok((probs, sample))
    }

    pub fn sample_visible<R: Rng + ?Sized>(
        &self,
        h: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>, RbmError> {
        let cond = self.visible_given_hidden(h)?;
        Ok(self.draw_visible(&cond, rng))
    }

    pub(crate) fn draw_visible<R: Rng + ?Sized>(
        &self,
        cond: &DVector<f64>,
        rng: &mut R,
    ) -> DVector<f64> {
        match self.kind {
            VisibleKind::Binary => bernoulli(cond, rng),
            VisibleKind::GaussianUnitVariance => cond.map(|mu| {
                let z: f64 = StandardNormal.sample(rng);
                mu + z
            }),
        }
    }

    /// Free energy `F(v) = -log sum_h exp(-E(v, h))`, summed over hidden units
    /// in closed form.
    pub fn free_energy(&self, v: &DVector<f64>) -> Result<f64, RbmError> {
        self.check_visible(v)?;
        let mut act = self.weights.tr_mul(v);
        act += &self.hidden_bias;
        let hidden_term: f64 = act.iter().map(|&x| softplus(x)).sum();
        let visible_term = match self.kind {
            VisibleKind::Binary => self.visible_bias.dot(v),
            VisibleKind::GaussianUnitVariance => {
                let d = v - &self.visible_bias;
                -0.5 * d.dot(&d)
            }
        };
        Ok(-(visible_term + hidden_term))
    }

    /// Negated copy: every bias and weight flips sign.
    pub fn negated(&self) -> Self {
        Self {
            visible_bias: -&self.visible_bias,
            hidden_bias: -&self.hidden_bias,
            weights: -&self.weights,
            kind: self.kind,
        }
    }
}

pub(crate) fn bernoulli<R: Rng + ?Sized>(probs: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    probs.map(|p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
}
