//! Two-modality Gaussian RBM with one shared binary hidden layer.
//!
//! Energy: `½|v₁ - a|² + ½|v₂ - b|² - c'h - v₁'W₁h - v₂'W₂h`. With both
//! visible groups observed the model is a single Gaussian RBM over the
//! stacked visible vector `[v₁; v₂]`; training uses that view. Inference
//! from one modality treats the other as missing and alternates between the
//! hidden layer and the missing visibles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::math::{all_finite_mat, derive_seed, logistic};
use crate::rbm::{train_cd, EnergyValue, RbmError, RbmParams, TrainConfig, VisibleKind};
use crate::types::Modality;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalRbmParams {
    /// Modality-A visible biases (`a`).
    pub bias_a: DVector<f64>,
    /// Modality-B visible biases (`b`).
    pub bias_b: DVector<f64>,
    /// Hidden biases (`c`).
    pub hidden_bias: DVector<f64>,
    pub weights_a: DMatrix<f64>,
    pub weights_b: DMatrix<f64>,
}

/// Hidden activation probabilities used as the modality-free feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedRepVector {
    pub probs: DVector<f64>,
    pub source: RepSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepSource {
    FromA,
    FromB,
    FromBoth,
}

impl From<Modality> for RepSource {
    fn from(m: Modality) -> Self {
        match m {
            Modality::A => RepSource::FromA,
            Modality::B => RepSource::FromB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    /// Deterministic fixed-point updates with expectations in place of samples.
    MeanField,
    /// Alternating Gibbs sampler; probabilities averaged over the last half of sweeps.
    Gibbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub method: InferenceMethod,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            method: InferenceMethod::MeanField,
            sweeps: 50,
            seed: 0,
        }
    }
}

impl MultiModalRbmParams {
    pub fn zeros(m_a: usize, m_b: usize, n_hidden: usize) -> Self {
        Self {
            bias_a: DVector::zeros(m_a),
            bias_b: DVector::zeros(m_b),
            hidden_bias: DVector::zeros(n_hidden),
            weights_a: DMatrix::zeros(m_a, n_hidden),
            weights_b: DMatrix::zeros(m_b, n_hidden),
        }
    }

    pub fn dim(&self, m: Modality) -> usize {
        match m {
            Modality::A => self.bias_a.len(),
            Modality::B => self.bias_b.len(),
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    /// Architecture string `mA-n-mB`, e.g. `40-80-40`.
    pub fn architecture(&self) -> String {
        format!(
            "{}-{}-{}",
            self.bias_a.len(),
            self.n_hidden(),
            self.bias_b.len()
        )
    }

    fn bias(&self, m: Modality) -> &DVector<f64> {
        match m {
            Modality::A => &self.bias_a,
            Modality::B => &self.bias_b,
        }
    }

    fn weights(&self, m: Modality) -> &DMatrix<f64> {
        match m {
            Modality::A => &self.weights_a,
            Modality::B => &self.weights_b,
        }
    }

    pub fn validate(&self) -> Result<(), RbmError> {
        self.to_joint().validate()
    }

    fn check(&self, m: Modality, v: &DVector<f64>) -> Result<(), RbmError> {
        let what = match m {
            Modality::A => "modality-A vector",
            Modality::B => "modality-B vector",
        };
        if v.len() != self.dim(m) {
            return Err(RbmError::DimensionMismatch {
                what,
                expected: self.dim(m),
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(RbmError::NonFinite(what));
        }
        Ok(())
    }

    /// Stacked single-modality view over `[v_A; v_B]`.
    pub fn to_joint(&self) -> RbmParams {
        let (ma, mb, n) = (self.bias_a.len(), self.bias_b.len(), self.n_hidden());
        let mut visible_bias = DVector::zeros(ma + mb);
        visible_bias.rows_mut(0, ma).copy_from(&self.bias_a);
        visible_bias.rows_mut(ma, mb).copy_from(&self.bias_b);
        let mut weights = DMatrix::zeros(ma + mb, n);
        weights.rows_mut(0, ma).copy_from(&self.weights_a);
        weights.rows_mut(ma, mb).copy_from(&self.weights_b);
        RbmParams {
            visible_bias,
            hidden_bias: self.hidden_bias.clone(),
            weights,
            kind: VisibleKind::GaussianUnitVariance,
        }
    }

    /// Split a stacked Gaussian RBM whose first `m_a` visibles are modality A.
    pub fn from_joint(joint: &RbmParams, m_a: usize) -> Result<Self, RbmError> {
        if joint.kind != VisibleKind::GaussianUnitVariance {
            return Err(RbmError::WrongKind {
                expected: VisibleKind::GaussianUnitVariance,
            });
        }
        let m = joint.n_visible();
        if m_a > m {
            return Err(RbmError::DimensionMismatch {
                what: "modality split",
                expected: m,
                got: m_a,
            });
        }
        let mb = m - m_a;
        Ok(Self {
            bias_a: joint.visible_bias.rows(0, m_a).into_owned(),
            bias_b: joint.visible_bias.rows(m_a, mb).into_owned(),
            hidden_bias: joint.hidden_bias.clone(),
            weights_a: joint.weights.rows(0, m_a).into_owned(),
            weights_b: joint.weights.rows(m_a, mb).into_owned(),
        })
    }

    /// Copy with the roles of the two modalities exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            bias_a: self.bias_b.clone(),
            bias_b: self.bias_a.clone(),
            hidden_bias: self.hidden_bias.clone(),
            weights_a: self.weights_b.clone(),
            weights_b: self.weights_a.clone(),
        }
    }

    pub fn energy(
        &self,
        v_a: &DVector<f64>,
        v_b: &DVector<f64>,
        h: &DVector<f64>,
    ) -> Result<EnergyValue, RbmError> {
        self.check(Modality::A, v_a)?;
        self.check(Modality::B, v_b)?;
        if h.len() != self.n_hidden() {
            return Err(RbmError::DimensionMismatch {
                what: "hidden vector",
                expected: self.n_hidden(),
                got: h.len(),
            });
        }
        let da = v_a - &self.bias_a;
        let db = v_b - &self.bias_b;
        let e = 0.5 * da.dot(&da) + 0.5 * db.dot(&db)
            - self.hidden_bias.dot(h)
            - v_a.dot(&(&self.weights_a * h))
            - v_b.dot(&(&self.weights_b * h));
        Ok(EnergyValue(e))
    }

    /// `P(h_j = 1 | v_A, v_B)`; exact because hidden units are conditionally independent.
    pub fn hidden_probs_joint(
        &self,
        v_a: &DVector<f64>,
        v_b: &DVector<f64>,
    ) -> Result<DVector<f64>, RbmError> {
        self.check(Modality::A, v_a)?;
        self.check(Modality::B, v_b)?;
        Ok(self.hidden_probs_from(Modality::A, v_a, v_b))
    }

    fn hidden_probs_from(
        &self,
        present: Modality,
        v_present: &DVector<f64>,
        v_missing: &DVector<f64>,
    ) -> DVector<f64> {
        let missing = present.other();
        let mut act = self.weights(present).tr_mul(v_present);
        act += self.weights(missing).tr_mul(v_missing);
        act += &self.hidden_bias;
        act.map(logistic)
    }

    fn missing_mean(&self, missing: Modality, h: &DVector<f64>) -> DVector<f64> {
        self.weights(missing) * h + self.bias(missing)
    }

    fn run_chain(
        &self,
        v_present: &DVector<f64>,
        present: Modality,
        cfg: &InferenceConfig,
    ) -> Result<ChainSummary, RbmError> {
        self.check(present, v_present)?;
        if cfg.sweeps == 0 {
            return Err(RbmError::InvalidConfig("sweeps must be at least 1".into()));
        }
        let missing = present.other();
        match cfg.method {
            InferenceMethod::MeanField => {
                let mut v_missing = self.bias(missing).clone();
                let mut h = DVector::zeros(self.n_hidden());
                for _ in 0..cfg.sweeps {
                    h = self.hidden_probs_from(present, v_present, &v_missing);
                    v_missing = self.missing_mean(missing, &h);
                }
                Ok(ChainSummary {
                    hidden: h,
                    missing: v_missing,
                })
            }
            InferenceMethod::Gibbs => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut v_missing = DVector::from_fn(self.dim(missing), |_, _| -> f64 {
                    StandardNormal.sample(&mut rng)
                });
                let mut h: DVector<f64> =
                    DVector::from_fn(
                        self.n_hidden(),
                        |_, _| if rng.gen::<bool>() { 1.0 } else { 0.0 },
                    );
                let start = cfg.sweeps / 2;
                let kept = (cfg.sweeps - start) as f64;
                let mut prob_acc = DVector::zeros(self.n_hidden());
                let mut missing_acc = DVector::zeros(self.dim(missing));
                for t in 0..cfg.sweeps {
                    let probs = self.hidden_probs_from(present, v_present, &v_missing);
                    h = probs.map(|p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 });
                    let mean = self.missing_mean(missing, &h);
                    v_missing = mean.map(|mu| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mu + z
                    });
                    if t >= start {
                        prob_acc += probs;
                        missing_acc += &v_missing;
                    }
                }
                debug_assert!(h.len() == self.n_hidden());
                Ok(ChainSummary {
                    hidden: prob_acc / kept,
                    missing: missing_acc / kept,
                })
            }
        }
    }

    /// Shared representation inferred from one observed modality.
    pub fn infer_shared(
        &self,
        v_present: &DVector<f64>,
        present: Modality,
        cfg: &InferenceConfig,
    ) -> Result<SharedRepVector, RbmError> {
        let summary = self.run_chain(v_present, present, cfg)?;
        Ok(SharedRepVector {
            probs: summary.hidden,
            source: present.into(),
        })
    }

    /// Shared representation from both modalities (fusion mode).
    pub fn fuse(
        &self,
        v_a: &DVector<f64>,
        v_b: &DVector<f64>,
    ) -> Result<SharedRepVector, RbmError> {
        Ok(SharedRepVector {
            probs: self.hidden_probs_joint(v_a, v_b)?,
            source: RepSource::FromBoth,
        })
    }

    /// Reconstruction of the missing modality from the observed one.
    pub fn generate_missing(
        &self,
        v_present: &DVector<f64>,
        present: Modality,
        cfg: &InferenceConfig,
    ) -> Result<DVector<f64>, RbmError> {
        Ok(self.run_chain(v_present, present, cfg)?.missing)
    }
}

impl MultiModalRbmParams {
    /// [`infer_shared`](Self::infer_shared) applied to every row of `rows`.
    /// Gibbs chains are seeded per row with `derive_seed(cfg.seed, row)`.
    pub fn infer_shared_rows(
        &self,
        rows: &DMatrix<f64>,
        present: Modality,
        cfg: &InferenceConfig,
    ) -> Result<DMatrix<f64>, RbmError> {
        if rows.ncols() != self.dim(present) {
            return Err(RbmError::DimensionMismatch {
                what: "observed modality columns",
                expected: self.dim(present),
                got: rows.ncols(),
            });
        }
        if !all_finite_mat(rows) {
            return Err(RbmError::NonFinite("observed modality rows"));
        }
        if cfg.sweeps == 0 {
            return Err(RbmError::InvalidConfig("sweeps must be at least 1".into()));
        }
        let n = self.n_hidden();
        match cfg.method {
            InferenceMethod::MeanField => {
                let missing = present.other();
                let w_p = self.weights(present);
                let w_m = self.weights(missing);
                let base = rows * w_p;
                let mut v_m = DMatrix::from_fn(rows.nrows(), self.dim(missing), |_, j| {
                    self.bias(missing)[j]
                });
                let mut h = DMatrix::zeros(rows.nrows(), n);
                for _ in 0..cfg.sweeps {
                    h = &base + &v_m * w_m;
                    for mut r in h.row_iter_mut() {
                        r += self.hidden_bias.transpose();
                    }
                    h.apply(|x| *x = logistic(*x));
                    v_m = &h * w_m.transpose();
                    for mut r in v_m.row_iter_mut() {
                        r += self.bias(missing).transpose();
                    }
                }
                Ok(h)
            }
            InferenceMethod::Gibbs => {
                let mut out = DMatrix::zeros(rows.nrows(), n);
                for (i, row) in rows.row_iter().enumerate() {
                    let c = InferenceConfig {
                        seed: derive_seed(cfg.seed, i as u64),
                        ..cfg.clone()
                    };
                    let rep = self.infer_shared(&row.transpose(), present, &c)?;
                    out.set_row(i, &rep.probs.transpose());
                }
                Ok(out)
            }
        }
    }
}

struct ChainSummary {
    hidden: DVector<f64>,
    missing: DVector<f64>,
}

/// Stack paired whitened samples side by side: row `i` is `[a_i, b_i]`.
pub fn stack_pairs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, RbmError> {
    if a.nrows() != b.nrows() {
        return Err(RbmError::DimensionMismatch {
            what: "paired sample count",
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    Ok(out)
}

/// Joint training on paired samples: positive phase uses the exact joint
/// hidden conditional, negative phase `cd_k` block Gibbs sweeps over
/// `(h, v_A, v_B)`.
pub fn train_mm(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    n_hidden: usize,
    config: &TrainConfig,
) -> Result<MultiModalRbmParams, RbmError> {
    if a.nrows() == 0 {
        return Err(RbmError::EmptyData);
    }
    let stacked = stack_pairs(a, b)?;
    let joint = train_cd(
        &stacked,
        VisibleKind::GaussianUnitVariance,
        n_hidden,
        config,
    )?;
    MultiModalRbmParams::from_joint(&joint, a.ncols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::bits_to_vector;
    use crate::rbm::hidden_marginal;

    fn random_params(seed: u64, ma: usize, mb: usize, n: usize, scale: f64) -> MultiModalRbmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |r: usize, c: usize| {
            DMatrix::from_fn(r, c, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
        };
        MultiModalRbmParams {
            bias_a: g(ma, 1).column(0).into_owned(),
            bias_b: g(mb, 1).column(0).into_owned(),
            hidden_bias: g(n, 1).column(0).into_owned(),
            weights_a: g(ma, n),
            weights_b: g(mb, n),
        }
    }

    #[test]
    fn energy_zero_at_biases_with_hidden_off() {
        let p = random_params(1, 3, 2, 4, 0.7);
        let e = p.energy(&p.bias_a, &p.bias_b, &DVector::zeros(4)).unwrap();
        assert_eq!(e.0, 0.0);
    }

    #[test]
    fn energy_degenerates_to_single_modality() {
        let mut p = random_params(2, 3, 2, 3, 0.7);
        p.weights_b.fill(0.0);
        p.bias_b.fill(0.0);
        let single = RbmParams {
            visible_bias: p.bias_a.clone(),
            hidden_bias: p.hidden_bias.clone(),
            weights: p.weights_a.clone(),
            kind: VisibleKind::GaussianUnitVariance,
        };
        let v = DVector::from_vec(vec![0.3, -1.2, 0.8]);
        for c in 0..8u64 {
            let h = bits_to_vector(c, 3);
            let mm = p.energy(&v, &DVector::zeros(2), &h).unwrap().0;
            let s = single.energy_gaussian(&v, &h).unwrap().0;
            assert!((mm - s).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_hand_case() {
        let p = MultiModalRbmParams {
            bias_a: DVector::from_vec(vec![0.0]),
            bias_b: DVector::from_vec(vec![0.0]),
            hidden_bias: DVector::from_vec(vec![0.5]),
            weights_a: DMatrix::from_row_slice(1, 1, &[1.0]),
            weights_b: DMatrix::from_row_slice(1, 1, &[-1.0]),
        };
        let e = p
            .energy(
                &DVector::from_vec(vec![1.0]),
                &DVector::from_vec(vec![2.0]),
                &DVector::from_vec(vec![1.0]),
            )
            .unwrap();
        assert!((e.0 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_params_give_half() {
        let p = MultiModalRbmParams::zeros(2, 3, 4);
        let probs = p
            .hidden_probs_joint(
                &DVector::from_vec(vec![1.0, 2.0]),
                &DVector::from_vec(vec![0.0, -1.0, 3.0]),
            )
            .unwrap();
        assert!(probs.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn joint_conditional_matches_single_modality_when_decoupled() {
        let mut p = random_params(3, 3, 2, 4, 0.8);
        p.weights_b.fill(0.0);
        let single = RbmParams {
            visible_bias: p.bias_a.clone(),
            hidden_bias: p.hidden_bias.clone(),
            weights: p.weights_a.clone(),
            kind: VisibleKind::GaussianUnitVariance,
        };
        let v = DVector::from_vec(vec![0.5, 0.1, -0.9]);
        let a = p.hidden_probs_joint(&v, &p.bias_b).unwrap();
        let b = single.hidden_probs(&v).unwrap();
        assert!((a - b).abs().max() < 1e-15);
    }

    #[test]
    fn mean_field_without_missing_coupling_is_exact() {
        let mut p = random_params(4, 3, 2, 5, 0.8);
        p.weights_b.fill(0.0);
        let v = DVector::from_vec(vec![1.0, -0.5, 0.2]);
        let cfg = InferenceConfig::default();
        let rep = p.infer_shared(&v, Modality::A, &cfg).unwrap();
        assert_eq!(rep.probs, p.hidden_probs_joint(&v, &p.bias_b).unwrap());
        assert_eq!(rep.source, RepSource::FromA);
    }

    #[test]
    fn mean_field_is_deterministic_and_bounded() {
        let p = random_params(5, 4, 4, 6, 1.5);
        let v = DVector::from_vec(vec![2.0, -1.0, 0.0, 0.7]);
        let cfg = InferenceConfig::default();
        let a = p.infer_shared(&v, Modality::B, &cfg).unwrap();
        let b = p.infer_shared(&v, Modality::B, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn swapping_roles_gives_identical_representation() {
        let p = random_params(6, 3, 3, 4, 0.6);
        let q = p.swapped();
        let v = DVector::from_vec(vec![0.4, -0.3, 1.1]);
        let cfg = InferenceConfig::default();
        let from_a = p.infer_shared(&v, Modality::A, &cfg).unwrap();
        let from_b = q.infer_shared(&v, Modality::B, &cfg).unwrap();
        assert_eq!(from_a.probs, from_b.probs);
    }

    #[test]
    fn generate_missing_with_no_coupling_returns_bias() {
        let mut p = random_params(7, 2, 3, 4, 0.6);
        p.weights_a.fill(0.0);
        p.weights_b.fill(0.0);
        let out = p
            .generate_missing(
                &DVector::from_vec(vec![3.0, -2.0]),
                Modality::A,
                &InferenceConfig::default(),
            )
            .unwrap();
        assert_eq!(out, p.bias_b);
    }

    #[test]
    fn gibbs_inference_is_seed_deterministic() {
        let p = random_params(8, 2, 2, 3, 0.5);
        let v = DVector::from_vec(vec![0.3, 0.9]);
        let cfg = InferenceConfig {
            method: InferenceMethod::Gibbs,
            sweeps: 40,
            seed: 12,
        };
        let a = p.generate_missing(&v, Modality::A, &cfg).unwrap();
        let b = p.generate_missing(&v, Modality::A, &cfg).unwrap();
        assert_eq!(a, b);
        let r = p.infer_shared(&v, Modality::A, &cfg).unwrap();
        assert!(r.probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn decoupled_marginal_equals_single_modality_model() {
        // with W_B = 0 the (v_A, h) marginal is the single-modality model, so
        // the hidden marginal after integrating both visibles must agree
        let mut p = random_params(9, 2, 2, 3, 0.7);
        p.weights_b.fill(0.0);
        let single = RbmParams {
            visible_bias: p.bias_a.clone(),
            hidden_bias: p.hidden_bias.clone(),
            weights: p.weights_a.clone(),
            kind: VisibleKind::GaussianUnitVariance,
        };
        let joint = hidden_marginal(&p.to_joint()).unwrap();
        let marg = hidden_marginal(&single).unwrap();
        for (x, y) in joint.iter().zip(marg.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn train_mm_is_seed_deterministic() {
        let a = DMatrix::from_fn(30, 2, |i, j| ((i * 3 + j) % 5) as f64 * 0.4 - 0.8);
        let b = DMatrix::from_fn(30, 3, |i, j| ((i * 7 + j) % 4) as f64 * 0.5 - 0.75);
        let cfg = TrainConfig {
            updates: 200,
            seed: 4,
            ..TrainConfig::default()
        };
        let x = train_mm(&a, &b, 5, &cfg).unwrap();
        let y = train_mm(&a, &b, 5, &cfg).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.architecture(), "2-5-3");
        assert!(train_mm(&DMatrix::zeros(0, 2), &DMatrix::zeros(0, 3), 5, &cfg).is_err());
    }

    #[test]
    fn batch_mean_field_matches_per_row() {
        let p = random_params(10, 3, 2, 4, 0.8);
        let rows = DMatrix::from_fn(5, 3, |i, j| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let cfg = InferenceConfig::default();
        for m in [Modality::A, Modality::B] {
            let q = if m == Modality::A {
                p.clone()
            } else {
                p.swapped()
            };
            let batch = q.infer_shared_rows(&rows, m, &cfg).unwrap();
            for i in 0..5 {
                let single = q.infer_shared(&rows.row(i).transpose(), m, &cfg).unwrap();
                for j in 0..4 {
                    assert!((batch[(i, j)] - single.probs[j]).abs() < 1e-12);
                }
            }
        }
    }
}
