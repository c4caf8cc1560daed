use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::params::{RbmParams, VisibleKind};
use super::RbmError;
use crate::math::{all_finite_mat, derive_seed, logistic};

/// Stochastic-gradient settings for contrastive divergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Number of mini-batch updates.
    pub updates: usize,
    /// Gibbs sweeps in the negative phase.
    pub cd_k: usize,
    /// Keep negative chains across updates (PCD) instead of restarting at the data.
    pub persistent: bool,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Fraction of the updates after which the final momentum applies.
    pub momentum_switch: f64,
    pub weight_decay: f64,
    pub init_weight_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            updates: 50_000,
            cd_k: 1,
            persistent: false,
            learning_rate: 0.01,
            initial_momentum: 0.5,
            final_momentum: 0.9,
            momentum_switch: 0.2,
            weight_decay: 0.0,
            init_weight_std: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RbmError> {
        let bad = |msg: &str| Err(RbmError::InvalidConfig(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.cd_k == 0 {
            return bad("cd_k must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        for (name, m) in [
            ("initial_momentum", self.initial_momentum),
            ("final_momentum", self.final_momentum),
        ] {
            if !(0.0..1.0).contains(&m) {
                return Err(RbmError::InvalidConfig(format!(
                    "{name} must lie in [0, 1)"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.momentum_switch) {
            return bad("momentum_switch must lie in [0, 1]");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !(self.init_weight_std.is_finite() && self.init_weight_std >= 0.0) {
            return bad("init_weight_std must be non-negative");
        }
        Ok(())
    }

    pub fn momentum_at(&self, update: usize) -> f64 {
        if (update as f64) < self.momentum_switch * self.updates as f64 {
            self.initial_momentum
        } else {
            self.final_momentum
        }
    }
}

/// Mini-batch CD-k / PCD-k trainer over a data matrix with one sample per row.
pub struct CdTrainer<'a> {
    params: RbmParams,
    data: &'a DMatrix<f64>,
    config: TrainConfig,
    rng: ChaCha8Rng,
    vel_w: DMatrix<f64>,
    vel_a: DVector<f64>,
    vel_b: DVector<f64>,
    order: Vec<usize>,
    cursor: usize,
    chains: Option<DMatrix<f64>>,
    update: usize,
}

impl<'a> CdTrainer<'a> {
    pub fn new(
        init: RbmParams,
        data: &'a DMatrix<f64>,
        config: &TrainConfig,
    ) -> Result<Self, RbmError> {
        config.validate()?;
        init.validate()?;
        if data.nrows() == 0 {
            return Err(RbmError::EmptyData);
        }
        if data.ncols() != init.n_visible() {
            return Err(RbmError::dims(
                "data columns",
                init.n_visible(),
                data.ncols(),
            ));
        }
        if !all_finite_mat(data) {
            return Err(RbmError::NonFinite("training data"));
        }
        let (m, n) = init.weights.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        order.shuffle(&mut rng);
        Ok(Self {
            params: init,
            data,
            config: config.clone(),
            rng,
            vel_w: DMatrix::zeros(m, n),
            vel_a: DVector::zeros(m),
            vel_b: DVector::zeros(n),
            order,
            cursor: 0,
            chains: None,
            update: 0,
        })
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn updates_done(&self) -> usize {
        self.update
    }

    pub fn into_params(self) -> RbmParams {
        self.params
    }

    fn next_batch(&mut self) -> DMatrix<f64> {
        let bs = self.config.batch_size;
        let m = self.data.ncols();
        let mut batch = DMatrix::zeros(bs, m);
        for r in 0..bs {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            let idx = self.order[self.cursor];
            self.cursor += 1;
            batch.row_mut(r).copy_from(&self.data.row(idx));
        }
        batch
    }

    fn hidden_probs(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut act = v * &self.params.weights;
        for (j, mut col) in act.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.params.hidden_bias[j]);
        }
        act.apply(|x| *x = logistic(*x));
        act
    }

    fn sample_visible(&mut self, h: &DMatrix<f64>) -> DMatrix<f64> {
        // (W hᵀ)ᵀ avoids materialising Wᵀ
        let mut act = (&self.params.weights * h.transpose()).transpose();
        for (i, mut col) in act.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.params.visible_bias[i]);
        }
        let rng = &mut self.rng;
        match self.params.kind {
            VisibleKind::GaussianUnitVariance => act.apply(|mu| {
                *mu += <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            }),
            VisibleKind::Binary => act.apply(|x| {
                *x = if rng.gen::<f64>() < logistic(*x) {
                    1.0
                } else {
                    0.0
                }
            }),
        }
        act
    }

    fn bernoulli(&mut self, probs: &DMatrix<f64>) -> DMatrix<f64> {
        let rng = &mut self.rng;
        probs.map(|p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
    }

    /// One mini-batch update.
    pub fn step(&mut self) -> Result<(), RbmError> {
        let v0 = self.next_batch();
        let bs = v0.nrows() as f64;
        let ph0 = self.hidden_probs(&v0);

        let mut h = match (&self.chains, self.config.persistent) {
            (Some(chains), true) => chains.clone(),
            _ => self.bernoulli(&ph0),
        };
        let mut vk = v0.clone();
        let mut phk = ph0.clone();
        for _ in 0..self.config.cd_k {
            vk = self.sample_visible(&h);
            phk = self.hidden_probs(&vk);
            h = self.bernoulli(&phk);
        }
        if self.config.persistent {
            self.chains = Some(h);
        }

        let grad_a = (&v0 - &vk).row_mean().transpose();
        let grad_b = (&ph0 - &phk).row_mean().transpose();

        let mom = self.config.momentum_at(self.update);
        let lr = self.config.learning_rate;
        let wd = self.config.weight_decay;
        // vel ← mom·vel + lr·(⟨v h⟩_data − ⟨v h⟩_model − wd·W), in place
        self.vel_w *= mom;
        self.vel_w.gemm(lr / bs, &v0.transpose(), &ph0, 1.0);
        self.vel_w.gemm(-lr / bs, &vk.transpose(), &phk, 1.0);
        if wd != 0.0 {
            self.vel_w
                .zip_apply(&self.params.weights, |v, w| *v -= lr * wd * w);
        }
        self.vel_a = &self.vel_a * mom + grad_a * lr;
        self.vel_b = &self.vel_b * mom + grad_b * lr;
        self.params.weights += &self.vel_w;
        self.params.visible_bias += &self.vel_a;
        self.params.hidden_bias += &self.vel_b;
        self.update += 1;

        if !(all_finite_mat(&self.params.weights)
            && self
                .params
                .visible_bias
                .iter()
                .chain(self.params.hidden_bias.iter())
                .all(|x| x.is_finite()))
        {
            let max_abs = self
                .params
                .weights
                .iter()
                .filter(|x| x.is_finite())
                .fold(0.0f64, |acc, x| acc.max(x.abs()));
            return Err(RbmError::Diverged {
                update: self.update,
                detail: format!(
                    "non-finite parameter after update (largest finite |W| = {max_abs:.3e}, learning rate {lr})"
                ),
            });
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<RbmParams, RbmError> {
        while self.update < self.config.updates {
            self.step()?;
        }
        Ok(self.params)
    }
}

/// Initial parameters drawn from the config's seed: weights `Normal(0, init_std^2)`, biases zero.
pub fn initial_params(
    kind: VisibleKind,
    n_visible: usize,
    n_hidden: usize,
    config: &TrainConfig,
) -> RbmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0));
    RbmParams::random(kind, n_visible, n_hidden, config.init_weight_std, &mut rng)
}

/// Train an RBM with `n_hidden` hidden units on `data` (one sample per row).
pub fn train_cd(
    data: &DMatrix<f64>,
    kind: VisibleKind,
    n_hidden: usize,
    config: &TrainConfig,
) -> Result<RbmParams, RbmError> {
    let init = initial_params(kind, data.ncols(), n_hidden, config);
    CdTrainer::new(init, data, config)?.run()
}
