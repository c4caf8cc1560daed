use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{bernoulli, RbmParams};
use super::RbmError;

/// Block Gibbs sampler alternating `h ~ P(h | v)` and `v ~ P(v | h)`.
pub struct GibbsSampler<'a> {
    params: &'a RbmParams,
    visible: DVector<f64>,
    hidden: DVector<f64>,
    hidden_probs: DVector<f64>,
    rng: ChaCha8Rng,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(params: &'a RbmParams, v0: DVector<f64>, seed: u64) -> Result<Self, RbmError> {
        params.validate()?;
        params.check_visible(&v0)?;
        let n = params.n_hidden();
        Ok(Self {
            params,
            visible: v0,
            hidden: DVector::zeros(n),
            hidden_probs: DVector::zeros(n),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// One sweep. Afterwards `(visible, hidden)` holds the new visible sample
    /// and the hidden sample it was drawn from.
    pub fn sweep(&mut self) {
        self.hidden_probs = self.params.hidden_probs_unchecked(&self.visible);
        self.hidden = bernoulli(&self.hidden_probs, &mut self.rng);
        let cond = self.params.visible_given_hidden_unchecked(&self.hidden);
        self.visible = self.params.draw_visible(&cond, &mut self.rng);
    }

    pub fn visible(&self) -> &DVector<f64> {
        &self.visible
    }

    pub fn hidden(&self) -> &DVector<f64> {
        &self.hidden
    }

    /// `P(h | v)` computed at the start of the last sweep.
    pub fn hidden_probs(&self) -> &DVector<f64> {
        &self.hidden_probs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub visible: DVector<f64>,
    pub hidden: DVector<f64>,
    /// Hidden activation probabilities, one entry per sweep.
    pub hidden_prob_trace: Vec<DVector<f64>>,
}

pub fn gibbs_chain(
    params: &RbmParams,
    v0: DVector<f64>,
    sweeps: usize,
    seed: u64,
) -> Result<ChainOutput, RbmError> {
    if sweeps == 0 {
        return Err(RbmError::InvalidConfig("sweeps must be at least 1".into()));
    }
    let mut sampler = GibbsSampler::new(params, v0, seed)?;
    let mut trace = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        sampler.sweep();
        trace.push(sampler.hidden_probs.clone());
    }
    Ok(ChainOutput {
        visible: sampler.visible,
        hidden: sampler.hidden,
        hidden_prob_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::logistic;
    use crate::rbm::VisibleKind;

    #[test]
    fn identical_seeds_give_identical_traces() {
        let mut p = RbmParams::zeros(VisibleKind::GaussianUnitVariance, 3, 2);
        p.weights[(0, 1)] = 0.7;
        p.hidden_bias[0] = -0.4;
        let a = gibbs_chain(&p, DVector::zeros(3), 50, 99).unwrap();
        let b = gibbs_chain(&p, DVector::zeros(3), 50, 99).unwrap();
        assert_eq!(a, b);
        let c = gibbs_chain(&p, DVector::zeros(3), 50, 100).unwrap();
        assert_ne!(a.visible, c.visible);
    }

    #[test]
    fn uncoupled_hidden_marginal() {
        let mut p = RbmParams::zeros(VisibleKind::GaussianUnitVariance, 2, 3);
        p.hidden_bias = DVector::from_vec(vec![-1.0, 0.0, 2.0]);
        let sweeps = 100_000;
        let mut s = GibbsSampler::new(&p, DVector::zeros(2), 17).unwrap();
        let mut counts = [0usize; 3];
        for _ in 0..sweeps {
            s.sweep();
            for j in 0..3 {
                counts[j] += s.hidden()[j] as usize;
            }
        }
        for j in 0..3 {
            let q = logistic(p.hidden_bias[j]);
            let se = (q * (1.0 - q) / sweeps as f64).sqrt();
            let emp = counts[j] as f64 / sweeps as f64;
            assert!((emp - q).abs() < 3.0 * se, "unit {j}: {emp} vs {q}");
        }
    }

    #[test]
    fn zero_sweeps_rejected() {
        let p = RbmParams::zeros(VisibleKind::Binary, 2, 2);
        assert!(gibbs_chain(&p, DVector::zeros(2), 0, 1).is_err());
    }
}
