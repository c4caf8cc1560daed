//! Exact quantities for tiny RBMs by enumerating hidden configurations.
//!
//! Gaussian visibles are integrated analytically for each hidden
//! configuration: with `mu = a + Wh`,
//! `∫ exp(-E(v, h)) dv = (2π)^{m/2} exp(b'h + a'Wh + |Wh|²/2)`.
//! Binary visibles are summed in closed form per hidden configuration,
//! except in [`binary_joint_table`], which enumerates every `(v, h)` pair.

use nalgebra::{DMatrix, DVector};

use super::params::{RbmParams, VisibleKind};
use super::RbmError;
use crate::math::{bits_to_vector, log_sum_exp, logistic, softplus};

/// Largest hidden layer accepted by the enumeration routines.
pub const MAX_ENUM_HIDDEN: usize = 20;
/// Largest `visible + hidden` accepted for binary models.
pub const MAX_ENUM_BINARY_TOTAL: usize = 24;

/// `log Z` of the Boltzmann distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionValue {
    pub log_z: f64,
}

/// Gradient of the mean log-likelihood with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGradient {
    pub visible_bias: DVector<f64>,
    pub hidden_bias: DVector<f64>,
    pub weights: DMatrix<f64>,
}

fn check_enumerable(p: &RbmParams) -> Result<(), RbmError> {
    p.validate()?;
    let n = p.n_hidden();
    let m = p.n_visible();
    let ok = match p.kind {
        VisibleKind::GaussianUnitVariance => n <= MAX_ENUM_HIDDEN,
        VisibleKind::Binary => n <= MAX_ENUM_HIDDEN && m + n <= MAX_ENUM_BINARY_TOTAL,
    };
    if ok {
        Ok(())
    } else {
        Err(RbmError::TooLarge {
            visible: m,
            hidden: n,
        })
    }
}

/// Unnormalized log weight of each hidden configuration with visibles
/// marginalized: `log ∫/Σ_v exp(-E(v, h))`.
pub fn hidden_log_weights(p: &RbmParams) -> Result<Vec<f64>, RbmError> {
    check_enumerable(p)?;
    let m = p.n_visible();
    let n = p.n_hidden();
    let configs = 1u64 << n;
    let log_norm = 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();
    let mut out = Vec::with_capacity(configs as usize);
    for c in 0..configs {
        let h = bits_to_vector(c, n);
        let wh = &p.weights * &h;
        let bh = p.hidden_bias.dot(&h);
        let lw = match p.kind {
            VisibleKind::GaussianUnitVariance => {
                log_norm + bh + p.visible_bias.dot(&wh) + 0.5 * wh.dot(&wh)
            }
            VisibleKind::Binary => {
                bh + wh
                    .iter()
                    .zip(p.visible_bias.iter())
                    .map(|(x, a)| softplus(a + x))
                    .sum::<f64>()
            }
        };
        out.push(lw);
    }
    Ok(out)
}

pub fn log_partition_exact(p: &RbmParams) -> Result<PartitionValue, RbmError> {
    let lw = hidden_log_weights(p)?;
    Ok(PartitionValue {
        log_z: log_sum_exp(&lw),
    })
}

/// Marginal distribution over hidden configurations, indexed by the bit
/// pattern of `h`.
pub fn hidden_marginal(p: &RbmParams) -> Result<Vec<f64>, RbmError> {
    let lw = hidden_log_weights(p)?;
    let lz = log_sum_exp(&lw);
    Ok(lw.iter().map(|w| (w - lz).exp()).collect())
}

/// Normalized `exp(-E)` over an explicit list of configuration energies.
pub fn boltzmann(energies: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = energies.iter().map(|e| -e).collect();
    let lz = log_sum_exp(&neg);
    neg.iter().map(|x| (x - lz).exp()).collect()
}

/// Full joint table of a binary RBM, indexed `v_bits * 2^n + h_bits`.
pub fn binary_joint_table(p: &RbmParams) -> Result<Vec<f64>, RbmError> {
    if p.kind != VisibleKind::Binary {
        return Err(RbmError::WrongKind {
            expected: VisibleKind::Binary,
        });
    }
    check_enumerable(p)?;
    let m = p.n_visible();
    let n = p.n_hidden();
    let mut energies = Vec::with_capacity(1usize << (m + n));
    for vc in 0..(1u64 << m) {
        let v = bits_to_vector(vc, m);
        for hc in 0..(1u64 << n) {
            let h = bits_to_vector(hc, n);
            energies.push(p.energy_binary(&v, &h)?.0);
        }
    }
    Ok(boltzmann(&energies))
}

fn check_data(p: &RbmParams, data: &[DVector<f64>]) -> Result<(), RbmError> {
    if data.is_empty() {
        return Err(RbmError::EmptyData);
    }
    for v in data {
        p.check_visible(v)?;
    }
    Ok(())
}

/// Mean over `data` of `log Σ_h exp(-E(v, h)) - log Z`.
pub fn loglik_exact(data: &[DVector<f64>], p: &RbmParams) -> Result<f64, RbmError> {
    check_data(p, data)?;
    let lz = log_partition_exact(p)?.log_z;
    let mut acc = 0.0;
    for v in data {
        acc += -p.free_energy(v)?;
    }
    Ok(acc / data.len() as f64 - lz)
}

/// Analytic gradient of [`loglik_exact`]: data expectation minus model
/// expectation, the model term computed by enumeration.
pub fn loglik_gradient_exact(
    data: &[DVector<f64>],
    p: &RbmParams,
) -> Result<RbmGradient, RbmError> {
    check_data(p, data)?;
    let m = p.n_visible();
    let n = p.n_hidden();
    let mut g_w = DMatrix::zeros(m, n);
    let mut g_a = DVector::zeros(m);
    let mut g_b = DVector::zeros(n);
    let inv = 1.0 / data.len() as f64;
    for v in data {
        let ph = p.hidden_probs_unchecked(v);
        g_w += v * ph.transpose() * inv;
        g_a += v * inv;
        g_b += ph * inv;
    }

    let marg = hidden_marginal(p)?;
    for (c, &prob) in marg.iter().enumerate() {
        if prob == 0.0 {
            continue;
        }
        let h = bits_to_vector(c as u64, n);
        let mut act = &p.weights * &h;
        act += &p.visible_bias;
        let ev = match p.kind {
            VisibleKind::GaussianUnitVariance => act,
            VisibleKind::Binary => act.map(logistic),
        };
        g_w -= &ev * h.transpose() * prob;
        g_a -= &ev * prob;
        g_b -= h * prob;
    }
    Ok(RbmGradient {
        visible_bias: g_a,
        hidden_bias: g_b,
        weights: g_w,
    })
}
