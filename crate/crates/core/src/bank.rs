//! Banks of multi-modal RBMs over facial points.
//!
//! Three sharing regimes: one RBM per point (local), one RBM shared by every
//! point (convolutional), or one wide RBM over the concatenation of all
//! points (global). Jets are whitened per point and per modality before they
//! reach any RBM.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::math::derive_seed;
use crate::multimodal::{train_mm, InferenceConfig, MultiModalRbmParams};
use crate::rbm::{GaussianNormalizer, RbmError, TrainConfig, WhiteningKind, DEFAULT_FLOOR};
use crate::types::{Half, Modality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Local,
    #[serde(alias = "conv")]
    Convolutional,
    Global,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Local => "local",
            Regime::Convolutional => "conv",
            Regime::Global => "global",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Regime::Local => 0,
            Regime::Convolutional => 1,
            Regime::Global => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Regime::Local),
            1 => Some(Regime::Convolutional),
            2 => Some(Regime::Global),
            _ => None,
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Regime::Local),
            "conv" | "convolutional" => Ok(Regime::Convolutional),
            "global" => Ok(Regime::Global),
            other => Err(format!(
                "unknown regime `{other}` (expected local, conv or global)"
            )),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankConfig {
    pub regime: Regime,
    /// Hidden units per point RBM (local and convolutional regimes).
    pub n_hidden: usize,
    /// Hidden units of the single wide RBM (global regime).
    pub global_hidden: usize,
    pub whitening: WhiteningKind,
    pub whitening_floor: f64,
    pub train: TrainConfig,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            regime: Regime::Local,
            n_hidden: 80,
            global_hidden: 3520,
            whitening: WhiteningKind::Zca,
            whitening_floor: DEFAULT_FLOOR,
            train: TrainConfig::default(),
        }
    }
}

/// Paired training jets at one point: row `i` of `a` and row `i` of `b`
/// come from the same subject.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPairs {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmBank {
    pub regime: Regime,
    pub rbms: Vec<MultiModalRbmParams>,
    /// `normalizers[point][modality.index()]`.
    pub normalizers: Vec<[GaussianNormalizer; 2]>,
    pub jet_dim: usize,
}

/// Concatenated hidden probabilities for one half face.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedRepresentation {
    pub values: DVector<f64>,
    pub half: Half,
}

impl RbmBank {
    pub fn point_count(&self) -> usize {
        self.normalizers.len()
    }

    pub fn output_dim(&self) -> usize {
        match self.regime {
            Regime::Local | Regime::Convolutional => {
                self.rbms.first().map_or(0, |r| r.n_hidden()) * self.point_count()
            }
            Regime::Global => self.rbms.first().map_or(0, |r| r.n_hidden()),
        }
    }

    pub fn architecture(&self) -> String {
        match self.regime {
            Regime::Local => format!(
                "{}x({})",
                self.point_count(),
                self.rbms
                    .first()
                    .map(|r| r.architecture())
                    .unwrap_or_default()
            ),
            _ => self
                .rbms
                .first()
                .map(|r| r.architecture())
                .unwrap_or_default(),
        }
    }

    /// Structural consistency between regime, RBM count and dimensions.
    pub fn validate(&self) -> Result<(), RbmError> {
        let points = self.point_count();
        if points == 0 {
            return Err(RbmError::InvalidConfig("bank has no points".into()));
        }
        let expected_rbms = if self.regime == Regime::Local {
            points
        } else {
            1
        };
        if self.rbms.len() != expected_rbms {
            return Err(RbmError::dims(
                "bank rbm count",
                expected_rbms,
                self.rbms.len(),
            ));
        }
        for pair in &self.normalizers {
            for n in pair {
                if n.dim() != self.jet_dim {
                    return Err(RbmError::dims(
                        "normalizer dimension",
                        self.jet_dim,
                        n.dim(),
                    ));
                }
            }
        }
        let visible = match self.regime {
            Regime::Global => self.jet_dim * points,
            _ => self.jet_dim,
        };
        let hidden = self.rbms[0].n_hidden();
        for r in &self.rbms {
            r.validate()?;
            if r.dim(Modality::A) != visible || r.dim(Modality::B) != visible {
                return Err(RbmError::dims(
                    "bank rbm visible size",
                    visible,
                    r.dim(Modality::A),
                ));
            }
            if r.n_hidden() != hidden {
                return Err(RbmError::dims("bank rbm hidden size", hidden, r.n_hidden()));
            }
        }
        Ok(())
    }
}

fn check_points(points: &[PointPairs]) -> Result<usize, RbmError> {
    let first = points.first().ok_or(RbmError::EmptyData)?;
    let dim = first.a.ncols();
    for (i, p) in points.iter().enumerate() {
        if p.a.nrows() != p.b.nrows() {
            return Err(RbmError::dims("paired rows", p.a.nrows(), p.b.nrows()));
        }
        if p.a.nrows() < 2 {
            return Err(RbmError::InvalidConfig(format!(
                "point {i} has {} training pairs, need at least 2",
                p.a.nrows()
            )));
        }
        if p.a.ncols() != dim || p.b.ncols() != dim {
            return Err(RbmError::dims(
                "jet dimension",
                dim,
                p.b.ncols().max(p.a.ncols()),
            ));
        }
    }
    Ok(dim)
}

/// Fit per-point, per-modality whitening and the RBMs of the chosen regime.
/// Point `p` of the local regime trains with seed `derive_seed(config.train.seed, p)`.
pub fn train_bank(points: &[PointPairs], config: &BankConfig) -> Result<RbmBank, RbmError> {
    let jet_dim = check_points(points)?;
    config.train.validate()?;

    let fitted: Vec<([GaussianNormalizer; 2], DMatrix<f64>, DMatrix<f64>)> = points
        .par_iter()
        .map(|p| {
            let na = GaussianNormalizer::fit(&p.a, config.whitening, config.whitening_floor)?;
            let nb = GaussianNormalizer::fit(&p.b, config.whitening, config.whitening_floor)?;
            let wa = na.apply_rows(&p.a)?;
            let wb = nb.apply_rows(&p.b)?;
            Ok(([na, nb], wa, wb))
        })
        .collect::<Result<_, RbmError>>()?;

    let rbms = match config.regime {
        Regime::Local => fitted
            .par_iter()
            .enumerate()
            .map(|(i, (_, wa, wb))| {
                let cfg = TrainConfig {
                    seed: derive_seed(config.train.seed, i as u64),
                    ..config.train.clone()
                };
                train_mm(wa, wb, config.n_hidden, &cfg)
            })
            .collect::<Result<Vec<_>, RbmError>>()?,
        Regime::Convolutional => {
            let total: usize = fitted.iter().map(|f| f.1.nrows()).sum();
            let mut a = DMatrix::zeros(total, jet_dim);
            let mut b = DMatrix::zeros(total, jet_dim);
            let mut at = 0;
            for (_, wa, wb) in &fitted {
                a.rows_mut(at, wa.nrows()).copy_from(wa);
                b.rows_mut(at, wb.nrows()).copy_from(wb);
                at += wa.nrows();
            }
            vec![train_mm(&a, &b, config.n_hidden, &config.train)?]
        }
        Regime::Global => {
            let rows = fitted[0].1.nrows();
            if fitted.iter().any(|f| f.1.nrows() != rows) {
                return Err(RbmError::InvalidConfig(
                    "global regime needs the same training pairs at every point".into(),
                ));
            }
            let width = jet_dim * fitted.len();
            let mut a = DMatrix::zeros(rows, width);
            let mut b = DMatrix::zeros(rows, width);
            for (p, (_, wa, wb)) in fitted.iter().enumerate() {
                a.columns_mut(p * jet_dim, jet_dim).copy_from(wa);
                b.columns_mut(p * jet_dim, jet_dim).copy_from(wb);
            }
            vec![train_mm(&a, &b, config.global_hidden, &config.train)?]
        }
    };

    Ok(RbmBank {
        regime: config.regime,
        rbms,
        normalizers: fitted.into_iter().map(|f| f.0).collect(),
        jet_dim,
    })
}

/// Shared representations for many samples of one modality.
///
/// `jets[p]` holds one row per sample at point `p`. Returns one row per
/// sample; for local and convolutional banks, point `p` occupies columns
/// `[n*p, n*p + n)`. Gibbs chains at point `p` use seed
/// `derive_seed(cfg.seed, p)`.
pub fn infer_bank_rows(
    bank: &RbmBank,
    jets: &[DMatrix<f64>],
    modality: Modality,
    cfg: &InferenceConfig,
) -> Result<DMatrix<f64>, RbmError> {
    if jets.len() != bank.point_count() {
        return Err(RbmError::dims(
            "point count",
            bank.point_count(),
            jets.len(),
        ));
    }
    let rows = jets[0].nrows();
    let whitened: Vec<DMatrix<f64>> = jets
        .iter()
        .zip(&bank.normalizers)
        .map(|(j, n)| {
            if j.nrows() != rows {
                return Err(RbmError::dims("samples per point", rows, j.nrows()));
            }
            n[modality.index()].apply_rows(j)
        })
        .collect::<Result<_, _>>()?;

    match bank.regime {
        Regime::Global => {
            let width = bank.jet_dim * jets.len();
            let mut x = DMatrix::zeros(rows, width);
            for (p, w) in whitened.iter().enumerate() {
                x.columns_mut(p * bank.jet_dim, bank.jet_dim).copy_from(w);
            }
            bank.rbms[0].infer_shared_rows(&x, modality, cfg)
        }
        Regime::Local | Regime::Convolutional => {
            let n = bank.rbms[0].n_hidden();
            let blocks: Vec<DMatrix<f64>> = whitened
                .par_iter()
                .enumerate()
                .map(|(p, w)| {
                    let rbm = if bank.regime == Regime::Local {
                        &bank.rbms[p]
                    } else {
                        &bank.rbms[0]
                    };
                    let c = InferenceConfig {
                        seed: derive_seed(cfg.seed, p as u64),
                        ..cfg.clone()
                    };
                    rbm.infer_shared_rows(w, modality, &c)
                })
                .collect::<Result<_, _>>()?;
            let mut out = DMatrix::zeros(rows, n * blocks.len());
            for (p, b) in blocks.iter().enumerate() {
                out.columns_mut(p * n, n).copy_from(b);
            }
            Ok(out)
        }
    }
}

/// Shared representation of one half face from its per-point jets.
pub fn infer_bank(
    bank: &RbmBank,
    jets: &[DVector<f64>],
    modality: Modality,
    half: Half,
    cfg: &InferenceConfig,
) -> Result<SharedRepresentation, RbmError> {
    if jets.len() != bank.point_count() {
        return Err(RbmError::dims(
            "point count",
            bank.point_count(),
            jets.len(),
        ));
    }
    let rows: Vec<DMatrix<f64>> = jets
        .iter()
        .map(|j| DMatrix::from_row_slice(1, j.len(), j.as_slice()))
        .collect();
    let out = infer_bank_rows(bank, &rows, modality, cfg)?;
    Ok(SharedRepresentation {
        values: out.row(0).transpose(),
        half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multimodal::InferenceMethod;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn pairs(seed: u64, points: usize, rows: usize, dim: usize) -> Vec<PointPairs> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..points)
            .map(|_| {
                let a =
                    DMatrix::from_fn(rows, dim, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
                let noise =
                    DMatrix::from_fn(rows, dim, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
                let b = &a * 0.8 + noise * 0.3;
                PointPairs { a, b }
            })
            .collect()
    }

    fn small(regime: Regime) -> BankConfig {
        BankConfig {
            regime,
            n_hidden: 4,
            global_hidden: 5,
            train: TrainConfig {
                updates: 100,
                seed: 9,
                ..TrainConfig::default()
            },
            ..BankConfig::default()
        }
    }

    #[test]
    fn local_bank_has_distinct_point_models() {
        let bank = train_bank(&pairs(1, 2, 20, 3), &small(Regime::Local)).unwrap();
        bank.validate().unwrap();
        assert_eq!(bank.rbms.len(), 2);
        assert_ne!(bank.rbms[0], bank.rbms[1]);
        assert_eq!(bank.output_dim(), 8);
        assert_eq!(bank.architecture(), "2x(3-4-3)");
    }

    #[test]
    fn single_point_local_bank_is_train_mm() {
        let data = pairs(2, 1, 20, 3);
        let cfg = small(Regime::Local);
        let bank = train_bank(&data, &cfg).unwrap();
        let na = GaussianNormalizer::fit(&data[0].a, cfg.whitening, cfg.whitening_floor).unwrap();
        let nb = GaussianNormalizer::fit(&data[0].b, cfg.whitening, cfg.whitening_floor).unwrap();
        let tc = TrainConfig {
            seed: derive_seed(cfg.train.seed, 0),
            ..cfg.train.clone()
        };
        let direct = train_mm(
            &na.apply_rows(&data[0].a).unwrap(),
            &nb.apply_rows(&data[0].b).unwrap(),
            4,
            &tc,
        )
        .unwrap();
        assert_eq!(bank.rbms[0], direct);
    }

    #[test]
    fn convolutional_bank_shares_weights() {
        let mut data = pairs(3, 2, 20, 3);
        data[1] = data[0].clone();
        let bank = train_bank(&data, &small(Regime::Convolutional)).unwrap();
        assert_eq!(bank.rbms.len(), 1);
        let jet = DVector::from_vec(vec![0.2, -0.4, 1.0]);
        let rep = infer_bank(
            &bank,
            &[jet.clone(), jet],
            Modality::A,
            Half::Left,
            &InferenceConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.values.rows(0, 4), rep.values.rows(4, 4));
    }

    #[test]
    fn global_bank_output_is_hidden_size() {
        let bank = train_bank(&pairs(4, 3, 20, 2), &small(Regime::Global)).unwrap();
        bank.validate().unwrap();
        assert_eq!(bank.output_dim(), 5);
        let jets = vec![DVector::zeros(2); 3];
        let rep = infer_bank(
            &bank,
            &jets,
            Modality::B,
            Half::Right,
            &InferenceConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.values.len(), 5);
    }

    #[test]
    fn zero_bank_gives_half() {
        let bank = RbmBank {
            regime: Regime::Local,
            rbms: vec![MultiModalRbmParams::zeros(3, 3, 4); 2],
            normalizers: vec![
                [
                    GaussianNormalizer::identity(3),
                    GaussianNormalizer::identity(3)
                ];
                2
            ],
            jet_dim: 3,
        };
        let jets = vec![DVector::from_vec(vec![1.0, 2.0, 3.0]); 2];
        let rep = infer_bank(
            &bank,
            &jets,
            Modality::A,
            Half::Left,
            &InferenceConfig::default(),
        )
        .unwrap();
        assert!(rep.values.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn local_points_are_independent() {
        let bank = train_bank(&pairs(5, 3, 20, 3), &small(Regime::Local)).unwrap();
        let cfg = InferenceConfig::default();
        let mut jets = vec![DVector::from_vec(vec![0.1, 0.2, 0.3]); 3];
        let base = infer_bank(&bank, &jets, Modality::A, Half::Left, &cfg)
            .unwrap()
            .values;
        jets[1][0] += 2.0;
        let moved = infer_bank(&bank, &jets, Modality::A, Half::Left, &cfg)
            .unwrap()
            .values;
        for k in 0..12 {
            if (4..8).contains(&k) {
                continue;
            }
            assert_eq!(base[k], moved[k]);
        }
        assert_ne!(base.rows(4, 4), moved.rows(4, 4));
    }

    #[test]
    fn gibbs_inference_is_deterministic() {
        let bank = train_bank(&pairs(6, 2, 20, 3), &small(Regime::Local)).unwrap();
        let cfg = InferenceConfig {
            method: InferenceMethod::Gibbs,
            sweeps: 10,
            seed: 3,
        };
        let jets = vec![DVector::from_vec(vec![0.5, 0.0, -0.5]); 2];
        let a = infer_bank(&bank, &jets, Modality::B, Half::Left, &cfg).unwrap();
        let b = infer_bank(&bank, &jets, Modality::B, Half::Left, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_pairs_rejected() {
        let data = pairs(7, 2, 1, 3);
        assert!(train_bank(&data, &small(Regime::Local)).is_err());
        assert!(matches!(
            train_bank(&[], &small(Regime::Local)),
            Err(RbmError::EmptyData)
        ));
    }

    #[test]
    fn regime_parsing() {
        assert_eq!("conv".parse::<Regime>().unwrap(), Regime::Convolutional);
        assert!("dense".parse::<Regime>().is_err());
        for r in [Regime::Local, Regime::Convolutional, Regime::Global] {
            assert_eq!(Regime::from_tag(r.tag()), Some(r));
            assert_eq!(r.as_str().parse::<Regime>().unwrap(), r);
        }
    }
}
