use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use xmodal::bank::{RbmBank, Regime};
use xmodal::data::{
    load_model, parse_landmarks, parse_manifest, save_model, DatasetManifest, FeatureStore,
    GrayImage, LandmarkSet, ManifestEntry, ModelArchive, SampleFeatures,
};
use xmodal::eval::rank1;
use xmodal::features::{fit_warp_points, FaceJets, GaborBank, GaborBankSpec};
use xmodal::head::{cosine_matrix, fit_head, fuse_halves};
use xmodal::multimodal::{InferenceConfig, MultiModalRbmParams};
use xmodal::rbm::{boltzmann, GaussianNormalizer, RbmParams, VisibleKind, WhiteningKind};
use xmodal::Modality;

fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-scale..scale, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn vector(n: usize, scale: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-scale..scale, n).prop_map(DVector::from_vec)
}

fn tiny_rbm(kind: VisibleKind) -> impl Strategy<Value = RbmParams> {
    (1usize..=4, 1usize..=3).prop_flat_map(move |(m, n)| {
        (matrix(m, n, 2.0), vector(m, 2.0), vector(n, 2.0)).prop_map(move |(w, a, b)| {
            let mut p = RbmParams::zeros(kind, m, n);
            p.weights = w;
            p.visible_bias = a;
            p.hidden_bias = b;
            p
        })
    })
}

fn mm_params(ma: usize, mb: usize, n: usize) -> impl Strategy<Value = MultiModalRbmParams> {
    (
        vector(ma, 1.0),
        vector(mb, 1.0),
        vector(n, 1.0),
        matrix(ma, n, 1.0),
        matrix(mb, n, 1.0),
    )
        .prop_map(
            |(bias_a, bias_b, hidden_bias, weights_a, weights_b)| MultiModalRbmParams {
                bias_a,
                bias_b,
                hidden_bias,
                weights_a,
                weights_b,
            },
        )
}

fn bits(c: usize, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |i, _| ((c >> i) & 1) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hidden_conditional_matches_enumeration(p in tiny_rbm(VisibleKind::Binary), vc in 0usize..16) {
        let m = p.n_visible();
        let n = p.n_hidden();
        let v = bits(vc % (1 << m), m);
        let energies: Vec<f64> = (0..1usize << n).map(|hc| p.energy(&v, &bits(hc, n)).unwrap().0).collect();
        let cond = boltzmann(&energies);
        let probs = p.hidden_probs(&v).unwrap();
        for j in 0..n {
            let enumerated: f64 = cond.iter().enumerate().filter(|(hc, _)| (hc >> j) & 1 == 1).map(|(_, q)| q).sum();
            prop_assert!((enumerated - probs[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn visible_conditional_matches_enumeration(p in tiny_rbm(VisibleKind::Binary), hc in 0usize..8) {
        let m = p.n_visible();
        let n = p.n_hidden();
        let h = bits(hc % (1 << n), n);
        let energies: Vec<f64> = (0..1usize << m).map(|vc| p.energy(&bits(vc, m), &h).unwrap().0).collect();
        let cond = boltzmann(&energies);
        let probs = p.visible_given_hidden(&h).unwrap();
        for i in 0..m {
            let enumerated: f64 = cond.iter().enumerate().filter(|(vc, _)| (vc >> i) & 1 == 1).map(|(_, q)| q).sum();
            prop_assert!((enumerated - probs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_offset_leaves_probabilities(energies in prop::collection::vec(-20.0f64..20.0, 1..32), c in -50.0f64..50.0) {
        let base = boltzmann(&energies);
        let shifted: Vec<f64> = energies.iter().map(|e| e + c).collect();
        let moved = boltzmann(&shifted);
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((base.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_hidden_conditional_is_exact(p in mm_params(2, 2, 3), va in vector(2, 2.0), vb in vector(2, 2.0)) {
        let probs = p.hidden_probs_joint(&va, &vb).unwrap();
        let n = 3;
        let energies: Vec<f64> = (0..1usize << n).map(|hc| p.energy(&va, &vb, &bits(hc, n)).unwrap().0).collect();
        let cond = boltzmann(&energies);
        for j in 0..n {
            let enumerated: f64 = cond.iter().enumerate().filter(|(hc, _)| (hc >> j) & 1 == 1).map(|(_, q)| q).sum();
            prop_assert!((enumerated - probs[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_representation_is_a_probability_vector(p in mm_params(3, 2, 4), va in vector(3, 50.0), vb in vector(2, 50.0)) {
        let cfg = InferenceConfig::default();
        let from_a = p.infer_shared(&va, Modality::A, &cfg).unwrap().probs;
        let from_b = p.infer_shared(&vb, Modality::B, &cfg).unwrap().probs;
        prop_assert!(from_a.iter().chain(from_b.iter()).all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn warp_interpolates_control_points(
        pts in prop::collection::vec((0.0f64..200.0, 0.0f64..200.0, -8.0f64..8.0, -8.0f64..8.0), 3..30),
        width in 5.0f64..40.0,
    ) {
        let src: Vec<[f64; 2]> = pts.iter().map(|p| [p.0, p.1]).collect();
        let too_close = src.iter().enumerate().any(|(i, a)| src[..i].iter().any(|b| (a[0] - b[0]).hypot(a[1] - b[1]) < 0.5));
        prop_assume!(!too_close);
        let dst: Vec<[f64; 2]> = pts.iter().map(|p| [p.0 + p.2, p.1 + p.3]).collect();
        // near-singular systems are refused rather than returned inaccurate
        if let Ok(w) = fit_warp_points(&src, &dst, width) {
            for (s, d) in src.iter().zip(&dst) {
                let q = w.apply(*s);
                prop_assert!((q[0] - d[0]).hypot(q[1] - d[1]) < 1e-9);
            }
        }
    }

    #[test]
    fn head_bases_are_orthonormal(train in matrix(12, 7, 3.0), k in 0usize..5) {
        let head = fit_head(&train, k, None).unwrap();
        let b = &head.basis;
        let gram = b.transpose() * b;
        let eye = DMatrix::<f64>::identity(b.ncols(), b.ncols());
        prop_assert!((gram - eye).amax() < 1e-8);
        let kept = head.kept_basis();
        let removed = b.columns(0, head.removed_k);
        if head.removed_k > 0 {
            prop_assert!((removed.transpose() * kept).amax() < 1e-8);
        }
    }

    #[test]
    fn positive_rescaling_keeps_rankings(
        probes in matrix(5, 4, 1.0),
        gallery in matrix(6, 4, 1.0),
        scales in prop::collection::vec(0.01f64..100.0, 11),
        labels in prop::collection::vec(0usize..6, 5),
    ) {
        let s = cosine_matrix(&probes, &gallery);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let mut p2 = probes.clone();
        let mut g2 = gallery.clone();
        for i in 0..5 {
            p2.row_mut(i).scale_mut(scales[i]);
        }
        for j in 0..6 {
            g2.row_mut(j).scale_mut(scales[5 + j]);
        }
        let s2 = cosine_matrix(&p2, &g2).unwrap();
        let gl: Vec<usize> = (0..6).collect();
        prop_assert_eq!(rank1(&s, &labels, &gl).unwrap(), rank1(&s2, &labels, &gl).unwrap());
        for i in 0..5 {
            let mut order: Vec<usize> = (0..6).collect();
            order.sort_by(|&a, &b| s[(i, b)].total_cmp(&s[(i, a)]));
            // near-ties may swap by rounding, so compare only separated entries
            for w in order.windows(2) {
                if s[(i, w[0])] - s[(i, w[1])] > 1e-9 {
                    prop_assert!(s2[(i, w[0])] > s2[(i, w[1])]);
                }
            }
        }
    }

    #[test]
    fn fusion_is_order_free(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        prop_assert_eq!(fuse_halves(a, b), fuse_halves(b, a));
    }

    #[test]
    fn jets_are_translation_covariant(dx in -6i64..6, dy in -6i64..6, seed in 0u64..1000) {
        let spec = GaborBankSpec { patch_radius: 12, ..GaborBankSpec::default() };
        let bank = GaborBank::new(spec).unwrap();
        let size = 64usize;
        let texture = |x: f64, y: f64| {
            let s = seed as f64;
            100.0 + 40.0 * (0.3 * x + 0.1 * y + s).sin() + 30.0 * (0.05 * x * y + 0.7 * s).cos()
        };
        let base = GrayImage::from_fn(size, size, |x, y| texture(x as f64, y as f64));
        let moved = GrayImage::from_fn(size, size, |x, y| texture(x as f64 - dx as f64, y as f64 - dy as f64));
        let p = [32.0, 32.0];
        let q = [32.0 + dx as f64, 32.0 + dy as f64];
        let a = bank.jet(&base, p).unwrap();
        let b = bank.jet(&moved, q).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }
}

// serialization round trips over randomized payloads

fn normalizer(dim: usize) -> impl Strategy<Value = GaussianNormalizer> {
    (vector(dim, 5.0), matrix(dim, dim, 2.0), any::<bool>()).prop_map(|(mean, transform, zca)| {
        GaussianNormalizer {
            mean,
            transform,
            kind: if zca {
                WhiteningKind::Zca
            } else {
                WhiteningKind::Wpca
            },
        }
    })
}

fn bank() -> impl Strategy<Value = RbmBank> {
    (1usize..4, 1usize..4, 1usize..4, 0usize..3).prop_flat_map(|(points, d, n, regime)| {
        let regime = [Regime::Local, Regime::Convolutional, Regime::Global][regime];
        let rbms = match regime {
            Regime::Local => prop::collection::vec(mm_params(d, d, n), points).boxed(),
            Regime::Convolutional => prop::collection::vec(mm_params(d, d, n), 1).boxed(),
            Regime::Global => {
                prop::collection::vec(mm_params(d * points, d * points, n), 1).boxed()
            }
        };
        let norms = prop::collection::vec(
            (normalizer(d), normalizer(d)).prop_map(|(a, b)| [a, b]),
            points,
        );
        (rbms, norms).prop_map(move |(rbms, normalizers)| RbmBank {
            regime,
            rbms,
            normalizers,
            jet_dim: d,
        })
    })
}

fn store() -> impl Strategy<Value = FeatureStore> {
    (1usize..4, 1usize..5, 0usize..5).prop_flat_map(|(points, d, count)| {
        let sample = (
            0usize..3,
            any::<bool>(),
            prop::collection::vec(-1e3f64..1e3, 2 * points * d),
        );
        prop::collection::vec(sample, count).prop_map(move |raw| {
            let samples = raw
                .into_iter()
                .enumerate()
                .map(|(i, (subject, a, values))| SampleFeatures {
                    sample_id: format!("x{i}"),
                    subject_id: format!("s{subject}"),
                    modality: if a { Modality::A } else { Modality::B },
                    jets: FaceJets {
                        jets: [0, 1].map(|h| {
                            (0..points)
                                .map(|p| values[(h * points + p) * d..][..d].to_vec())
                                .collect()
                        }),
                    },
                })
                .collect();
            FeatureStore {
                jet_dim: d,
                n_points: points,
                samples,
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bank_archives_round_trip(b in bank()) {
        prop_assume!(b.validate().is_ok());
        let a = ModelArchive::RbmBank(b);
        let bytes = save_model(&a);
        let back = load_model(&bytes).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(save_model(&back), bytes);
    }

    #[test]
    fn head_archives_round_trip(train in matrix(8, 5, 4.0), k in 0usize..3, cutoff in prop::option::of(0.5f64..1.0)) {
        if let Ok(head) = fit_head(&train, k, cutoff) {
            let a = ModelArchive::ProjectionHead(head);
            prop_assert_eq!(load_model(&save_model(&a)).unwrap(), a);
        }
    }

    #[test]
    fn gabor_spec_archives_round_trip(o in 1usize..12, s in 1usize..7, k in 0.1f64..3.0, step in 0.1f64..0.95, sigma in 0.5f64..8.0, r in 1usize..64) {
        let spec = GaborBankSpec { n_orientations: o, n_scales: s, k_max: k, k_step: step, sigma, patch_radius: r };
        let a = ModelArchive::GaborBankSpec(spec);
        prop_assert_eq!(load_model(&save_model(&a)).unwrap(), a);
    }

    #[test]
    fn stores_round_trip(s in store()) {
        if s.validate().is_ok() {
            let bytes = s.to_bytes();
            let back = FeatureStore::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn manifests_round_trip(rows in prop::collection::vec((0usize..5, any::<bool>(), "[a-z0-9_./]{1,12}", "[a-z0-9_./]{1,12}"), 0..8)) {
        let entries = rows
            .into_iter()
            .enumerate()
            .map(|(i, (s, a, img, lm))| ManifestEntry {
                sample_id: format!("id{i}"),
                subject_id: format!("s{s}"),
                modality: if a { Modality::A } else { Modality::B },
                image_path: img.into(),
                landmark_path: lm.into(),
            })
            .collect();
        let m = DatasetManifest { entries };
        prop_assert_eq!(parse_manifest(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn landmarks_round_trip(pts in prop::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 48), l in 0usize..48, r in 0usize..48) {
        prop_assume!(l != r);
        let set = LandmarkSet { points: pts.into_iter().map(|p| [p.0, p.1]).collect(), eye_left: l, eye_right: r };
        prop_assert_eq!(parse_landmarks(&set.to_text()).unwrap(), set);
    }
}
