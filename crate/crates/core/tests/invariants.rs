use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xmodal::data::{
    generate_planted, generate_synthetic, FeatureStore, PlantedSpec, SampleFeatures, SyntheticSpec,
};
use xmodal::eval::SplitPlan;
use xmodal::head::cosine_matrix;
use xmodal::math::sample_std;
use xmodal::pipeline::{fit_model, gallery_and_probes, run_protocol, score, PipelineConfig};
use xmodal::rbm::{GaussianNormalizer, WhiteningKind};
use xmodal::{Half, Modality};

fn subjects(store: &FeatureStore) -> Vec<String> {
    store.subjects()
}

fn samples_of<'a>(store: &'a FeatureStore, subjects: &[String]) -> Vec<&'a SampleFeatures> {
    store
        .samples
        .iter()
        .filter(|s| subjects.contains(&s.subject_id))
        .collect()
}

/// Mean genuine score minus mean impostor score; probes and gallery are one
/// sample per subject in the same subject order.
fn margin(scores: &DMatrix<f64>) -> f64 {
    let n = scores.nrows();
    let genuine: f64 = (0..n).map(|i| scores[(i, i)]).sum::<f64>() / n as f64;
    let impostor: f64 = (scores.sum() - genuine * n as f64) / (n * n - n) as f64;
    genuine - impostor
}

#[test]
fn noiseless_linear_pairs_are_nearest_after_whitening() {
    let spec = SyntheticSpec {
        n_subjects: 30,
        n_points: 3,
        samples_per_subject_per_modality: 1,
        nonlinearity_strength: 0.0,
        noise_sigma: 0.0,
        nuisance_strength: 0.0,
        modality_specificity: 0.0,
        ..SyntheticSpec::default()
    };
    let store = generate_synthetic(&spec).unwrap().store;
    let all: Vec<String> = subjects(&store);
    let (gallery, probes) = gallery_and_probes(&store, &all);
    for p in 0..store.n_points {
        let whiten = |side: &[&SampleFeatures]| {
            let raw = store.point_matrix(side, Half::Left, p);
            GaussianNormalizer::fit(&raw, WhiteningKind::Zca, 1e-9)
                .unwrap()
                .apply_rows(&raw)
                .unwrap()
        };
        let s = cosine_matrix(&whiten(&probes), &whiten(&gallery)).unwrap();
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                if i != j {
                    assert!(s[(i, i)] > s[(i, j)], "point {p}: pair ({i}, {j})");
                }
            }
        }
    }
}

#[test]
fn shared_representations_score_genuine_pairs_higher() {
    let spec = SyntheticSpec {
        n_subjects: 24,
        n_points: 2,
        jet_dim: 12,
        latent_dim: 4,
        ..SyntheticSpec::default()
    };
    let store = generate_synthetic(&spec).unwrap().store;
    let all = subjects(&store);
    let (train, test) = all.split_at(12);
    let mut cfg = PipelineConfig {
        use_pca: false,
        ..PipelineConfig::default()
    };
    cfg.bank.n_hidden = 16;
    cfg.bank.train.updates = 2000;
    cfg.bank.whitening_floor = 0.01;
    let model = fit_model(&cfg, &store, &samples_of(&store, train)).unwrap();
    let (gallery, probes) = gallery_and_probes(&store, test);
    let s = score(&cfg, &model, &store, &probes, &gallery).unwrap();
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (i, p) in probes.iter().enumerate() {
        for (j, g) in gallery.iter().enumerate() {
            if p.subject_id == g.subject_id {
                genuine.push(s[(i, j)]);
            } else {
                impostor.push(s[(i, j)]);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&genuine) > mean(&impostor),
        "{} vs {}",
        mean(&genuine),
        mean(&impostor)
    );
}

#[test]
fn removing_the_planted_direction_widens_the_margin() {
    let spec = PlantedSpec {
        offset_dim: 1,
        ..PlantedSpec::default()
    };
    let store = generate_planted(&spec).unwrap().store;
    let all = subjects(&store);
    let (train, test) = all.split_at(60);
    let (gallery, probes) = gallery_and_probes(&store, test);
    let mut margins = Vec::new();
    for k in [0, 1] {
        let cfg = PipelineConfig {
            use_rbm: false,
            removed_k: Some(k),
            ..PipelineConfig::default()
        };
        let model = fit_model(&cfg, &store, &samples_of(&store, train)).unwrap();
        margins.push(margin(
            &score(&cfg, &model, &store, &probes, &gallery).unwrap(),
        ));
    }
    assert!(margins[1] > margins[0], "{margins:?}");
}

#[test]
fn test_subjects_never_reach_the_fit() {
    let spec = SyntheticSpec {
        n_subjects: 10,
        n_points: 2,
        jet_dim: 6,
        latent_dim: 3,
        ..SyntheticSpec::default()
    };
    let store = generate_synthetic(&spec).unwrap().store;
    let all = subjects(&store);
    let (train, test) = all.split_at(6);
    let mut cfg = PipelineConfig {
        removed_k: Some(1),
        ..PipelineConfig::default()
    };
    cfg.bank.n_hidden = 5;
    cfg.bank.train.updates = 300;
    let only_train = FeatureStore {
        samples: samples_of(&store, train).into_iter().cloned().collect(),
        ..store.clone()
    };
    let full = fit_model(&cfg, &store, &samples_of(&store, train)).unwrap();
    let reduced = fit_model(&cfg, &only_train, &samples_of(&only_train, train)).unwrap();
    assert_eq!(full, reduced);
    let (gallery, probes) = gallery_and_probes(&store, test);
    assert_eq!(
        score(&cfg, &full, &store, &probes, &gallery).unwrap(),
        score(&cfg, &reduced, &store, &probes, &gallery).unwrap()
    );
}

#[test]
fn reported_std_matches_recomputation_and_order_is_irrelevant() {
    let spec = SyntheticSpec {
        n_subjects: 20,
        n_points: 2,
        jet_dim: 8,
        ..SyntheticSpec::default()
    };
    let store = generate_synthetic(&spec).unwrap().store;
    let cfg = PipelineConfig {
        use_rbm: false,
        removed_k: Some(2),
        ..PipelineConfig::default()
    };
    let plan = SplitPlan {
        n_repeats: 10,
        dev_split: Some(0),
        seed: 4,
        ..SplitPlan::default()
    };
    let report = run_protocol(&cfg, &store, &plan).unwrap();
    let reported: Vec<f64> = (1..10).map(|i| report.per_split[i].rank1).collect();
    assert_eq!(report.reported, (1..10).collect::<Vec<_>>());
    assert!((report.rank1_std - sample_std(&reported)).abs() < 1e-15);
    assert!((report.rank1_mean - reported.iter().sum::<f64>() / 9.0).abs() < 1e-15);

    let mut shuffled = store.clone();
    shuffled.samples.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    assert_ne!(shuffled.samples, store.samples);
    assert_eq!(run_protocol(&cfg, &shuffled, &plan).unwrap(), report);
}

#[test]
fn gallery_is_modality_a() {
    let store = generate_synthetic(&SyntheticSpec {
        n_subjects: 3,
        n_points: 1,
        jet_dim: 4,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .store;
    let (g, p) = gallery_and_probes(&store, &subjects(&store));
    assert!(g.iter().all(|s| s.modality == Modality::A));
    assert!(p.iter().all(|s| s.modality == Modality::B));
}
