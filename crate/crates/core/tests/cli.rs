use std::path::Path;
use std::process::{Command, Output};

use xmodal::data::{parse_manifest, FeatureStore};
use xmodal::pipeline::PipelineConfig;

fn xmodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xmodal"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = xmodal(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn extract_places_352_jets_per_face() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[images]\nn_subjects = 2\n").unwrap();
    let synth = dir.path().join("synth");
    ok(&[
        "synth",
        "--kind",
        "images",
        "--config",
        p(&cfg),
        "--out",
        p(&synth),
    ]);
    let manifest =
        parse_manifest(&std::fs::read_to_string(synth.join("manifest.tsv")).unwrap()).unwrap();
    assert_eq!(manifest.entries.len(), 4);
    let out = dir.path().join("x");
    ok(&[
        "extract",
        "--manifest",
        p(&synth.join("manifest.tsv")),
        "--out",
        p(&out),
    ]);
    let store = FeatureStore::read(&out.join("features.xmfs")).unwrap();
    assert_eq!(store.samples.len(), 4);
    assert_eq!(store.n_points, 176);
    assert_eq!(store.jet_dim, 40);
    for s in &store.samples {
        assert_eq!(s.jets.jets[0].len() + s.jets.jets[1].len(), 352);
        assert_eq!(s.jets.half_vector(xmodal::Half::Left).len(), 7040);
        assert_eq!(s.jets.half_vector(xmodal::Half::Right).len(), 7040);
    }
}

#[test]
fn empty_manifest_gives_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.tsv");
    std::fs::write(&m, "xmodal-manifest v1\n").unwrap();
    let out = dir.path().join("x");
    ok(&["extract", "--manifest", p(&m), "--out", p(&out)]);
    let store = FeatureStore::read(&out.join("features.xmfs")).unwrap();
    assert!(store.samples.is_empty());
}

#[test]
fn failures_exit_nonzero_with_stage_tag() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.xmfs");
    let out = xmodal(&[
        "train",
        "--features",
        p(&missing),
        "--out",
        p(&dir.path().join("t")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("[train]") && err.contains("nope.xmfs"),
        "{err}"
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = xmodal(&[
        "synth",
        "--config",
        p(&bad),
        "--out",
        p(&dir.path().join("s")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[synth]"));

    let out = xmodal(&["eval", "--out", p(&dir.path().join("e"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[eval]"));

    assert!(!xmodal(&["frobnicate"]).status.success());
}

#[test]
fn flags_override_config_and_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "removed_k = 4\nuse_rbm = true\n[synthetic]\nn_subjects = 3\nn_points = 1\njet_dim = 3\nlatent_dim = 2\n").unwrap();
    let out = dir.path().join("s");
    ok(&[
        "synth",
        "--config",
        p(&cfg),
        "--seed",
        "9",
        "--removed-k",
        "2",
        "--no-rbm",
        "--regime",
        "global",
        "--out",
        p(&out),
    ]);
    let echoed = PipelineConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(echoed.removed_k, Some(2));
    assert!(!echoed.use_rbm);
    assert_eq!(echoed.synthetic.n_subjects, 3);
    assert_eq!(echoed.synthetic.seed, 9);
    assert_eq!(echoed.bank.regime, xmodal::bank::Regime::Global);
}

#[test]
fn train_match_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "removed_k = 1\n[synthetic]\nn_subjects = 8\nn_points = 2\njet_dim = 5\nlatent_dim = 3\n[bank]\nn_hidden = 4\n[bank.train]\nupdates = 100\n",
    )
    .unwrap();
    let s = dir.path().join("s");
    ok(&["synth", "--config", p(&cfg), "--out", p(&s)]);
    let features = s.join("features.xmfs");
    let models = dir.path().join("m");
    ok(&[
        "train",
        "--config",
        p(&cfg),
        "--features",
        p(&features),
        "--out",
        p(&models),
    ]);
    let matched = dir.path().join("match");
    ok(&[
        "match",
        "--probes",
        p(&features),
        "--gallery",
        p(&features),
        "--models",
        p(&models),
        "--out",
        p(&matched),
    ]);
    let scores = std::fs::read_to_string(matched.join("scores.csv")).unwrap();
    // every probe-store sample against every gallery-store sample
    assert_eq!(scores.lines().count(), 32 * 32 + 1);
    assert_eq!(scores.lines().next().unwrap(), "probe_id,gallery_id,score");

    let eval = dir.path().join("e");
    ok(&[
        "eval",
        "--config",
        p(&cfg),
        "--features",
        p(&features),
        "--sweep-removed-k",
        "0..=2",
        "--out",
        p(&eval),
    ]);
    for f in [
        "summary.csv",
        "per_split.csv",
        "roc.csv",
        "cmc.csv",
        "report.txt",
        "roc.svg",
        "cmc.svg",
        "sweep.csv",
        "sweep.svg",
        "config.toml",
    ] {
        assert!(eval.join(f).exists(), "missing {f}");
    }
    let sweep = std::fs::read_to_string(eval.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);
}
