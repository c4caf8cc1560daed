//! Command-line front end: synth, extract, train, match, eval.
//!
//! Every command writes its effective configuration to `config.toml` in the
//! output directory next to its primary outputs.

pub mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bank::{RbmBank, Regime};
use crate::data::archive::{read_archive, write_archive};
use crate::data::{
    generate_images, generate_planted, generate_synthetic, parse_manifest, DatasetManifest,
    FeatureStore, ModelArchive,
};
use crate::features::FacialPointTemplate;
use crate::head::ProjectionHead;
use crate::pipeline::{
    describe, extract_store, fit_model, run_protocol, run_sweep, score, sorted_samples, MatchModel,
    PipelineConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "xmodal",
    version,
    about = "Cross-modal face matching with local multi-modal RBMs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML pipeline config; omitted keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for every seeded stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub removed_k: Option<usize>,
    /// Skip the RBM stage (jets + PCA baseline).
    #[arg(long)]
    pub no_rbm: bool,
    /// Per-probe z-score normalization of the score matrix.
    #[arg(long)]
    pub zscore: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Per-point jets straight from the latent model.
    Jets,
    /// Single-point vectors with a planted cross-modal distortion.
    Planted,
    /// Rendered PGM faces with landmark files.
    Images,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "jets")]
        kind: SynthKind,
    },
    /// Extract Gabor jets for every manifest entry.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train the RBM bank and PCA heads on a feature store.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
    },
    /// Score probes against a gallery with trained models.
    Match {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        gallery: PathBuf,
        /// Directory written by `train`.
        #[arg(long)]
        models: PathBuf,
    },
    /// Repeated-split evaluation.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Feature store to evaluate.
        #[arg(long, conflicts_with = "manifest")]
        features: Option<PathBuf>,
        /// Manifest to extract features from first.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Inclusive range `A..B` of removed components to sweep.
        #[arg(long, value_parser = parse_range)]
        sweep_removed_k: Option<(usize, usize)>,
    },
}

pub fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a
        .trim()
        .parse()
        .map_err(|_| format!("bad range start `{a}`"))?;
    let b: usize = b
        .trim()
        .parse()
        .map_err(|_| format!("bad range end `{b}`"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

/// Built-in defaults, then the config file, then flags.
pub fn effective_config(common: &Common, fallback: Option<&Path>) -> Result<PipelineConfig> {
    let path = common.config.as_deref().or(fallback);
    let mut cfg = match path {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(r) = common.regime {
        cfg.bank.regime = r;
    }
    if let Some(k) = common.removed_k {
        cfg.removed_k = Some(k);
    }
    if common.no_rbm {
        cfg.use_rbm = false;
        cfg.per_half_banks = false;
    }
    if common.zscore {
        cfg.zscore = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(common: &Common, cfg: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    write(&common.out, "config.toml", cfg.to_toml())
}

fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_manifest(&text)?)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn cmd_synth(common: &Common, kind: SynthKind) -> Result<()> {
    let cfg = effective_config(common, None)?;
    prepare_out(common, &cfg)?;
    match kind {
        SynthKind::Jets | SynthKind::Planted => {
            let data = if kind == SynthKind::Jets {
                generate_synthetic(&cfg.synthetic)?
            } else {
                generate_planted(&cfg.planted)?
            };
            write(&common.out, "manifest.tsv", data.manifest.to_text())?;
            data.store.write(&common.out.join("features.xmfs"))?;
        }
        SynthKind::Images => {
            let template = FacialPointTemplate::builtin();
            let samples = generate_images(&cfg.images, &template)?;
            for sub in ["images", "landmarks"] {
                std::fs::create_dir_all(common.out.join(sub))?;
            }
            let mut manifest = DatasetManifest {
                entries: Vec::new(),
            };
            for s in samples {
                write(
                    &common.out,
                    &s.entry.image_path.to_string_lossy(),
                    s.image.to_pgm(),
                )?;
                write(
                    &common.out,
                    &s.entry.landmark_path.to_string_lossy(),
                    s.landmarks.to_text(),
                )?;
                manifest.entries.push(s.entry);
            }
            write(&common.out, "manifest.tsv", manifest.to_text())?;
        }
    }
    Ok(())
}

pub fn cmd_extract(common: &Common, manifest: &Path) -> Result<()> {
    let cfg = effective_config(common, None)?;
    let m = read_manifest(manifest)?;
    let store = extract_store(&cfg, &m, &base_dir(manifest))?;
    prepare_out(common, &cfg)?;
    store.write(&common.out.join("features.xmfs"))?;
    Ok(())
}

fn bank_files(model: &MatchModel) -> Vec<(&'static str, &RbmBank)> {
    match model.banks.len() {
        1 => vec![("bank.xmrb", &model.banks[0])],
        2 => vec![
            ("bank_left.xmrb", &model.banks[0]),
            ("bank_right.xmrb", &model.banks[1]),
        ],
        _ => Vec::new(),
    }
}

const HEAD_FILES: [&str; 2] = ["head_left.xmrb", "head_right.xmrb"];

pub fn save_match_model(dir: &Path, cfg: &PipelineConfig, model: &MatchModel) -> Result<()> {
    for (name, bank) in bank_files(model) {
        write_archive(&dir.join(name), &ModelArchive::RbmBank(bank.clone()))?;
    }
    if let Some(heads) = &model.heads {
        for (name, head) in HEAD_FILES.iter().zip(heads) {
            write_archive(&dir.join(name), &ModelArchive::ProjectionHead(head.clone()))?;
        }
    }
    write_archive(
        &dir.join("gabor.xmrb"),
        &ModelArchive::GaborBankSpec(cfg.gabor.clone()),
    )?;
    Ok(())
}

pub fn load_match_model(dir: &Path, cfg: &PipelineConfig) -> Result<MatchModel> {
    let bank = |name: &str| -> Result<RbmBank> {
        match read_archive(&dir.join(name)).with_context(|| format!("loading {name}"))? {
            ModelArchive::RbmBank(b) => Ok(b),
            other => bail!(
                "{name} holds a {} archive, expected an RBM bank",
                other.kind()
            ),
        }
    };
    let head = |name: &str| -> Result<ProjectionHead> {
        match read_archive(&dir.join(name)).with_context(|| format!("loading {name}"))? {
            ModelArchive::ProjectionHead(h) => Ok(h),
            other => bail!(
                "{name} holds a {} archive, expected a projection head",
                other.kind()
            ),
        }
    };
    let banks = match (cfg.use_rbm, cfg.per_half_banks) {
        (false, _) => Vec::new(),
        (true, false) => vec![bank("bank.xmrb")?],
        (true, true) => vec![bank("bank_left.xmrb")?, bank("bank_right.xmrb")?],
    };
    let heads = if cfg.use_pca {
        let mut l = head(HEAD_FILES[0])?;
        let mut r = head(HEAD_FILES[1])?;
        let k = cfg.effective_removed_k();
        l = l.with_removed(k)?;
        r = r.with_removed(k)?;
        Some([l, r])
    } else {
        None
    };
    Ok(MatchModel { banks, heads })
}

pub fn cmd_train(common: &Common, features: &Path) -> Result<()> {
    let cfg = effective_config(common, None)?;
    let store = FeatureStore::read(features)?;
    let all = sorted_samples(&store.samples);
    let model = fit_model(&cfg, &store, &all)?;
    prepare_out(common, &cfg)?;
    save_match_model(&common.out, &cfg, &model)?;
    Ok(())
}

pub fn cmd_match(common: &Common, probes: &Path, gallery: &Path, models: &Path) -> Result<()> {
    let cfg = effective_config(common, Some(&models.join("config.toml")))?;
    let model = load_match_model(models, &cfg)?;
    let ps = FeatureStore::read(probes)?;
    let gs = FeatureStore::read(gallery)?;
    if (ps.jet_dim, ps.n_points) != (gs.jet_dim, gs.n_points) {
        bail!("probe and gallery stores have different jet layouts");
    }
    let p = sorted_samples(&ps.samples);
    let g: Vec<_> = sorted_samples(&gs.samples);
    // score() reads jets through the store it is given; both stores share a layout
    let mut merged = FeatureStore::new(ps.jet_dim, ps.n_points);
    merged.samples.extend(p.iter().map(|s| (*s).clone()));
    let probe_count = merged.samples.len();
    merged.samples.extend(g.iter().map(|s| (*s).clone()));
    let (pr, gr) = merged.samples.split_at(probe_count);
    let pr: Vec<_> = pr.iter().collect();
    let gr: Vec<_> = gr.iter().collect();
    let scores = score(&cfg, &model, &merged, &pr, &gr)?;
    let mut csv = String::from("probe_id,gallery_id,score\n");
    for (i, ps) in pr.iter().enumerate() {
        for (j, gs) in gr.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", ps.sample_id, gs.sample_id, scores[(i, j)]);
        }
    }
    prepare_out(common, &cfg)?;
    write(&common.out, "scores.csv", csv)
}

pub fn cmd_eval(
    common: &Common,
    features: Option<&Path>,
    manifest: Option<&Path>,
    sweep: Option<(usize, usize)>,
) -> Result<()> {
    let cfg = effective_config(common, None)?;
    let store = match (features, manifest) {
        (Some(f), _) => FeatureStore::read(f)?,
        (None, Some(m)) => extract_store(&cfg, &read_manifest(m)?, &base_dir(m))?,
        (None, None) => return Err(anyhow!("eval needs --features or --manifest")),
    };
    let (report, rows) = match sweep {
        Some((a, b)) => {
            // one fit per split serves both the sweep and the configured k
            let k = if cfg.use_pca {
                cfg.effective_removed_k()
            } else {
                0
            };
            let mut ks: Vec<usize> = (a..=b).collect();
            if !ks.contains(&k) {
                ks.push(k);
            }
            let mut rows = run_sweep(&cfg, &store, &cfg.plan, &ks)?;
            let at_k = rows
                .iter()
                .position(|r| r.removed_k == k)
                .expect("k is in the sweep");
            let report = if (a..=b).contains(&k) {
                rows[at_k].report.clone()
            } else {
                rows.remove(at_k).report
            };
            (report, Some(rows))
        }
        None => (run_protocol(&cfg, &store, &cfg.plan)?, None),
    };
    let label = describe(&cfg);
    prepare_out(common, &cfg)?;
    let out = &common.out;
    write(out, "summary.csv", report::summary_csv(&label, &report))?;
    write(out, "per_split.csv", report::per_split_csv(&report))?;
    write(out, "roc.csv", report::roc_csv(&report))?;
    write(out, "cmc.csv", report::cmc_csv(&report))?;
    write(
        out,
        "report.txt",
        report::report_text(&label, &report, rows.as_deref()),
    )?;
    let roc: Vec<(f64, f64)> = report.roc.iter().map(|p| (p.far, p.vr)).collect();
    write(
        out,
        "roc.svg",
        report::line_svg(
            "ROC",
            "false accept rate (log)",
            "verification rate",
            &roc,
            true,
        ),
    )?;
    let cmc: Vec<(f64, f64)> = report.cmc.iter().map(|&(r, h)| (r as f64, h)).collect();
    write(
        out,
        "cmc.svg",
        report::line_svg("CMC", "rank", "identification rate", &cmc, false),
    )?;
    if let Some(rows) = rows {
        write(out, "sweep.csv", report::sweep_csv(&rows))?;
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.removed_k as f64, r.report.rank1_mean))
            .collect();
        write(
            out,
            "sweep.svg",
            report::line_svg("removed components", "removed k", "rank-1", &pts, false),
        )?;
    }
    Ok(())
}

fn stage(command: &Command) -> &'static str {
    match command {
        Command::Synth { .. } => "synth",
        Command::Extract { .. } => "extract",
        Command::Train { .. } => "train",
        Command::Match { .. } => "match",
        Command::Eval { .. } => "eval",
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let result = match &cli.command {
        Command::Synth { common, kind } => cmd_synth(common, *kind),
        Command::Extract { common, manifest } => cmd_extract(common, manifest),
        Command::Train { common, features } => cmd_train(common, features),
        Command::Match {
            common,
            probes,
            gallery,
            models,
        } => cmd_match(common, probes, gallery, models),
        Command::Eval {
            common,
            features,
            manifest,
            sweep_removed_k,
        } => cmd_eval(
            common,
            features.as_deref(),
            manifest.as_deref(),
            *sweep_removed_k,
        ),
    };
    result.with_context(|| format!("[{}]", stage(&cli.command)))
}

/// Binary entry point; returns the process exit code.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
