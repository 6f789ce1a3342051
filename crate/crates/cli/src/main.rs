use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cst_core::harness::{
    configured_model, run_ablation, run_classify, run_evaluate, run_extract, run_train,
    write_synthetic_corpus, DatasetManifest, FileError, PipelineConfig, SceneSpec,
};
use cst_core::recognition::load_model;

#[derive(Parser)]
#[command(name = "cst", version, about = "Object proposals from cascaded structure tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_passes: Option<usize>,
    /// Output directory; without it, reports go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Single {
    /// Number of gradient orientations.
    #[arg(long)]
    k: Option<usize>,
    /// Number of coherent tensors fused per pass.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract proposals for every image of a manifest.
    Extract {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        single: Single,
    },
    /// Extract and classify proposals.
    Classify {
        manifest: PathBuf,
        /// Classifier model; defaults to the one named in the config.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        single: Single,
    },
    /// Extract, classify and score against the manifest's truths.
    Evaluate {
        manifest: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        single: Single,
    },
    /// Train the baseline classifier on labeled proposals.
    Train {
        manifest: PathBuf,
        /// Where to write the model; defaults to `<out>/model.bin`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        single: Single,
    },
    /// Sweep K and M, reporting mAP and per-image time.
    Ablate {
        manifest: PathBuf,
        /// K values, as a list and/or ranges: `2-6` or `2,4,6`.
        #[arg(long, default_value = "1-6")]
        k: String,
        #[arg(long, default_value = "1-3")]
        m: String,
        #[command(flatten)]
        common: Common,
    },
    /// Render a seeded synthetic corpus with its manifest.
    Synth {
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Scene spec as JSON; defaults to three shapes.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Use the strong/weak two-shape preset.
        #[arg(long, conflicts_with = "spec")]
        two_contrast: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_values(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty range {part}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad value {part:?}"))?),
        }
    }
    if out.is_empty() {
        bail!("no values in {text:?}");
    }
    Ok(out)
}

fn load_config(common: &Common, single: Option<&Single>) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(p) = common.max_passes {
        cfg.max_passes = p;
    }
    if let Some(single) = single {
        if let Some(k) = single.k {
            cfg.k_count = k;
        }
        if let Some(m) = single.m {
            cfg.m_count = m;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(value: &impl serde::Serialize, out: Option<&Path>, name: &str) -> Result<()> {
    match out {
        None => println!("{}", serde_json::to_string_pretty(value)?),
        Some(dir) => eprintln!("wrote {}", dir.join(name).display()),
    }
    Ok(())
}

fn report_errors(errors: &[FileError]) -> ExitCode {
    if errors.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} file(s) failed:", errors.len());
    for e in errors {
        eprintln!("  {} ({}): {}", e.id, e.path, e.message);
    }
    ExitCode::from(2)
}

fn model_for(cfg: &PipelineConfig, flag: Option<&PathBuf>) -> Result<cst_core::recognition::SoftmaxModel> {
    Ok(match flag {
        Some(p) => load_model(p)?,
        None => configured_model(cfg)?,
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Extract { manifest, common, single } => {
            let cfg = load_config(&common, Some(&single))?;
            let manifest = DatasetManifest::load(&manifest)?;
            let report = run_extract(&cfg, &manifest, common.out.as_deref())?;
            emit(&report, common.out.as_deref(), "proposals.json")?;
            Ok(report_errors(&report.errors))
        }
        Command::Classify { manifest, model, common, single } => {
            let cfg = load_config(&common, Some(&single))?;
            let manifest = DatasetManifest::load(&manifest)?;
            let model = model_for(&cfg, model.as_ref())?;
            let report = run_classify(&cfg, &manifest, &model, common.out.as_deref())?;
            emit(&report, common.out.as_deref(), "detections.json")?;
            Ok(report_errors(&report.errors))
        }
        Command::Evaluate { manifest, model, common, single } => {
            let cfg = load_config(&common, Some(&single))?;
            let manifest = DatasetManifest::load(&manifest)?;
            let model = model_for(&cfg, model.as_ref())?;
            let evaluation = run_evaluate(&cfg, &manifest, &model, common.out.as_deref())?;
            emit(&evaluation, common.out.as_deref(), "evaluation.json")?;
            Ok(report_errors(&evaluation.errors))
        }
        Command::Train { manifest, model, common, single } => {
            let cfg = load_config(&common, Some(&single))?;
            let manifest = DatasetManifest::load(&manifest)?;
            let path = match (model, &common.out) {
                (Some(p), _) => p,
                (None, Some(out)) => {
                    std::fs::create_dir_all(out)?;
                    out.join("model.bin")
                }
                (None, None) => bail!("train needs --model or --out"),
            };
            let summary = run_train(&cfg, &manifest, &path)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(report_errors(&summary.errors))
        }
        Command::Ablate { manifest, k, m, common } => {
            let cfg = load_config(&common, None)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let (ks, ms) = (parse_values(&k)?, parse_values(&m)?);
            let report = run_ablation(&cfg, &manifest, &ks, &ms, common.out.as_deref())?;
            emit(&report, common.out.as_deref(), "ablation.csv")?;
            Ok(report_errors(&report.errors))
        }
        Command::Synth { count, spec, two_contrast, common } => {
            let Some(out) = common.out else { bail!("synth needs --out") };
            let spec = match spec {
                Some(p) => serde_json::from_str(
                    &std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
                )
                .with_context(|| format!("parsing {}", p.display()))?,
                None if two_contrast => SceneSpec::two_contrast(),
                None => SceneSpec::default(),
            };
            let manifest = write_synthetic_corpus(&out, &spec, common.seed.unwrap_or(0), count)?;
            eprintln!("wrote {} scenes to {}", manifest.images.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
