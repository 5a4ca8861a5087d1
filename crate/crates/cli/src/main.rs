use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use reskernel::experiment::{
    emit_report, load_report, run_experiment, ExperimentConfig, ExperimentMode, ReportBundle, ReportFormat,
    EXIT_FAILURE,
};
use reskernel::generators::{generate, GeneratorSpec};
use reskernel::resistance::resistance_metric;
use reskernel::volume::{fit_model, volume_profile};
use reskernel::{build_network, NetworkSpec};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "reskernel", version, about = "Resistance metrics, heat kernels and bound certificates on measured networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment config (JSON). Its values win over conflicting flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random generator families.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network and write network.json.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Volume profile and fitted model for a generated or given network.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Analyse this network file instead of generating one.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Full run: exponents and certificates for the chosen mode.
    Certify {
        #[command(flatten)]
        common: Common,
        /// ondiag | offdiag | local | fluct
        #[arg(long)]
        mode: Option<String>,
        /// json | csv
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Re-emit a written JSON bundle, e.g. as CSV tables.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// json | csv
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Loads an experiment config or a bare generator spec, then applies flags
/// for fields the file leaves unset.
fn load_config(common: &Common, mode: Option<&str>) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().context("--config is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let is_experiment = raw.get("generator").is_some();
    let mut config = if is_experiment {
        serde_json::from_value::<ExperimentConfig>(raw.clone()).context("invalid experiment config")?
    } else {
        let spec: GeneratorSpec = serde_json::from_value(raw.clone()).context("invalid generator spec")?;
        ExperimentConfig::new(spec, ExperimentMode::default())
    };
    let set = |key: &str| is_experiment && raw.get(key).is_some_and(|v| !v.is_null());

    if let Some(seed) = common.seed {
        if set("seed") && config.seed != Some(seed) {
            warn(&format!("--seed {seed} ignored; config sets seed {:?}", config.seed));
        } else {
            config.seed = Some(seed);
        }
    }
    if let Some(out) = &common.out {
        if set("out") && &config.out != out {
            warn(&format!("--out {} ignored; config sets {}", out.display(), config.out.display()));
        } else {
            config.out = out.clone();
        }
    }
    if let Some(mode) = mode {
        let mode: ExperimentMode = mode.parse()?;
        if set("mode") && config.mode != mode {
            warn(&format!("--mode {mode:?} ignored; config sets {:?}", config.mode));
        } else {
            config.mode = mode;
        }
    }
    Ok(config)
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_summary(bundle: &ReportBundle) {
    let s = &bundle.summary;
    for (bound, verdict) in &s.verdicts {
        println!("{bound}: {}", verdict.label());
    }
    for (key, value) in &s.metrics {
        println!("{key} = {value:.6}");
    }
    match &s.status.reason {
        Some(reason) => println!("status {} ({}): {reason}", s.status.code, s.status.kind),
        None => println!("status {} ({})", s.status.code, s.status.kind),
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen { common } => {
            let config = load_config(&common, None)?;
            let net = generate(&config.effective_generator())?;
            fs::create_dir_all(&config.out)?;
            let path = config.out.join("network.json");
            net.to_spec().to_json_file(&path)?;
            println!("{}: {} vertices, {} edges", path.display(), net.len(), net.edges().len());
            Ok(0)
        }
        Command::Analyze { common, network } => {
            let config = common.config.as_ref().map(|_| load_config(&common, None)).transpose()?;
            let net = match (&network, &config) {
                (Some(path), _) => build_network(&NetworkSpec::from_json_file(path)?)?,
                (None, Some(c)) => generate(&c.effective_generator())?,
                (None, None) => bail!("analyze needs --network or --config"),
            };
            let out = match &config {
                Some(c) => c.out.clone(),
                None => common.out.clone().unwrap_or_else(|| PathBuf::from("report")),
            };
            let (family, window) = config.as_ref().map(|c| (c.family, c.window)).unwrap_or_default();
            let metric = resistance_metric(&net)?;
            let profile = volume_profile(&net, &metric);
            fs::create_dir_all(&out)?;
            profile.write_csv(out.join("profile.csv"))?;
            let fitted = fit_model(&profile, family, window)?;
            write_text(&out.join("model.json"), serde_json::to_string_pretty(&fitted)?)?;
            let m = &fitted.model;
            println!(
                "alpha = {:.6}, family = {:?}, window = [{:e}, {:e}], spread at r_min = {:.4}",
                m.alpha,
                m.family,
                m.window.r_min,
                m.window.r_max,
                m.spread(m.window.r_min)
            );
            Ok(0)
        }
        Command::Certify { common, mode, format } => {
            let config = load_config(&common, mode.as_deref())?;
            let format: ReportFormat = format.parse()?;
            let bundle = run_experiment(&config);
            emit_report(&bundle, &config.out, format)?;
            if format == ReportFormat::Csv {
                // the JSON summary is always written so runs stay machine-readable
                emit_report(&ReportBundle { certificates: vec![], profile: None, ..bundle.clone() }, &config.out, ReportFormat::Json)?;
            }
            print_summary(&bundle);
            if let Some(reason) = &bundle.summary.status.reason {
                eprintln!("{}: {reason}", bundle.summary.status.kind);
            }
            Ok(bundle.summary.status.code)
        }
        Command::Report { out, format } => {
            let format: ReportFormat = format.parse()?;
            let loaded = load_report(&out)?;
            let bundle = ReportBundle {
                summary: loaded.summary,
                network: None,
                profile: None,
                fitted: loaded.fitted,
                exponents: loaded.exponents,
                certificates: loaded.certificates,
            };
            let written = emit_report(&bundle, &out, format)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}
