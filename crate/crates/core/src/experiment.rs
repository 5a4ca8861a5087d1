//! Reproducible experiment runs: generate a network, fit its volume model,
//! derive exponents, certify the bounds for the requested mode and write the
//! report bundle.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    certify_exit_tail, certify_exit_times, certify_fluctuations, certify_local, certify_neardiag, certify_offdiag,
    certify_ondiag, derive_exponents, BoundCertificate, ExponentRule, ExponentSet, Mode, TailOptions, Verdict,
    DEFAULT_SLACK,
};
use crate::error::{Error, Result};
use crate::generators::{generate, GeneratorSpec};
use crate::heat::spectral_decompose;
use crate::network::NetworkSpec;
use crate::resistance::resistance_metric;
use crate::volume::{fit_model, volume_profile, FamilyChoice, FittedModel, VolumeProfile, WindowOverride};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_HYPOTHESES: i32 = 3;
pub const EXIT_WINDOW: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    #[default]
    Ondiag,
    Offdiag,
    Local,
    Fluct,
}

impl FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ondiag" => Ok(Self::Ondiag),
            "offdiag" => Ok(Self::Offdiag),
            "local" => Ok(Self::Local),
            "fluct" => Ok(Self::Fluct),
            other => Err(Error::InvalidSpec(format!("unknown mode `{other}` (ondiag|offdiag|local|fluct)"))),
        }
    }
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

fn default_out() -> PathBuf {
    PathBuf::from("report")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub window: WindowOverride,
    #[serde(default)]
    pub family: FamilyChoice,
    #[serde(default)]
    pub mode: ExperimentMode,
    /// Fractional slack above each exponent's strict lower bound.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Replaces the generator's own seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Vertex for the local certificate; defaults to the heaviest ball.
    #[serde(default)]
    pub vertex: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(generator: GeneratorSpec, mode: ExperimentMode) -> Self {
        Self {
            generator,
            window: WindowOverride::default(),
            family: FamilyChoice::default(),
            mode,
            slack: DEFAULT_SLACK,
            seed: None,
            vertex: None,
            out: default_out(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Generator spec with the config seed applied.
    pub fn effective_generator(&self) -> GeneratorSpec {
        let mut spec = self.generator.clone();
        if let Some(seed) = self.seed {
            spec.set_seed(seed);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub code: i32,
    pub kind: String,
    pub reason: Option<String>,
}

impl RunStatus {
    fn ok() -> Self {
        Self { code: EXIT_OK, kind: "ok".into(), reason: None }
    }

    pub fn from_error(err: &Error) -> Self {
        let (code, kind) = match err {
            Error::InfeasibleExponents(_) => (EXIT_INFEASIBLE, "infeasible_exponents"),
            Error::HypothesesNotMet(_) => (EXIT_HYPOTHESES, "hypotheses_not_met"),
            Error::WindowTooSmall(_) | Error::NarrowGrid(..) => (EXIT_WINDOW, "window_too_small"),
            _ => (EXIT_FAILURE, "error"),
        };
        Self { code, kind: kind.into(), reason: Some(err.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub name: String,
    pub vertices: usize,
    pub edges: usize,
    pub total_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub network: Option<NetworkSummary>,
    pub status: RunStatus,
    pub verdicts: BTreeMap<String, Verdict>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub summary: Summary,
    pub network: Option<NetworkSpec>,
    pub profile: Option<VolumeProfile>,
    pub fitted: Option<FittedModel>,
    pub exponents: Option<ExponentSet>,
    pub certificates: Vec<BoundCertificate>,
}

/// Metrics copied from certificates into the summary.
const SUMMARY_METRICS: &[&str] = &[
    "slope",
    "predicted_slope",
    "spread",
    "ratio_to_ondiag",
    "separation_min",
    "separation_t_lo",
    "shape_correlation",
    "cc_constant",
    "rescond_min",
];

/// Runs the whole pipeline. Analysis failures do not abort: they are
/// recorded in the summary status with their exit code.
pub fn run_experiment(config: &ExperimentConfig) -> ReportBundle {
    let mut bundle = ReportBundle {
        summary: Summary {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            network: None,
            status: RunStatus::ok(),
            verdicts: BTreeMap::new(),
            metrics: BTreeMap::new(),
        },
        network: None,
        profile: None,
        fitted: None,
        exponents: None,
        certificates: Vec::new(),
    };
    let status = match run_stages(config, &mut bundle) {
        Ok(()) => verdict_status(&bundle.certificates),
        Err(err) => RunStatus::from_error(&err),
    };
    bundle.summary.status = status;
    bundle
}

fn verdict_status(certs: &[BoundCertificate]) -> RunStatus {
    if let Some(c) = certs.iter().find(|c| matches!(c.verdict, Verdict::HypothesesNotMet { .. })) {
        let Verdict::HypothesesNotMet { reason } = &c.verdict else { unreachable!() };
        return RunStatus {
            code: EXIT_HYPOTHESES,
            kind: "hypotheses_not_met".into(),
            reason: Some(format!("{}: {reason}", c.bound_id)),
        };
    }
    if let Some(c) = certs.iter().find(|c| !c.verdict.holds()) {
        let Verdict::Violated { witness } = &c.verdict else { unreachable!() };
        return RunStatus { code: EXIT_FAILURE, kind: "violated".into(), reason: Some(format!("{}: {witness}", c.bound_id)) };
    }
    RunStatus::ok()
}

fn run_stages(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<()> {
    if !(config.slack > 0.0 && config.slack.is_finite()) {
        return Err(Error::InvalidSpec(format!("slack must be positive, got {}", config.slack)));
    }
    let net = generate(&config.effective_generator())?;
    bundle.summary.network = Some(NetworkSummary {
        name: net.name().to_string(),
        vertices: net.len(),
        edges: net.edges().len(),
        total_mass: net.total_mass(),
    });
    bundle.network = Some(net.to_spec());
    let metric = resistance_metric(&net)?;
    let profile = volume_profile(&net, &metric);
    let fitted = fit_model(&profile, config.family, config.window);
    bundle.profile = Some(profile);
    let fitted = fitted?;
    let model = fitted.model.clone();
    let metrics = &mut bundle.summary.metrics;
    metrics.insert("model.alpha".into(), model.alpha);
    metrics.insert("model.b".into(), model.b);
    metrics.insert("model.spread_at_r_min".into(), model.spread(model.window.r_min));
    metrics.insert("model.spread_growth".into(), fitted.report.spread_growth);
    bundle.fitted = Some(fitted);

    let mode = if config.mode == ExperimentMode::Offdiag { Mode::Offdiag } else { Mode::Ondiag };
    let exps = derive_exponents(&model, mode, ExponentRule::LowerBoundSlack { slack: config.slack })?;
    bundle.exponents = Some(exps.clone());
    let dec = spectral_decompose(&net)?;
    let profile = bundle.profile.as_ref().expect("profile computed above");

    let mut certs = vec![certify_ondiag(&dec, &model, &exps)?];
    match config.mode {
        ExperimentMode::Ondiag => {
            certs.push(certify_neardiag(&dec, &metric, &model, &exps)?);
            certs.push(certify_exit_times(&net, &metric, &model, &TailOptions::default())?);
        }
        ExperimentMode::Offdiag => {
            certs.push(certify_neardiag(&dec, &metric, &model, &exps)?);
            certs.push(certify_exit_times(&net, &metric, &model, &TailOptions::default())?);
            certs.push(certify_exit_tail(&net, &metric, &model, &exps, &TailOptions::default())?);
            certs.push(certify_offdiag(&dec, &metric, &model, &exps)?);
        }
        ExperimentMode::Fluct => certs.push(certify_fluctuations(&dec, profile, &model, &exps)?),
        ExperimentMode::Local => certs.push(certify_local(&net, &dec, &metric, profile, &model, config.vertex)?),
    }
    for cert in &certs {
        bundle.summary.verdicts.insert(cert.bound_id.clone(), cert.verdict.clone());
        for name in SUMMARY_METRICS {
            if let Some(v) = cert.metrics.get(*name) {
                bundle.summary.metrics.insert(format!("{}.{name}", cert.bound_id), *v);
            }
        }
    }
    if let Some(c2) = certs.iter().find(|c| c.bound_id == "exit_tail").and_then(|c| c.get("c2")) {
        bundle.summary.metrics.insert("exit_tail.c2".into(), c2);
    }
    bundle.certificates = certs;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidSpec(format!("unknown report format `{other}` (json|csv)"))),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the bundle into `dir` and returns the written paths in order.
pub fn emit_report(bundle: &ReportBundle, dir: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    if let Some(profile) = &bundle.profile {
        profile.write_csv(out("profile.csv"))?;
    }
    match format {
        ReportFormat::Json => {
            if let Some(net) = &bundle.network {
                net.to_json_file(out("network.json"))?;
            }
            if let Some(fitted) = &bundle.fitted {
                write_json(&out("model.json"), fitted)?;
            }
            if let Some(exps) = &bundle.exponents {
                write_json(&out("exponents.json"), exps)?;
            }
            for cert in &bundle.certificates {
                write_json(&out(&format!("cert_{}.json", cert.bound_id)), cert)?;
            }
            write_json(&out("summary.json"), &bundle.summary)?;
        }
        ReportFormat::Csv => {
            for cert in &bundle.certificates {
                cert.table.write_csv(out(&format!("cert_{}.csv", cert.bound_id)))?;
            }
            write_summary_csv(&bundle.summary, &out("summary.csv"))?;
        }
    }
    Ok(written)
}

fn write_summary_csv(summary: &Summary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["section", "key", "value"])?;
    w.write_record(["status", "code", &summary.status.code.to_string()])?;
    w.write_record(["status", "kind", &summary.status.kind])?;
    for (bound, verdict) in &summary.verdicts {
        w.write_record(["verdict", bound, verdict.label()])?;
    }
    for (key, value) in &summary.metrics {
        w.write_record(["metric", key, &format!("{value:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON artefacts of a written bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedReport {
    pub summary: Summary,
    pub fitted: Option<FittedModel>,
    pub exponents: Option<ExponentSet>,
    /// Sorted by bound id.
    pub certificates: Vec<BoundCertificate>,
}

pub fn load_report(dir: impl AsRef<Path>) -> Result<LoadedReport> {
    let dir = dir.as_ref();
    let read = |name: &str| -> Result<Option<String>> {
        let p = dir.join(name);
        if p.exists() {
            Ok(Some(fs::read_to_string(p)?))
        } else {
            Ok(None)
        }
    };
    let summary: Summary = serde_json::from_str(
        &read("summary.json")?.ok_or_else(|| Error::InvalidSpec(format!("no summary.json in {}", dir.display())))?,
    )?;
    let fitted = read("model.json")?.map(|s| serde_json::from_str(&s)).transpose()?;
    let exponents = read("exponents.json")?.map(|s| serde_json::from_str(&s)).transpose()?;
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.starts_with("cert_") && n.ends_with(".json"))
        .collect();
    names.sort();
    let certificates = names
        .iter()
        .map(|n| Ok(serde_json::from_str(&fs::read_to_string(dir.join(n))?)?))
        .collect::<Result<Vec<BoundCertificate>>>()?;
    Ok(LoadedReport { summary, fitted, exponents, certificates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Family;

    #[test]
    fn config_round_trip_and_defaults() {
        let text = r#"{"generator": {"family": "path", "n": 41}, "mode": "offdiag"}"#;
        let config: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(config.slack, DEFAULT_SLACK);
        assert_eq!(config.family, FamilyChoice::Auto);
        assert_eq!(config.mode, ExperimentMode::Offdiag);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(back, config);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"generator": {"family": "path", "n": 4}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn error_statuses_are_distinct() {
        let codes: Vec<i32> = [
            Error::InfeasibleExponents("x".into()),
            Error::HypothesesNotMet("x".into()),
            Error::WindowTooSmall("x".into()),
            Error::EmptySet,
        ]
        .iter()
        .map(|e| RunStatus::from_error(e).code)
        .collect();
        assert_eq!(codes, vec![EXIT_INFEASIBLE, EXIT_HYPOTHESES, EXIT_WINDOW, EXIT_FAILURE]);
    }

    #[test]
    fn narrow_network_reports_window_status() {
        let config = ExperimentConfig::new(Family::Path { n: 4 }.into(), ExperimentMode::Ondiag);
        let bundle = run_experiment(&config);
        assert_eq!(bundle.summary.status.code, EXIT_WINDOW, "{:?}", bundle.summary.status);
        assert!(bundle.certificates.is_empty());
        assert!(bundle.summary.network.is_some());
    }
}
