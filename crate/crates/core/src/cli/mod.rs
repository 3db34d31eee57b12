//! Command-line front end.
//!
//! Subcommands `fit`, `estimate` and `gof` read a CSV with a header row;
//! `simulate` runs a Monte Carlo campaign and `generate` writes a simulated
//! CSV. Exit codes: 0 success, 2 input error, 3 non-convergence, 4 numerical
//! failure.
//!
//! Campaign TSV schema, one row per method, target and metric:
//!
//! ```text
//! method  target  metric  value
//! our     AUC     rb_percent  -0.12
//! ```
//!
//! Metrics are `truth`, `mean`, `sd`, `rb_percent`, `mse_x1000`, `cp`, `al`,
//! `replicates_used`, plus `failure_rate` under target `-`. `cp` and `al`
//! are omitted when a method has no intervals. The JSON file carries the
//! same numbers with MSE unscaled.

pub mod input;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::comparators::Method;
use crate::data::Dataset;
use crate::error::Error;
use crate::gof::{gof_disease, gof_verification, GofResult};
use crate::inference::PluginContext;
use crate::likelihood::{check_identifiability, fit_mle, FitOptions, FitResult, IdentifiabilityReport};
use crate::simulation::{run_campaign, simulate_dataset, CampaignConfig, McReport, Scenario};

pub use input::{read_dataset, read_dataset_file, InputSchema};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Dimension { .. }
            | Error::InvalidRecord { .. }
            | Error::InvalidDataset(_)
            | Error::InvalidArgument(_)
            | Error::DegenerateGroup(_) => CliError::Input(e.to_string()),
            Error::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "niroc", version, about = "ROC/AUC estimation with non-ignorable verification bias")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the joint disease/verification model and print parameter estimates.
    Fit(DataArgs),
    /// Estimate AUC and ROC(s) with Wald intervals; optionally export the curve.
    Estimate(DataArgs),
    /// Two-step goodness-of-fit tests.
    Gof(DataArgs),
    /// Monte Carlo campaign over one scenario.
    Simulate(SimulateArgs),
    /// Write a simulated dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Structured,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    #[arg(long, default_value = "x")]
    pub biomarker: String,
    /// Covariate columns, comma separated, in model order.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long, default_value = "r")]
    pub verified: String,
    #[arg(long, default_value = "y")]
    pub disease: String,
    /// Replace the biomarker by (x - a) / b.
    #[arg(long, value_name = "A,B")]
    pub transform: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Reported ROC points (repeatable). Defaults to 0.1 and 0.2.
    #[arg(long = "s")]
    pub s: Vec<f64>,
    #[arg(long = "gof-B", default_value_t = crate::gof::DEFAULT_REPLICATES)]
    pub gof_b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// `estimate`: curve export CSV. `fit`, `gof`: copy of the structured report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// 1, 2, 3 or a JSON scenario file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Monte Carlo replicates.
    #[arg(long = "B", default_value_t = 300)]
    pub b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma separated subset of our, ipw, ig, ver, full.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long = "s")]
    pub s: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Draws used for the Monte Carlo truth.
    #[arg(long = "truth-n", default_value_t = 2_000_000)]
    pub truth_n: usize,
    /// Bootstrap replicates for IPW percentile intervals (0 disables).
    #[arg(long = "ipw-boot", default_value_t = 0)]
    pub ipw_boot: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Output prefix; writes PREFIX.tsv and PREFIX.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the true status of every record as column `y_true`.
    #[arg(long)]
    pub with_oracle: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings shared by the data commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub s_grid: Vec<f64>,
    pub s_points: Vec<f64>,
    pub gof_replicates: usize,
    pub seed: u64,
    pub fit: FitOptions,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            s_grid: default_grid(),
            s_points: vec![0.1, 0.2],
            gof_replicates: crate::gof::DEFAULT_REPLICATES,
            seed: 1,
            fit: FitOptions::default(),
            format: Format::Table,
        }
    }
}

/// `0.01, 0.02, ..., 0.99`.
pub fn default_grid() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}

impl DataArgs {
    pub fn schema(&self) -> InputSchema {
        InputSchema {
            biomarker: self.biomarker.clone(),
            covariates: self.covariates.iter().map(|c| c.trim().to_string()).collect(),
            verified: self.verified.clone(),
            disease: self.disease.clone(),
        }
    }

    pub fn config(&self) -> Result<RunConfig, CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Input(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(s) = self.s.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(CliError::Input(format!("--s must lie in (0, 1), got {s}")));
        }
        let mut cfg = RunConfig {
            alpha: self.alpha,
            gof_replicates: self.gof_b,
            seed: self.seed,
            fit: FitOptions {
                tol: self.tol,
                max_iter: self.max_iter,
            },
            format: self.format,
            ..RunConfig::default()
        };
        if !self.s.is_empty() {
            cfg.s_points = self.s.clone();
        }
        Ok(cfg)
    }

    pub fn load(&self) -> Result<Dataset, CliError> {
        let data = read_dataset_file(&self.input, &self.schema())?;
        match &self.transform {
            None => Ok(data),
            Some(spec) => {
                let (a, b) = parse_transform(spec)?;
                Ok(data.with_affine_biomarker(a, b)?)
            }
        }
    }
}

fn parse_transform(spec: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || CliError::Input(format!("--transform expects A,B with B nonzero, got '{spec}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && b != 0.0) {
        return Err(bad());
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub n_verified: usize,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    pub score_norm: f64,
    pub separation_warning: bool,
    pub parameters: Vec<ParameterRow>,
    pub identifiability: IdentifiabilityReport,
}

pub fn fit_report(data: &Dataset, fit: &FitResult, covariates: &[String]) -> FitReport {
    let names = fit.eta_hat.names(covariates);
    let se = fit
        .standard_errors()
        .unwrap_or_else(|_| vec![f64::NAN; fit.eta_hat.k2()]);
    let normal = Normal::standard();
    let parameters = names
        .into_iter()
        .zip(fit.eta_hat.as_slice())
        .zip(se)
        .map(|((name, &estimate), se)| {
            let z = estimate / se;
            let p_value = 2.0 * (1.0 - normal.cdf(z.abs()));
            ParameterRow {
                name,
                estimate,
                se,
                z,
                p_value,
                significant: p_value < 0.05,
            }
        })
        .collect();
    FitReport {
        n: data.n(),
        n_verified: data.n1(),
        converged: fit.converged,
        iterations: fit.iterations,
        loglik: fit.loglik,
        score_norm: fit.score_norm,
        separation_warning: fit.separation_warning,
        parameters,
        identifiability: check_identifiability(data).with_fit(fit),
    }
}

fn write_fit_table(w: &mut dyn Write, r: &FitReport) -> std::io::Result<()> {
    writeln!(
        w,
        "n = {}, verified = {} ({:.1}% missing), {} after {} iterations",
        r.n,
        r.n_verified,
        100.0 * (1.0 - r.n_verified as f64 / r.n as f64),
        if r.converged { "converged" } else { "NOT converged" },
        r.iterations
    )?;
    writeln!(w, "log-likelihood {:.4}", r.loglik)?;
    writeln!(w)?;
    writeln!(w, "{:<20} {:>11} {:>10} {:>8} {:>9}", "parameter", "estimate", "se", "z", "p")?;
    for p in &r.parameters {
        writeln!(
            w,
            "{:<20} {:>11.4} {:>10.4} {:>8.2} {:>9.4} {}",
            p.name,
            p.estimate,
            p.se,
            p.z,
            p.p_value,
            if p.significant { "*" } else { "" }
        )?;
    }
    writeln!(w, "* significant at 5%")?;
    let id = &r.identifiability;
    writeln!(
        w,
        "identifiability: min singular value {:.3e}, {} distinct biomarker values",
        id.min_singular_value, id.distinct_x
    )?;
    if r.separation_warning {
        writeln!(w, "warning: fitted probabilities near 0 or 1 (possible separation)")?;
    }
    for msg in &id.warnings {
        writeln!(w, "warning: {msg}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalRow {
    /// `None` for AUC.
    pub s: Option<f64>,
    pub estimate: f64,
    pub se: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub n: usize,
    pub n_verified: usize,
    pub alpha: f64,
    pub prevalence: f64,
    pub auc: IntervalRow,
    pub roc: Vec<IntervalRow>,
}

fn roc_row(ctx: &PluginContext<'_>, s: f64, alpha: f64) -> Result<IntervalRow, CliError> {
    let estimate = ctx.roc_point(s)?;
    Ok(match ctx.roc(s, alpha) {
        Ok(est) => IntervalRow {
            s: Some(s),
            estimate,
            se: Some(est.se),
            lo: Some(est.ci.0),
            hi: Some(est.ci.1),
            warning: None,
        },
        Err(e) => IntervalRow {
            s: Some(s),
            estimate,
            se: None,
            lo: None,
            hi: None,
            warning: Some(e.to_string()),
        },
    })
}

pub fn estimate_report(
    data: &Dataset,
    fit: &FitResult,
    cfg: &RunConfig,
) -> Result<(EstimateReport, Vec<IntervalRow>), CliError> {
    let ctx = PluginContext::new(data, fit)?;
    let auc = ctx.auc(cfg.alpha)?;
    let roc = cfg
        .s_points
        .iter()
        .map(|&s| roc_row(&ctx, s, cfg.alpha))
        .collect::<Result<Vec<_>, _>>()?;
    let curve = cfg
        .s_grid
        .iter()
        .map(|&s| roc_row(&ctx, s, cfg.alpha))
        .collect::<Result<Vec<_>, _>>()?;
    let report = EstimateReport {
        n: data.n(),
        n_verified: data.n1(),
        alpha: cfg.alpha,
        prevalence: ctx.lambda_hat,
        auc: IntervalRow {
            s: None,
            estimate: auc.point,
            se: Some(auc.se),
            lo: Some(auc.ci.0),
            hi: Some(auc.ci.1),
            warning: None,
        },
        roc,
    };
    Ok((report, curve))
}

/// Curve export with columns `s, roc, se, lo, hi`; failed points leave the
/// interval cells empty.
pub fn write_curve_csv<W: Write>(w: W, rows: &[IntervalRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["s", "roc", "se", "lo", "hi"])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            cell(r.s),
            r.estimate.to_string(),
            cell(r.se),
            cell(r.lo),
            cell(r.hi),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn write_estimate_table(w: &mut dyn Write, r: &EstimateReport) -> std::io::Result<()> {
    let level = 100.0 * (1.0 - r.alpha);
    writeln!(
        w,
        "n = {}, verified = {}, estimated prevalence {:.4}",
        r.n, r.n_verified, r.prevalence
    )?;
    writeln!(w, "{:<10} {:>8} {:>8}   {level:.0}% CI", "target", "estimate", "se")?;
    let mut line = |label: String, row: &IntervalRow| -> std::io::Result<()> {
        writeln!(
            w,
            "{:<10} {:>8.4} {:>8}   [{}, {}]",
            label,
            row.estimate,
            fmt_opt(row.se),
            fmt_opt(row.lo),
            fmt_opt(row.hi)
        )?;
        if let Some(msg) = &row.warning {
            writeln!(w, "  warning: {msg}")?;
        }
        Ok(())
    };
    line("AUC".into(), &r.auc)?;
    for row in &r.roc {
        line(format!("ROC({})", row.s.unwrap_or(f64::NAN)), row)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    pub replicates: usize,
    pub seed: u64,
    pub disease: GofResultSummary,
    pub verification: GofResultSummary,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct GofResultSummary {
    pub statistic: f64,
    pub raw_t: f64,
    pub se_boot: f64,
    pub p_value: f64,
    pub failed: usize,
}

impl From<&GofResult> for GofResultSummary {
    fn from(g: &GofResult) -> Self {
        Self {
            statistic: g.statistic,
            raw_t: g.raw_t,
            se_boot: g.se_boot,
            p_value: g.p_value,
            failed: g.failed,
        }
    }
}

const GOF_NOTE: &str =
    "the verification-model test is interpretable only when the disease-model test does not reject";

fn write_gof_table(w: &mut dyn Write, r: &GofReport) -> std::io::Result<()> {
    writeln!(w, "bootstrap replicates {}, seed {}", r.replicates, r.seed)?;
    writeln!(w, "{:<22} {:>10} {:>10}", "test", "statistic", "p-value")?;
    writeln!(w, "{:<22} {:>10.4} {:>10.4}", "disease model", r.disease.statistic, r.disease.p_value)?;
    writeln!(
        w,
        "{:<22} {:>10.4} {:>10.4}",
        "verification model", r.verification.statistic, r.verification.p_value
    )?;
    writeln!(w, "note: {}", r.note)
}

fn fit_converged(data: &Dataset, cfg: &RunConfig) -> Result<FitResult, CliError> {
    let fit = fit_mle(data, None, &cfg.fit)?;
    if !fit.converged {
        return Err(CliError::NonConvergence(
            Error::NonConvergence {
                iterations: fit.iterations,
                score_norm: fit.score_norm,
            }
            .to_string(),
        ));
    }
    Ok(fit)
}

fn emit<T: Serialize>(
    w: &mut dyn Write,
    format: Format,
    report: &T,
    table: impl FnOnce(&mut dyn Write, &T) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let res = match format {
        Format::Table => table(w, report),
        Format::Structured => serde_json::to_writer_pretty(&mut *w, report)
            .map_err(std::io::Error::other)
            .and_then(|_| writeln!(w)),
    };
    res.map_err(|e| CliError::Input(format!("cannot write output: {e}")))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn cmd_fit(args: &DataArgs, w: &mut dyn Write) -> Result<FitReport, CliError> {
    let cfg = args.config()?;
    let data = args.load()?;
    let fit = fit_mle(&data, None, &cfg.fit)?;
    let report = fit_report(&data, &fit, &args.schema().covariates);
    emit(w, cfg.format, &report, write_fit_table)?;
    if let Some(path) = &args.out {
        write_json_file(path, &report)?;
    }
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "optimizer did not converge after {} iterations (score norm {:.3e})",
            fit.iterations, fit.score_norm
        )));
    }
    Ok(report)
}

pub fn cmd_estimate(args: &DataArgs, w: &mut dyn Write) -> Result<EstimateReport, CliError> {
    let cfg = args.config()?;
    let data = args.load()?;
    let fit = fit_converged(&data, &cfg)?;
    let (report, curve) = estimate_report(&data, &fit, &cfg)?;
    emit(w, cfg.format, &report, write_estimate_table)?;
    if let Some(path) = &args.out {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        write_curve_csv(BufWriter::new(file), &curve).map_err(|e| io_err(path, e))?;
    }
    Ok(report)
}

pub fn cmd_gof(args: &DataArgs, w: &mut dyn Write) -> Result<GofReport, CliError> {
    let cfg = args.config()?;
    let data = args.load()?;
    let disease = gof_disease(&data, cfg.gof_replicates, cfg.seed)?;
    let fit = fit_converged(&data, &cfg)?;
    let verification = gof_verification(&data, &fit, cfg.gof_replicates, cfg.seed, &cfg.fit)?;
    let report = GofReport {
        replicates: cfg.gof_replicates,
        seed: cfg.seed,
        disease: (&disease).into(),
        verification: (&verification).into(),
        note: GOF_NOTE,
    };
    emit(w, cfg.format, &report, write_gof_table)?;
    if let Some(path) = &args.out {
        write_json_file(path, &report)?;
    }
    Ok(report)
}

impl SimulateArgs {
    pub fn campaign(&self) -> Result<CampaignConfig, CliError> {
        if self.b == 0 {
            return Err(CliError::Input("--B must be at least 1".into()));
        }
        let scenario = Scenario::resolve(&self.scenario)?;
        let mut cfg = CampaignConfig::new(scenario, self.n, self.b, self.seed);
        if !self.methods.is_empty() {
            cfg.methods = self
                .methods
                .iter()
                .map(|m| Method::parse(m))
                .collect::<Result<_, _>>()?;
        }
        if !self.s.is_empty() {
            cfg.s_points = self.s.clone();
        }
        cfg.alpha = self.alpha;
        cfg.truth_n = self.truth_n;
        cfg.ipw_bootstrap = self.ipw_boot;
        cfg.fit = FitOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        };
        Ok(cfg)
    }
}

/// Long-form rows `(method, target, metric, value)` as written to the TSV.
pub fn campaign_rows(report: &McReport) -> Vec<(String, String, String, f64)> {
    let mut rows = Vec::new();
    for m in &report.methods {
        let key = m.method.key().to_string();
        rows.push((key.clone(), "-".into(), "failure_rate".into(), m.failure_rate));
        for t in &m.targets {
            let mut push = |metric: &str, v: f64| {
                rows.push((key.clone(), t.target.clone(), metric.to_string(), v))
            };
            push("truth", t.truth);
            push("mean", t.mean_estimate);
            push("sd", t.sd_estimate);
            push("rb_percent", t.rb_percent);
            push("mse_x1000", t.mse * 1000.0);
            if let Some(cp) = t.cp {
                push("cp", cp);
            }
            if let Some(al) = t.al {
                push("al", al);
            }
            push("replicates_used", t.replicates_used as f64);
        }
    }
    rows
}

pub fn write_campaign_tsv<W: Write>(mut w: W, report: &McReport) -> std::io::Result<()> {
    writeln!(w, "method\ttarget\tmetric\tvalue")?;
    for (m, t, k, v) in campaign_rows(report) {
        writeln!(w, "{m}\t{t}\t{k}\t{v}")?;
    }
    w.flush()
}

pub fn write_campaign_table(w: &mut dyn Write, r: &McReport) -> std::io::Result<()> {
    writeln!(
        w,
        "scenario {}, n = {}, {} replicates, seed {}",
        r.scenario, r.n, r.replicates, r.seed
    )?;
    writeln!(
        w,
        "truth: AUC {:.4}, P(Y=1) {:.4}, P(R=1) {:.4} ({} draws)",
        r.truth.auc, r.truth.p_disease, r.truth.p_verified, r.truth.n_mc
    )?;
    let targets: Vec<String> = r
        .methods
        .first()
        .map(|m| m.targets.iter().map(|t| t.target.clone()).collect())
        .unwrap_or_default();
    for target in &targets {
        writeln!(w)?;
        writeln!(w, "{target}")?;
        writeln!(
            w,
            "{:<16} {:>9} {:>10} {:>7} {:>7} {:>6}",
            "method", "RB(%)", "MSE(x1e3)", "CP", "AL", "fail"
        )?;
        for m in &r.methods {
            let Some(t) = m.targets.iter().find(|t| &t.target == target) else {
                continue;
            };
            writeln!(
                w,
                "{:<16} {:>9.3} {:>10.3} {:>7} {:>7} {:>6}{}",
                m.label,
                t.rb_percent,
                t.mse * 1000.0,
                t.cp.map(|c| format!("{c:.3}")).unwrap_or_else(|| "-".into()),
                t.al.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into()),
                m.failures,
                if m.flagged { " !" } else { "" }
            )?;
        }
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, w: &mut dyn Write) -> Result<McReport, CliError> {
    let cfg = args.campaign()?;
    let report = run_campaign(&cfg)?;
    if let Some(prefix) = &args.out {
        let tsv = prefix.with_extension("tsv");
        let file = File::create(&tsv).map_err(|e| io_err(&tsv, e))?;
        write_campaign_tsv(BufWriter::new(file), &report).map_err(|e| io_err(&tsv, e))?;
        write_json_file(&prefix.with_extension("json"), &report)?;
    }
    emit(w, args.format, &report, write_campaign_table)?;
    Ok(report)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<usize, CliError> {
    let scenario = Scenario::resolve(&args.scenario)?;
    if args.n == 0 {
        return Err(CliError::Input("--n must be positive".into()));
    }
    let sample = simulate_dataset(&scenario, args.n, args.seed);
    let path = &args.out;
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["x", "v1", "v2", "r", "y"];
    if args.with_oracle {
        header.push("y_true");
    }
    out.write_record(&header).map_err(|e| io_err(path, e))?;
    let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for (i, rec) in sample.data.records().enumerate() {
        let mut row = vec![
            rec.x.to_string(),
            rec.v[0].to_string(),
            rec.v[1].to_string(),
            flag(rec.r),
            rec.y.map(flag).unwrap_or_default(),
        ];
        if args.with_oracle {
            row.push(flag(sample.oracle_y[i]));
        }
        out.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))?;
    Ok(args.n)
}

/// Runs one command, writing its report to `w`.
pub fn run(cli: &Cli, w: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, w).map(|_| ()),
        Command::Estimate(a) => cmd_estimate(a, w).map(|_| ()),
        Command::Gof(a) => cmd_gof(a, w).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(a, w).map(|_| ()),
        Command::Generate(a) => {
            let n = cmd_generate(a)?;
            writeln!(w, "wrote {n} records to {}", a.out.display())
                .map_err(|e| CliError::Input(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_transform() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.s_points, vec![0.1, 0.2]);
        assert_eq!(cfg.gof_replicates, 200);
        assert_eq!(cfg.s_grid.len(), 99);
        assert_eq!(parse_transform("30, 15").unwrap(), (30.0, 15.0));
        assert!(parse_transform("1,0").is_err());
        assert!(parse_transform("1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::InvalidDataset("x".into())).exit_code(), 2);
        let nc = Error::NonConvergence {
            iterations: 1,
            score_norm: 1.0,
        };
        assert_eq!(CliError::from(nc).exit_code(), 3);
        assert_eq!(CliError::from(Error::SingularInformation { rcond: 0.0 }).exit_code(), 4);
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "niroc", "estimate", "d.csv", "--covariates", "age,sex", "--s", "0.1", "--s", "0.3",
            "--gof-B", "50", "--format", "structured",
        ])
        .unwrap();
        let Command::Estimate(a) = cli.command else { panic!() };
        assert_eq!(a.covariates, vec!["age", "sex"]);
        let cfg = a.config().unwrap();
        assert_eq!(cfg.s_points, vec![0.1, 0.3]);
        assert_eq!(cfg.gof_replicates, 50);
        assert_eq!(cfg.format, Format::Structured);
    }
}
