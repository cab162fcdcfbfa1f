//! `finsler-lab`: configurable batch runs over the finsler-core laboratory.
//!
//! Exit codes: 0 pass, 1 check failure, 2 usage or config error,
//! 3 numerical-integrity error.

pub mod config;
pub mod output;
pub mod reports;
pub mod suite;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use finsler_core::metric_zoo::{MetricParams, MetricSpec};
use thiserror::Error;

use config::RunConfig;
use suite::Status;

pub const DEFAULT_MC_SAMPLES: usize = 400_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] finsler_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use finsler_core::Error as E;
        match self {
            CliError::Core(E::NumericalIntegrity(_) | E::OracleFailure(_) | E::Integration { .. }) => 3,
            CliError::Core(E::MetricValidity { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "finsler-lab", version, about = "Finsler geometry laboratory: identity checks and report tables")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $FINSLER_LAB_OUT, then ./finsler-lab-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    #[arg(long, global = true)]
    pub metric: Option<String>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// `ball` or `quartic:<eps>` for Funk and Hilbert.
    #[arg(long, global = true)]
    pub domain: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Randers alpha: euclidean, sphere or hyperbolic.
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub mc_samples: Option<usize>,
    /// Tolerance override `check-id=value`; repeatable.
    #[arg(long = "tol", global = true, value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected check-id=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|e| format!("tolerance `{v}`: {e}"))?;
    Ok((k.to_string(), v))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the metric's Minkowski-functional conditions on samples.
    Validate,
    /// Run the identity suite for the metric.
    Verify,
    /// Riemann curvature report over seeded tangent samples.
    Curvature,
    /// Geodesic path table.
    Geodesic {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dir: Option<Vec<f64>>,
        #[arg(long = "t")]
        t_end: Option<f64>,
        #[arg(long)]
        t_samples: Option<usize>,
    },
    /// Metric-ball volume table against a model volume.
    Volume {
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
    },
    /// Volume-ratio monotonicity and conjugate-point reports.
    Compare {
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
    },
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let c = &self.common;
        let mut flags = RunConfig {
            metric: c.metric.clone(),
            params: MetricParams {
                dim: c.dim,
                eps: c.eps,
                domain: c.domain.clone(),
                alpha: c.alpha.clone(),
                beta: c.beta.clone(),
                beta_linear: None,
            },
            samples: c.samples,
            seed: c.seed,
            mc_samples: c.mc_samples,
            tolerances: c.tol.iter().cloned().collect(),
            out_dir: self.out.clone(),
            ..RunConfig::default()
        };
        match &self.command {
            Command::Geodesic {
                from,
                dir,
                t_end,
                t_samples,
            } => {
                flags.from = from.clone();
                flags.dir = dir.clone();
                flags.t_end = *t_end;
                flags.t_samples = *t_samples;
            }
            Command::Volume {
                radii,
                center,
                lambda,
                delta,
            }
            | Command::Compare {
                radii,
                center,
                lambda,
                delta,
            } => {
                flags.radii = radii.clone();
                flags.center = center.clone();
                flags.lambda = *lambda;
                flags.delta = *delta;
            }
            _ => {}
        }
        let mut cfg = base.overlay(flags);
        self.fill_defaults(&mut cfg);
        Ok(cfg)
    }

    /// Writes the defaults a command would use into `cfg`, so the embedded
    /// config describes the run completely.
    fn fill_defaults(&self, cfg: &mut RunConfig) {
        if cfg.params.dim.is_none() {
            if let Some(m) = cfg.metric.as_deref().and_then(|id| MetricSpec::from_id(id, &cfg.params).ok()) {
                cfg.params.dim = Some(m.dim());
            }
        }
        cfg.seed.get_or_insert(1);
        let samples = if matches!(self.command, Command::Validate) { 100 } else { 20 };
        cfg.samples.get_or_insert(samples);
        match self.command {
            Command::Verify => {
                cfg.mc_samples.get_or_insert(DEFAULT_MC_SAMPLES);
            }
            Command::Geodesic { .. } => {
                cfg.t_end.get_or_insert(1.0);
                cfg.t_samples.get_or_insert(50);
            }
            Command::Volume { .. } | Command::Compare { .. } => {
                cfg.mc_samples.get_or_insert(DEFAULT_MC_SAMPLES);
                cfg.radii.get_or_insert_with(|| vec![0.5, 1.0, 2.0]);
                cfg.lambda.get_or_insert(0.0);
                cfg.delta.get_or_insert(0.0);
            }
            _ => {}
        }
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = cli.resolve()?;
    let dir = cfg.resolve_out_dir();
    match &cli.command {
        Command::Validate => {
            let v = reports::validation(&cfg)?;
            let p = output::write_json(&dir, "validate.json", &v)?;
            println!("{}: {} ({})", v.metric, if v.valid { "valid" } else { "invalid" }, p.display());
            if let Some(r) = &v.reason {
                println!("  {r}");
            }
            Ok(if v.valid { 0 } else { 1 })
        }
        Command::Verify => {
            let (report, timings, integrity) = suite::run_verify(&cfg)?;
            output::write_json(&dir, "verify.json", &report)?;
            let mut t = output::Table::new(
                "verify",
                ["id", "anchor", "status", "measured", "expected", "tolerance", "note"].map(String::from).to_vec(),
            );
            for r in &report.rows {
                let status = serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string();
                t.rows.push(vec![
                    r.id.clone(),
                    r.anchor.clone(),
                    status,
                    output::opt(r.measured),
                    output::opt(r.expected),
                    output::num(r.tolerance),
                    r.note.clone().unwrap_or_default(),
                ]);
            }
            output::write_csv(&dir, "verify.csv", &t, &cfg)?;
            output::write_timings(&dir, "verify.timings.csv", &timings)?;
            for r in &report.rows {
                let tag = match r.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Skipped => "SKIP",
                };
                println!("{tag} {:<28} measured={} tol={}", r.id, output::opt(r.measured), r.tolerance);
            }
            println!("{}: {} passed, {} failed, {} skipped", report.metric, report.passed, report.failed, report.skipped);
            Ok(if integrity {
                3
            } else if report.failed > 0 {
                1
            } else {
                0
            })
        }
        Command::Curvature => {
            let t = reports::curvature(&cfg)?;
            let p = output::write_csv(&dir, "curvature.csv", &t, &cfg)?;
            println!("{} rows -> {}", t.rows.len(), p.display());
            Ok(0)
        }
        Command::Geodesic { .. } => {
            let t = reports::geodesic(&cfg)?;
            let p = output::write_csv(&dir, "geodesic.csv", &t, &cfg)?;
            println!("{} rows -> {}", t.rows.len(), p.display());
            Ok(0)
        }
        Command::Volume { .. } => {
            let t = reports::volume(&cfg)?;
            let p = output::write_csv(&dir, "volume.csv", &t, &cfg)?;
            println!("{} rows -> {}", t.rows.len(), p.display());
            Ok(0)
        }
        Command::Compare { .. } => {
            let (t, summary) = reports::compare(&cfg)?;
            output::write_csv(&dir, "compare.csv", &t, &cfg)?;
            let p = output::write_json(&dir, "compare.json", &summary)?;
            println!("ratio status {:?} -> {}", summary.ratio_status, p.display());
            let conj_fail = summary.conjugate.as_ref().is_some_and(|c| c.first_conjugate.is_some() && !c.within_bound);
            let failed = summary.ratio_status == finsler_core::comparison::CheckStatus::Fail || conj_fail;
            Ok(if failed { 1 } else { 0 })
        }
    }
}
