//! Run configuration: JSON file, then command-line overrides, then defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use finsler_core::metric_zoo::MetricParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "FINSLER_LAB_OUT";
pub const DEFAULT_OUT: &str = "finsler-lab-out";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    pub params: MetricParams,
    /// Tangent samples per check or report.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    /// Per-check tolerance overrides keyed by check id.
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`; tolerance maps merge.
    pub fn overlay(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f; })*};
        }
        take!(metric, samples, seed, mc_samples, out_dir, radii, center, from, dir, t_end, t_samples, lambda, delta);
        let p = other.params;
        macro_rules! take_param {
            ($($f:ident),*) => {$(if p.$f.is_some() { self.params.$f = p.$f; })*};
        }
        take_param!(dim, eps, domain, alpha, beta, beta_linear);
        self.tolerances.extend(other.tolerances);
        self
    }

    pub fn metric_id(&self) -> Result<&str, CliError> {
        self.metric
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("no metric given; available: {}", finsler_core::metric_zoo::CATALOG.join(", "))))
    }

    pub fn samples_or(&self, d: usize) -> usize {
        self.samples.unwrap_or(d)
    }

    pub fn seed_or(&self, d: u64) -> u64 {
        self.seed.unwrap_or(d)
    }

    /// Output directory: explicit setting, then the environment, then the default.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// The copy embedded in outputs: everything except where they were written.
    pub fn embedded(&self) -> RunConfig {
        RunConfig {
            out_dir: None,
            ..self.clone()
        }
    }
}
