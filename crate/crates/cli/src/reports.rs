//! Table-producing subcommands: curvature, geodesic, volume, compare.

use finsler_core::comparison::{conjugate_point_bound, ratio_monotonicity_check, CheckStatus, ModelVolume, VolumeRoute};
use finsler_core::curvature_lab::riemann_curvature;
use finsler_core::measures::{ball_volume_mc, ball_volume_polar, funk_ball_formula, BallSpec, DistanceSource, PolarOptions};
use finsler_core::metric_zoo::{validate, MetricSpec};
use finsler_core::sampling::tangent_samples;
use finsler_core::spray_geodesics::{integrate_geodesic, GeodesicOptions};
use finsler_core::Error;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, opt, Table};
use crate::CliError;

fn metric(cfg: &RunConfig) -> Result<MetricSpec, CliError> {
    Ok(MetricSpec::from_id(cfg.metric_id()?, &cfg.params)?)
}

fn coords(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn point(v: Option<&Vec<f64>>, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    match v {
        Some(p) if p.len() == n => Ok(p.clone()),
        Some(p) => Err(CliError::Usage(format!("--{what} has {} coordinates, metric dimension is {n}", p.len()))),
        None => Ok(vec![0.0; n]),
    }
}

#[derive(Debug, Serialize)]
pub struct Validation {
    pub metric: String,
    pub label: String,
    pub dim: usize,
    pub reversible: bool,
    pub samples: usize,
    pub valid: bool,
    pub reason: Option<String>,
    pub config: RunConfig,
}

pub fn validation(cfg: &RunConfig) -> Result<Validation, CliError> {
    let id = cfg.metric_id()?;
    let samples = cfg.samples_or(100);
    let (m, outcome) = match MetricSpec::from_id(id, &cfg.params) {
        Ok(m) => {
            let v = validate(&m, samples);
            (Some(m), v)
        }
        Err(e @ Error::MetricValidity { .. }) => (None, Err(e)),
        Err(e) => return Err(e.into()),
    };
    let reason = match outcome {
        Ok(()) => None,
        Err(e @ Error::MetricValidity { .. }) => Some(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    Ok(Validation {
        metric: id.to_string(),
        label: m.as_ref().map(|m| m.label()).unwrap_or_default(),
        dim: m.as_ref().map_or(cfg.params.dim.unwrap_or(2), |m| m.dim()),
        reversible: m.as_ref().is_some_and(|m| m.reversible()),
        samples,
        valid: reason.is_none(),
        reason,
        config: cfg.embedded(),
    })
}

/// One row per tangent sample; failures become rows with a status message.
pub fn curvature(cfg: &RunConfig) -> Result<Table, CliError> {
    let m = metric(cfg)?;
    let n = m.dim();
    let mut header = vec!["sample".to_string()];
    header.extend(coords("x", n));
    header.extend(coords("y", n));
    header.push("F".into());
    header.extend((1..n).map(|i| format!("kappa{i}")));
    header.extend(["ricci", "flag_constant", "ry_residual", "self_adjoint_residual", "status"].map(String::from));
    let mut t = Table::new("curvature", header);
    for (k, s) in tangent_samples(&m, cfg.samples_or(20), cfg.seed_or(1)).iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(s.x.iter().chain(&s.y).map(|v| num(*v)));
        match riemann_curvature(&m, &s.x, &s.y) {
            Ok(r) => {
                row.push(num(r.f));
                row.extend(r.principal.iter().map(|v| num(*v)));
                row.extend([num(r.ricci), opt(r.flag_constant), num(r.ry_residual), num(r.self_adjoint_residual), "ok".into()]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), n + 4));
                row.push(e.to_string());
            }
        }
        t.rows.push(row);
    }
    Ok(t)
}

pub fn geodesic(cfg: &RunConfig) -> Result<Table, CliError> {
    let m = metric(cfg)?;
    let n = m.dim();
    let x = point(cfg.from.as_ref(), n, "from")?;
    let y = match &cfg.dir {
        Some(d) if d.len() == n => d.clone(),
        Some(d) => return Err(CliError::Usage(format!("--dir has {} coordinates, metric dimension is {n}", d.len()))),
        None => return Err(CliError::Usage("geodesic needs --dir".into())),
    };
    let t_end = cfg.t_end.unwrap_or(1.0);
    let opts = GeodesicOptions {
        samples: cfg.t_samples.unwrap_or(50),
        ..GeodesicOptions::default()
    };
    let path = integrate_geodesic(&m, &x, &y, t_end, &opts)?;
    let mut header = vec!["t".to_string()];
    header.extend(coords("x", n));
    header.extend(coords("v", n));
    header.extend(["F", "status"].map(String::from));
    let mut t = Table::new("geodesic", header);
    t.notes.push(format!("max_el_residual: {}", num(path.max_el_residual)));
    t.notes.push(format!("speed_drift: {}", num(path.speed_drift)));
    for s in &path.samples {
        let mut row = vec![num(s.t)];
        row.extend(s.x.iter().chain(&s.v).map(|v| num(*v)));
        row.extend([num(s.speed), "ok".into()]);
        t.rows.push(row);
    }
    if let Some(e) = path.exit {
        let mut row = vec![num(e)];
        row.extend(std::iter::repeat_n(String::new(), 2 * n + 1));
        row.push("chart-exit".into());
        t.rows.push(row);
    }
    Ok(t)
}

fn radii(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let r = cfg.radii.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    if r.is_empty() || r.iter().any(|v| !(*v > 0.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("--radii must be positive and increasing".into()));
    }
    Ok(r)
}

/// `(r, μ_F, stderr, method, model V, ratio)`; Funk adds the closed form.
pub fn volume(cfg: &RunConfig) -> Result<Table, CliError> {
    let m = metric(cfg)?;
    let n = m.dim();
    let x = point(cfg.center.as_ref(), n, "center")?;
    let rs = radii(cfg)?;
    let model = ModelVolume::new(cfg.lambda.unwrap_or(0.0), cfg.delta.unwrap_or(0.0), n)?;
    let header = ["r", "volume", "stderr", "method", "model", "ratio", "funk_formula", "status"].map(String::from).to_vec();
    let mut t = Table::new("volume", header);
    t.notes.push(format!("model: lambda = {}, delta = {}", model.lambda, model.delta));
    let source = match m.id.as_str() {
        "funk" => Some(DistanceSource::FunkClosedForm),
        "hilbert" => Some(DistanceSource::HilbertClosedForm),
        _ => None,
    };
    let polar = match source {
        None => Some(ball_volume_polar(&m, &x, &rs, &PolarOptions::for_dim(n))),
        Some(_) => None,
    };
    for (k, &r) in rs.iter().enumerate() {
        let measured = match (source, &polar) {
            (Some(src), _) => {
                let ball = BallSpec {
                    center: x.clone(),
                    radius: r,
                    source: src,
                };
                ball_volume_mc(&m, &ball, cfg.mc_samples.unwrap_or(crate::DEFAULT_MC_SAMPLES), cfg.seed_or(1)).map(|e| (e.value, e.stderr, "monte-carlo"))
            }
            (None, Some(Ok(p))) => Ok((p.volumes[k], p.quadrature_error[k], "polar")),
            (None, Some(Err(e))) => Err(e.clone()),
            (None, None) => unreachable!("polar volumes computed when no closed-form distance exists"),
        };
        let formula = if m.id == "funk" { funk_ball_formula(n, r).ok() } else { None };
        let v = model.volume(r);
        let row = match measured {
            Ok((mu, err, method)) => {
                let (mv, ratio) = match &v {
                    Ok(v) => (num(*v), num(mu / v)),
                    Err(_) => (String::new(), String::new()),
                };
                vec![num(r), num(mu), num(err), method.into(), mv, ratio, opt(formula), "ok".into()]
            }
            Err(e) => vec![num(r), String::new(), String::new(), String::new(), String::new(), String::new(), opt(formula), e.to_string()],
        };
        t.rows.push(row);
    }
    Ok(t)
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub metric: String,
    pub lambda: f64,
    pub delta: f64,
    pub ratio_status: CheckStatus,
    pub worst_increase: f64,
    pub sweep: finsler_core::comparison::BoundSweep,
    /// Start point and direction of the conjugate-point search.
    pub conjugate_from: Option<Vec<f64>>,
    pub conjugate_dir: Option<Vec<f64>>,
    pub conjugate: Option<finsler_core::comparison::ConjugateReport>,
    pub conjugate_note: Option<String>,
    pub config: RunConfig,
}

/// Volume-ratio table plus the conjugate-point report when `λ > 0`.
pub fn compare(cfg: &RunConfig) -> Result<(Table, Comparison), CliError> {
    let m = metric(cfg)?;
    let n = m.dim();
    let x = point(cfg.center.as_ref(), n, "center")?;
    let rs = radii(cfg)?;
    let lambda = cfg.lambda.unwrap_or(0.0);
    let delta = cfg.delta.unwrap_or(0.0);
    let route = match VolumeRoute::default_for(&m) {
        VolumeRoute::MonteCarlo { .. } => VolumeRoute::MonteCarlo {
            samples: cfg.mc_samples.unwrap_or(crate::DEFAULT_MC_SAMPLES),
            seed: cfg.seed_or(1),
        },
        VolumeRoute::Polar => VolumeRoute::Polar,
    };
    let rep = ratio_monotonicity_check(&m, &x, lambda, delta, &rs, route)?;
    let header = ["r", "volume", "volume_error", "model", "ratio", "ratio_error"].map(String::from).to_vec();
    let mut t = Table::new("compare", header);
    t.notes.push(format!("lambda: {lambda}, delta: {delta}, status: {:?}", rep.status));
    for r in &rep.rows {
        t.rows.push(vec![num(r.r), num(r.volume), num(r.volume_error), num(r.model), num(r.ratio), num(r.ratio_error)]);
    }
    let mut y = vec![0.0; n];
    y[1] = 1.0;
    let mut x0 = x.clone();
    x0[0] += 0.5;
    let (conjugate, conjugate_note) = if lambda > 0.0 {
        match conjugate_point_bound(&m, &x0, &y, lambda) {
            Ok(c) => (Some(c), None),
            Err(e @ (Error::Precondition(_) | Error::Range { .. })) => (None, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        }
    } else {
        (None, Some("conjugate-point bound needs λ > 0".into()))
    };
    let searched = lambda > 0.0;
    let summary = Comparison {
        metric: m.id.clone(),
        lambda,
        delta,
        ratio_status: rep.status,
        worst_increase: rep.worst_increase,
        sweep: rep.sweep,
        conjugate_from: searched.then_some(x0),
        conjugate_dir: searched.then_some(y),
        conjugate,
        conjugate_note,
        config: cfg.embedded(),
    };
    Ok((t, summary))
}
