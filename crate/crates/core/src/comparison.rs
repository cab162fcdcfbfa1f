//! Model volumes `V_{λ,δ}`, volume-ratio monotonicity against them and the
//! conjugate-point bound under a positive Ricci bound.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::curvature_lab::{bh_density_field, riemann_curvature, s_curvature};
use crate::error::{Error, Result};
use crate::measures::{
    ball_volume_mc, ball_volume_polar, jacobian_flow, jacobian_of, BallSpec, DistanceSource, PolarOptions,
};
use crate::metric_zoo::MetricSpec;
use crate::quadrature::{self, unit_sphere_area};
use crate::sampling::tangent_samples;

/// Solution of `s'' + λ s = 0`, `s(0) = 0`, `s'(0) = 1`.
pub fn s_lambda(lambda: f64, t: f64) -> f64 {
    if lambda > 0.0 {
        let k = lambda.sqrt();
        (k * t).sin() / k
    } else if lambda < 0.0 {
        let k = (-lambda).sqrt();
        (k * t).sinh() / k
    } else {
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelVolume {
    pub lambda: f64,
    pub delta: f64,
    pub n: usize,
}

impl ModelVolume {
    pub fn new(lambda: f64, delta: f64, n: usize) -> Result<Self> {
        if n < 2 || !lambda.is_finite() || !delta.is_finite() {
            return Err(Error::Config(format!("model volume needs n ≥ 2 and finite λ, δ (got {n}, {lambda}, {delta})")));
        }
        Ok(ModelVolume { lambda, delta, n })
    }

    /// First zero `π/√λ` of `s_λ`, if any.
    pub fn max_radius(&self) -> Option<f64> {
        (self.lambda > 0.0).then(|| PI / self.lambda.sqrt())
    }

    fn check(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) {
            return Err(Error::Config(format!("radius {r} must be nonnegative")));
        }
        match self.max_radius() {
            Some(m) if r > m * (1.0 + 1e-14) => Err(Error::Precondition(format!(
                "radius {r} beyond the first zero π/√λ = {m} of s_λ"
            ))),
            _ => Ok(()),
        }
    }

    fn integrand(&self, t: f64) -> f64 {
        unit_sphere_area(self.n) * ((-self.delta * t).exp() * s_lambda(self.lambda, t)).powi(self.n as i32 - 1)
    }

    /// `V'(r) = Vol(S^{n-1}) [e^{-δr} s_λ(r)]^{n-1}`.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.integrand(r))
    }

    pub fn volume(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        let (v, _) = quadrature::integrate(|t| self.integrand(t), 0.0, r, 1e-14)?;
        Ok(v)
    }
}

pub fn model_volume(lambda: f64, delta: f64, n: usize, r: f64) -> Result<f64> {
    ModelVolume::new(lambda, delta, n)?.volume(r)
}

/// Worst observed values of `Ric/((n-1)F²)` and `S/((n-1)F)` on a sample sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSweep {
    pub samples: usize,
    pub min_ricci: f64,
    pub min_s: Option<f64>,
    pub lambda: f64,
    pub delta: Option<f64>,
    pub holds: bool,
}

/// Slack allowed in the sweep for curvature values that sit exactly on the bound.
pub const SWEEP_TOL: f64 = 1e-6;

/// Samples `Ric/F² ≥ (n-1)λ` and, with `delta`, `S/F ≥ (n-1)δ` (S for the
/// Busemann-Hausdorff density) at `x` and at seeded samples of the zoo region.
pub fn curvature_bound_sweep(
    metric: &MetricSpec,
    x: &[f64],
    lambda: f64,
    delta: Option<f64>,
    count: usize,
    seed: u64,
) -> Result<BoundSweep> {
    let n = metric.dim();
    let nm1 = (n - 1) as f64;
    let density = bh_density_field(metric);
    let mut samples = tangent_samples(metric, count, seed);
    for s in samples.iter_mut().take(n) {
        s.x = x.to_vec();
    }
    let mut min_ricci = f64::INFINITY;
    let mut min_s = delta.map(|_| f64::INFINITY);
    for s in &samples {
        let rep = riemann_curvature(metric, &s.x, &s.y)?;
        min_ricci = min_ricci.min(rep.ricci / (rep.f * rep.f) / nm1);
        if let Some(m) = min_s.as_mut() {
            let sd = s_curvature(metric, &s.x, &s.y, &density)?;
            *m = m.min(sd.s / rep.f / nm1);
        }
    }
    let holds = min_ricci >= lambda - SWEEP_TOL
        && match (min_s, delta) {
            (Some(m), Some(d)) => m >= d - SWEEP_TOL,
            _ => true,
        };
    Ok(BoundSweep {
        samples: samples.len(),
        min_ricci,
        min_s,
        lambda,
        delta,
        holds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VolumeRoute {
    /// Monte-Carlo with the closed-form Funk or Hilbert distance.
    MonteCarlo { samples: usize, seed: u64 },
    /// Polar quadrature through the Jacobian of `exp`.
    Polar,
}

impl VolumeRoute {
    pub fn default_for(metric: &MetricSpec) -> Self {
        if matches!(metric.id.as_str(), "funk" | "hilbert") {
            VolumeRoute::MonteCarlo {
                samples: 400_000,
                seed: 7,
            }
        } else {
            VolumeRoute::Polar
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub r: f64,
    pub volume: f64,
    /// MC standard error or polar quadrature error estimate.
    pub volume_error: f64,
    pub model: f64,
    pub ratio: f64,
    pub ratio_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Tabulated but not asserted (λ or δ negative).
    Reported,
    /// The curvature-bound sweep failed.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub lambda: f64,
    pub delta: f64,
    pub sweep: BoundSweep,
    pub rows: Vec<RatioRow>,
    /// Largest `ratio[k+1] - ratio[k]` minus the combined tolerance.
    pub worst_increase: f64,
    pub status: CheckStatus,
}

/// Number of tangent samples used by the precondition sweep.
pub const SWEEP_SAMPLES: usize = 12;

/// `μ_F(B(x,r)) / V_{λ,δ}(r)` over `r_grid`, asserted non-increasing up to
/// 3σ of the combined errors when `λ, δ ≥ 0`.
pub fn ratio_monotonicity_check(
    metric: &MetricSpec,
    x: &[f64],
    lambda: f64,
    delta: f64,
    r_grid: &[f64],
    route: VolumeRoute,
) -> Result<MonotonicityReport> {
    let n = metric.dim();
    let model = ModelVolume::new(lambda, delta, n)?;
    let sweep = curvature_bound_sweep(metric, x, lambda, Some(delta), SWEEP_SAMPLES, 11)?;
    if !sweep.holds {
        return Ok(MonotonicityReport {
            lambda,
            delta,
            sweep,
            rows: Vec::new(),
            worst_increase: f64::NAN,
            status: CheckStatus::Skipped,
        });
    }
    let measured: Vec<(f64, f64)> = match route {
        VolumeRoute::MonteCarlo { samples, seed } => {
            let source = match metric.id.as_str() {
                "funk" => DistanceSource::FunkClosedForm,
                "hilbert" => DistanceSource::HilbertClosedForm,
                other => return Err(Error::Config(format!("no closed-form distance for `{other}`"))),
            };
            r_grid
                .iter()
                .map(|&r| {
                    let ball = BallSpec {
                        center: x.to_vec(),
                        radius: r,
                        source,
                    };
                    ball_volume_mc(metric, &ball, samples, seed).map(|e| (e.value, e.stderr))
                })
                .collect::<Result<_>>()?
        }
        VolumeRoute::Polar => {
            let pv = ball_volume_polar(metric, x, r_grid, &PolarOptions::for_dim(n))?;
            pv.volumes.into_iter().zip(pv.quadrature_error).collect()
        }
    };
    let mut rows = Vec::with_capacity(r_grid.len());
    for (&r, (volume, err)) in r_grid.iter().zip(measured) {
        let v = model.volume(r)?;
        rows.push(RatioRow {
            r,
            volume,
            volume_error: err,
            model: v,
            ratio: volume / v,
            ratio_error: err / v,
        });
    }
    let worst_increase = rows
        .windows(2)
        .map(|w| (w[1].ratio - w[0].ratio) - 3.0 * (w[0].ratio_error + w[1].ratio_error) - 1e-12)
        .fold(f64::NEG_INFINITY, f64::max);
    let status = if lambda < 0.0 || delta < 0.0 {
        CheckStatus::Reported
    } else if worst_increase <= 0.0 || rows.len() < 2 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(MonotonicityReport {
        lambda,
        delta,
        sweep,
        rows,
        worst_increase,
        status,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugateReport {
    pub bound: f64,
    /// First conjugate parameter along the unit-speed geodesic.
    pub first_conjugate: Option<f64>,
    pub within_bound: bool,
    /// Set when the geodesic left the chart or reached the search limit
    /// without a conjugate point.
    pub inconclusive: Option<String>,
}

/// Search window past `π/√λ`, as a fraction of the bound.
const CONJUGATE_SEARCH: f64 = 0.25;
const CONJUGATE_STEPS: usize = 400;

/// First `t > 0` where some Jacobi field with `J(0) = 0` vanishes again
/// along the unit-speed geodesic from `x` in direction `y`.
pub fn conjugate_point_bound(metric: &MetricSpec, x: &[f64], y: &[f64], lambda: f64) -> Result<ConjugateReport> {
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!("conjugate-point bound needs λ > 0 (got {lambda})")));
    }
    let sweep = curvature_bound_sweep(metric, x, lambda, None, SWEEP_SAMPLES, 13)?;
    if !sweep.holds {
        return Err(Error::Precondition(format!(
            "Ric/((n-1)F²) reaches {:.6} below λ = {lambda}",
            sweep.min_ricci
        )));
    }
    let n = metric.dim();
    let f = metric.f(x, y)?;
    let u: Vec<f64> = y.iter().map(|v| v / f).collect();
    let bound = PI / lambda.sqrt();
    let t_max = bound * (1.0 + CONJUGATE_SEARCH);
    let times: Vec<f64> = (1..=CONJUGATE_STEPS).map(|k| t_max * k as f64 / CONJUGATE_STEPS as f64).collect();
    let traj = jacobian_flow(metric, x, &u, &times, 1e-12)?;
    let js: Vec<(f64, DMatrix<f64>)> = traj.outputs.iter().map(|(t, s)| (*t, jacobian_of(n, s) / *t)).collect();
    // J(t)/t starts at the identity; a conjugate point is a zero singular value
    let smin: Vec<f64> = js.iter().map(|(_, j)| j.singular_values().min()).collect();
    let mut found = None;
    for k in 1..js.len().saturating_sub(1) {
        if smin[k] <= smin[k - 1] && smin[k] <= smin[k + 1] && smin[k] < 0.05 {
            found = Some(refine_zero(&js[k - 1..=k + 1]));
            break;
        }
    }
    let inconclusive = match (found, traj.exit) {
        (Some(_), _) => None,
        (None, Some(t)) => Some(format!("geodesic left the chart at t = {t}")),
        (None, None) => Some(format!("no conjugate point up to t = {t_max}")),
    };
    Ok(ConjugateReport {
        bound,
        first_conjugate: found,
        within_bound: found.is_some_and(|t| t <= bound + 1e-3),
        inconclusive,
    })
}

/// Root of `aᵀ J(t) c` through three samples, with `a`, `c` the singular
/// vectors of the middle sample's smallest singular value.
fn refine_zero(three: &[(f64, DMatrix<f64>)]) -> f64 {
    let svd = three[1].1.clone().svd(true, true);
    let k = svd.singular_values.imin();
    let a = svd.u.as_ref().expect("u requested").column(k).into_owned();
    let c = svd.v_t.as_ref().expect("v_t requested").row(k).transpose();
    let t: Vec<f64> = three.iter().map(|(t, _)| *t).collect();
    let p: Vec<f64> = three.iter().map(|(_, j)| a.dot(&(j * &c))).collect();
    // Newton form of the interpolating quadratic
    let d1 = (p[1] - p[0]) / (t[1] - t[0]);
    let d2 = ((p[2] - p[1]) / (t[2] - t[1]) - d1) / (t[2] - t[0]);
    let b = d1 - d2 * (t[0] + t[1]);
    let c0 = p[0] - d1 * t[0] + d2 * t[0] * t[1];
    if d2.abs() < 1e-14 {
        return -c0 / b;
    }
    let disc = (b * b - 4.0 * d2 * c0).max(0.0).sqrt();
    let r1 = (-b + disc) / (2.0 * d2);
    let r2 = (-b - disc) / (2.0 * d2);
    if (r1 - t[1]).abs() < (r2 - t[1]).abs() {
        r1
    } else {
        r2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::funk_ball_formula;
    use crate::metric_zoo::MetricParams;

    #[test]
    fn s_lambda_values() {
        assert!((s_lambda(1.0, PI / 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(s_lambda(0.0, 0.7), 0.7);
        assert!((s_lambda(-1.0, 1.0) - 1.175_201_193_643_801_4).abs() < 1e-15);
        // s'' + λ s = 0 by central differences
        for lambda in [-0.25, 0.0, 2.0] {
            let h = 1e-4;
            let t = 0.9;
            let dd = (s_lambda(lambda, t + h) - 2.0 * s_lambda(lambda, t) + s_lambda(lambda, t - h)) / (h * h);
            assert!((dd + lambda * s_lambda(lambda, t)).abs() < 1e-6);
        }
    }

    #[test]
    fn model_volume_closed_forms() {
        for n in 2..=4 {
            let v = model_volume(0.0, 0.0, n, 1.3).unwrap();
            assert!((v - quadrature::unit_ball_volume(n) * 1.3f64.powi(n as i32)).abs() < 1e-12);
        }
        assert!((model_volume(1.0, 0.0, 2, PI).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!(matches!(model_volume(1.0, 0.0, 2, 3.2), Err(Error::Precondition(_))));
    }

    #[test]
    fn model_derivative_matches_volume() {
        let m = ModelVolume::new(-0.25, 0.75, 3).unwrap();
        for r in [0.3, 1.0, 2.5] {
            let h = 1e-3;
            let fd = (m.volume(r + h).unwrap() - m.volume(r - h).unwrap()) / (2.0 * h);
            let half = (m.volume(r + h / 2.0).unwrap() - m.volume(r - h / 2.0).unwrap()) / h;
            let rich = (4.0 * half - fd) / 3.0;
            assert!((rich - m.derivative(r).unwrap()).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn funk_model_equality() {
        for n in [2usize, 3] {
            let delta = (n + 1) as f64 / (2.0 * (n - 1) as f64);
            for k in 1..=20 {
                let r = 0.25 * k as f64;
                let v = model_volume(-0.25, delta, n, r).unwrap();
                let f = funk_ball_formula(n, r).unwrap();
                assert!((v - f).abs() < 1e-8, "n = {n}, r = {r}: {v} vs {f}");
            }
        }
    }

    #[test]
    fn sweep_guard_skips_violating_metric() {
        // the hyperbolic plane has Ric/F² = -1 < λ = 0
        let m = MetricSpec::from_id("hyperbolic", &MetricParams::default()).unwrap();
        let rep = ratio_monotonicity_check(&m, &[0.0, 0.0], 0.0, 0.0, &[0.5, 1.0], VolumeRoute::Polar).unwrap();
        assert_eq!(rep.status, CheckStatus::Skipped);
        assert!(rep.rows.is_empty());
        assert!((rep.sweep.min_ricci + 1.0).abs() < 1e-6);
    }

    #[test]
    fn euclidean_ratio_is_one() {
        let m = MetricSpec::from_id("euclidean", &MetricParams::default()).unwrap();
        let rep = ratio_monotonicity_check(&m, &[0.2, 0.1], 0.0, 0.0, &[0.5, 1.0, 2.0], VolumeRoute::Polar).unwrap();
        assert_eq!(rep.status, CheckStatus::Pass);
        for row in &rep.rows {
            assert!((row.ratio - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_ratio_non_increasing() {
        let m = MetricSpec::from_id("sphere", &MetricParams::default()).unwrap();
        let grid = [0.5, 1.0, 1.5, 2.0, 2.5];
        let rep = ratio_monotonicity_check(&m, &[0.0, 0.0], 1.0, 0.0, &grid, VolumeRoute::Polar).unwrap();
        assert_eq!(rep.status, CheckStatus::Pass);
        for row in &rep.rows {
            assert!((row.ratio - 1.0).abs() < 1e-8, "{row:?}");
        }
    }

    #[test]
    fn sphere_conjugate_point() {
        let m = MetricSpec::from_id("sphere", &MetricParams::default()).unwrap();
        for y in [[0.0, 1.0], [0.0, 7.0], [0.6, -0.8]] {
            let rep = conjugate_point_bound(&m, &[0.5, 0.0], &y, 1.0).unwrap();
            let t = rep.first_conjugate.unwrap();
            assert!((t - PI).abs() < 1e-3, "{y:?}: {t}");
            assert!(rep.within_bound);
        }
        let s3 = MetricSpec::from_id("sphere", &MetricParams { dim: Some(3), ..Default::default() }).unwrap();
        let rep = conjugate_point_bound(&s3, &[0.5, 0.0, 0.1], &[0.0, 1.0, 0.0], 1.0).unwrap();
        assert!((rep.first_conjugate.unwrap() - PI).abs() < 1e-3);
    }

    #[test]
    fn conjugate_precondition_rejects_flat() {
        let m = MetricSpec::from_id("euclidean", &MetricParams::default()).unwrap();
        assert!(matches!(conjugate_point_bound(&m, &[0.0, 0.0], &[1.0, 0.0], 0.5), Err(Error::Precondition(_))));
        assert!(matches!(conjugate_point_bound(&m, &[0.0, 0.0], &[1.0, 0.0], 0.0), Err(Error::Precondition(_))));
    }
}
