//! Busemann-Hausdorff volumes: regions by Monte-Carlo, metric balls by
//! Monte-Carlo with closed-form distances or by polar quadrature through
//! the Jacobian of `exp`, the Funk ball closed form and the small-ball probe.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature_lab::{bh_density_field, riemann_matrix, s_curvature};
use crate::error::{Error, Result};
use crate::metric_zoo::{funk_distance, hilbert_distance, ConvexDomain, MetricSpec};
use crate::minkowski_lab::{bh_density_value, MeasureMethod};
use crate::ode::{integrate, OdeOptions, Trajectory};
use crate::quadrature::{self, unit_ball_volume, SphereGrid};
use crate::sampling::{stratified_mc, McRegion};
use crate::spray_geodesics::{in_chart, spray_jets};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: Option<u64>,
    pub method: MeasureMethod,
    pub flag: Option<String>,
}

/// `∫_region σ_F dx` by stratified Monte-Carlo over `bounds`.
pub fn bh_volume<I>(metric: &MetricSpec, indicator: I, bounds: &McRegion, n_samples: usize, seed: u64) -> Result<MeasureEstimate>
where
    I: Fn(&[f64]) -> bool + Sync,
{
    if bounds.dim() != metric.dim() {
        return Err(Error::Config(format!(
            "region dimension {} does not match metric dimension {}",
            bounds.dim(),
            metric.dim()
        )));
    }
    let est = stratified_mc(
        |p| {
            if metric.contains(p) && indicator(p) {
                bh_density_value(metric, p).unwrap_or(f64::NAN)
            } else {
                0.0
            }
        },
        bounds,
        n_samples,
        seed,
    );
    if !est.value.is_finite() {
        return Err(Error::NumericalIntegrity("density evaluation failed inside the region".into()));
    }
    Ok(MeasureEstimate {
        value: est.value,
        stderr: est.stderr,
        n_samples: est.n_samples,
        seed: Some(seed),
        method: MeasureMethod::MonteCarlo,
        flag: (est.hits == 0).then(|| "no sample hit the region".to_string()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DistanceSource {
    FunkClosedForm,
    HilbertClosedForm,
    GeodesicPolar,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub source: DistanceSource,
}

fn domain_of(metric: &MetricSpec) -> Result<ConvexDomain> {
    ConvexDomain::parse(metric.dim(), metric.params.domain.as_deref().unwrap_or("ball"))
}

/// Radius of a Euclidean ball about the origin containing the domain.
fn enclosing_radius(domain: &ConvexDomain) -> Result<f64> {
    let grid = SphereGrid::coarse(domain.n)?;
    let origin = vec![0.0; domain.n];
    let mut r: f64 = 0.0;
    for d in &grid.directions {
        r = r.max(domain.exit_param(&origin, d)?);
    }
    Ok(1.02 * r)
}

/// `μ_F(B(x, r))` by Monte-Carlo with an exact distance indicator. The
/// forward Funk ball is `x + (1 - e^{-r})(Ω - x)`; the Hilbert ball lies in
/// the Funk ball of radius `2r`.
pub fn ball_volume_mc(metric: &MetricSpec, ball: &BallSpec, n_samples: usize, seed: u64) -> Result<MeasureEstimate> {
    if !(ball.radius > 0.0) {
        return Err(Error::Config(format!("ball radius {} must be positive", ball.radius)));
    }
    if !metric.contains(&ball.center) {
        return Err(Error::OutsideChart {
            metric: metric.label(),
            point: ball.center.clone(),
        });
    }
    let expected = match ball.source {
        DistanceSource::FunkClosedForm => "funk",
        DistanceSource::HilbertClosedForm => "hilbert",
        DistanceSource::GeodesicPolar => {
            return Err(Error::Config("the polar route is `ball_volume_polar`".into()));
        }
    };
    if metric.id != expected {
        return Err(Error::Config(format!("{:?} distances need a {expected} metric, got {}", ball.source, metric.id)));
    }
    let domain = domain_of(metric)?;
    let k = 1.0
        - (-ball.radius * if ball.source == DistanceSource::HilbertClosedForm { 2.0 } else { 1.0 }).exp();
    let bounds = McRegion::Ball {
        center: ball.center.iter().map(|c| (1.0 - k) * c).collect(),
        radius: k * enclosing_radius(&domain)?,
    };
    let x = &ball.center;
    bh_volume(
        metric,
        |z| {
            let d = match ball.source {
                DistanceSource::FunkClosedForm => funk_distance(&domain, x, z),
                _ => hilbert_distance(&domain, x, z),
            };
            matches!(d, Ok(d) if d < ball.radius)
        },
        &bounds,
        n_samples,
        seed,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolarOptions {
    /// Directions in `S^{n-1}` for the angular integral.
    pub directions: usize,
    pub rtol: f64,
}

impl PolarOptions {
    pub fn for_dim(n: usize) -> Self {
        PolarOptions {
            directions: if n == 2 { 128 } else { 24 },
            rtol: 1e-12,
        }
    }

    fn grid(&self, n: usize) -> Result<SphereGrid> {
        match n {
            2 => Ok(SphereGrid::circle(self.directions)),
            3 => Ok(SphereGrid::sphere(self.directions, 2 * self.directions)),
            _ => Err(Error::Config(format!("polar quadrature implemented for n = 2, 3 (got {n})"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolarVolumes {
    pub radii: Vec<f64>,
    /// `μ_F(B(x, r))` at each radius.
    pub volumes: Vec<f64>,
    /// Sphere measure `ν_F(S(x, r))`, the radial integrand at each radius.
    pub sphere_measure: Vec<f64>,
    /// Difference against the same rule on every other direction.
    pub quadrature_error: Vec<f64>,
    /// Set when `det D exp` stops being positive: the volumes are then
    /// only lower bounds.
    pub beyond_injectivity: bool,
}

/// Geodesic from `x` with initial velocity `u` together with the Jacobi
/// fields `J_k(0) = 0, J_k'(0) = e_k` and the running integral of
/// `σ(c(t)) det J(t) / t` (last state component). Stops at a chart exit.
pub(crate) fn jacobian_flow(metric: &MetricSpec, x: &[f64], u: &[f64], times: &[f64], rtol: f64) -> Result<Trajectory> {
    let n = metric.dim();
    let q = 2 * n + 2 * n * n;
    let mut s0 = x.to_vec();
    s0.extend_from_slice(u);
    for k in 0..n {
        s0.extend(std::iter::repeat_n(0.0, n));
        s0.extend((0..n).map(|i| if i == k { 1.0 } else { 0.0 }));
    }
    s0.push(0.0);
    let rhs = |t: f64, s: &[f64], d: &mut [f64]| -> Result<()> {
        let gj = spray_jets(metric, &s[..n], &s[n..2 * n], 1, 1)?;
        d[..n].copy_from_slice(&s[n..2 * n]);
        for i in 0..n {
            d[n + i] = -2.0 * gj[i].value();
        }
        let mut gx = vec![vec![0.0; n]; n];
        let mut nm = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                gx[i][k] = gj[i].mixed(&[k], &[])?;
                nm[i][k] = gj[i].dy(&[k])?;
            }
        }
        for k in 0..n {
            let base = 2 * n + 2 * n * k;
            let (dx, dv) = (&s[base..base + n], &s[base + n..base + 2 * n]);
            for i in 0..n {
                d[base + i] = dv[i];
                d[base + n + i] = -2.0 * (0..n).map(|j| gx[i][j] * dx[j] + nm[i][j] * dv[j]).sum::<f64>();
            }
        }
        d[q] = radial_density(metric, t, s)?;
        Ok(())
    };
    let opts = OdeOptions {
        rtol,
        atol: rtol,
        ..OdeOptions::default()
    };
    integrate(rhs, 0.0, &s0, times, &opts, |s| in_chart(metric, &s[..n]))
}

/// `J(t)` from a [`jacobian_flow`] state, column `k` the field with `J_k'(0) = e_k`.
pub(crate) fn jacobian_of(n: usize, s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, k| s[2 * n + 2 * n * k + i])
}

fn radial_density(metric: &MetricSpec, t: f64, s: &[f64]) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let n = metric.dim();
    Ok(bh_density_value(metric, &s[..n])? * jacobian_of(n, s).determinant() / t)
}

/// `(∫_0^r σ det J / t dt, σ det J / r)` at each radius for unit initial velocity `u`.
fn polar_integrand(metric: &MetricSpec, x: &[f64], u: &[f64], radii: &[f64], rtol: f64) -> Result<Vec<(f64, f64)>> {
    let q = 2 * x.len() + 2 * x.len() * x.len();
    let traj = jacobian_flow(metric, x, u, radii, rtol)?;
    if traj.outputs.len() < radii.len() {
        return Err(Error::Range {
            exit_t: traj.exit.unwrap_or(f64::NAN),
            requested: *radii.last().unwrap_or(&0.0),
        });
    }
    traj.outputs.iter().map(|(t, s)| Ok((s[q], radial_density(metric, *t, s)?))).collect()
}

/// `μ_F(B(x, r)) = ∫_θ F(x,θ)^{-n} ∫_0^r σ(c(t)) det J(t) / t dt dθ` at
/// every radius in `radii` (ascending).
pub fn ball_volume_polar(metric: &MetricSpec, x: &[f64], radii: &[f64], opts: &PolarOptions) -> Result<PolarVolumes> {
    let n = metric.dim();
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("radii must be positive and increasing".into()));
    }
    let grid = opts.grid(n)?;
    let per_direction: Vec<Result<(Vec<f64>, Vec<f64>)>> = grid
        .directions
        .par_iter()
        .map(|theta| {
            let f = metric.f(x, theta)?;
            let u: Vec<f64> = theta.iter().map(|a| a / f).collect();
            let vals = polar_integrand(metric, x, &u, radii, opts.rtol)?;
            let scale = f.powi(-(n as i32));
            Ok(vals.iter().map(|(v, nu)| (scale * v, scale * nu)).unzip())
        })
        .collect();
    let mut volumes = vec![0.0; radii.len()];
    let mut coarse = vec![0.0; radii.len()];
    let mut sphere_measure = vec![0.0; radii.len()];
    let mut beyond_injectivity = false;
    for (idx, (res, w)) in per_direction.into_iter().zip(&grid.weights).enumerate() {
        let (cum, nu) = res?;
        for k in 0..radii.len() {
            volumes[k] += w * cum[k];
            if idx % 2 == 0 {
                coarse[k] += 2.0 * w * cum[k];
            }
            sphere_measure[k] += w * nu[k];
            if nu[k] <= 0.0 {
                beyond_injectivity = true;
            }
        }
    }
    Ok(PolarVolumes {
        radii: radii.to_vec(),
        quadrature_error: volumes.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).collect(),
        volumes,
        sphere_measure,
        beyond_injectivity,
    })
}

/// `n 2ⁿ Vol(Bⁿ) ∫_0^{r/2} e^{-(n+1)t} sinhⁿ⁻¹(t) dt`, the BH volume of any
/// forward Funk ball of radius `r`.
pub fn funk_ball_formula(n: usize, r: f64) -> Result<f64> {
    if n < 2 || !(r > 0.0) {
        return Err(Error::Config(format!("funk_ball_formula needs n ≥ 2 and r > 0 (got {n}, {r})")));
    }
    let (v, _) = quadrature::integrate(
        |t| (-(n as f64 + 1.0) * t).exp() * t.sinh().powi(n as i32 - 1),
        0.0,
        0.5 * r,
        1e-14,
    )?;
    Ok(n as f64 * 2f64.powi(n as i32) * unit_ball_volume(n) * v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallBallProbe {
    pub eps: Vec<f64>,
    /// `μ_F(B(x, ε)) / (Vol(Bⁿ) εⁿ)`.
    pub ratios: Vec<f64>,
    /// Fit of `(ratio - 1)/ε² = c₂ + c₃ε + c₄ε²`.
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `(n+2)/(n Vol(Bⁿ)) ∫_{B_x} {Ric + 3n(Ṡ - S²)} dμ_x`.
    pub r_x: f64,
    /// `-r(x) / (6(n+2))`.
    pub r_coefficient: f64,
    /// `-(1/(6 Vol(Bⁿ))) ∫_{B_x} Ric dμ_x`, the coefficient for
    /// metrics with vanishing S-curvature.
    pub ricci_coefficient: f64,
    pub nonreversible: bool,
}

/// Fits the second-order coefficient of the small-ball expansion at `x`
/// from polar volumes over `eps_grid ⊂ (0, 0.1]`. The expansion is stated
/// for reversible metrics; others are refused unless `allow_nonreversible`.
pub fn small_ball_probe(metric: &MetricSpec, x: &[f64], eps_grid: &[f64], allow_nonreversible: bool) -> Result<SmallBallProbe> {
    let n = metric.dim();
    if !metric.reversible() && !allow_nonreversible {
        return Err(Error::Precondition(format!("{} is not reversible", metric.label())));
    }
    let mut eps = eps_grid.to_vec();
    eps.sort_by(f64::total_cmp);
    if eps.len() < 4 || eps[0] <= 0.0 || *eps.last().unwrap() > 0.1 || eps.last().unwrap() / eps[0] < 2.0 {
        return Err(Error::Config("eps grid needs ≥ 4 values in (0, 0.1] spanning a factor ≥ 2".into()));
    }
    let pv = ball_volume_polar(metric, x, &eps, &PolarOptions::for_dim(n))?;
    let vb = unit_ball_volume(n);
    let ratios: Vec<f64> = pv.volumes.iter().zip(&eps).map(|(v, e)| v / (vb * e.powi(n as i32))).collect();
    let a = DMatrix::from_fn(eps.len(), 3, |i, j| eps[i].powi(j as i32));
    let b = DVector::from_iterator(eps.len(), ratios.iter().zip(&eps).map(|(r, e)| (r - 1.0) / (e * e)));
    let c = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::NumericalIntegrity(format!("small-ball fit failed: {e}")))?;
    // unit-ball integrals of 2-homogeneous h: ∫_θ h(θ) F(θ)^{-(n+2)} dθ / (n+2)
    let grid = PolarOptions::for_dim(n).grid(n)?;
    let sigma = bh_density_value(metric, x)?;
    let density = bh_density_field(metric);
    let terms: Vec<Result<(f64, f64)>> = grid
        .directions
        .par_iter()
        .map(|theta| {
            let f = metric.f(x, theta)?;
            let ric = riemann_matrix(metric, x, theta)?.trace();
            let s = s_curvature(metric, x, theta, &density)?;
            let w = f.powi(-(n as i32 + 2));
            Ok((ric * w, (ric + 3.0 * n as f64 * (s.s_dot - s.s * s.s)) * w))
        })
        .collect();
    let (mut ric_int, mut h_int) = (0.0, 0.0);
    for (t, w) in terms.into_iter().zip(&grid.weights) {
        let (a, b) = t?;
        ric_int += w * a;
        h_int += w * b;
    }
    let nf = n as f64;
    let r_x = sigma * h_int / (nf * vb);
    Ok(SmallBallProbe {
        eps,
        ratios,
        c2: c[0],
        c3: c[1],
        c4: c[2],
        r_x,
        r_coefficient: -r_x / (6.0 * (nf + 2.0)),
        ricci_coefficient: -sigma * ric_int / ((nf + 2.0) * 6.0 * vb),
        nonreversible: !metric.reversible(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_zoo::MetricParams;

    fn metric(id: &str, n: usize) -> MetricSpec {
        MetricSpec::from_id(
            id,
            &MetricParams {
                dim: Some(n),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn funk_formula_values() {
        let v = funk_ball_formula(2, 1.0).unwrap();
        let exact = 8.0 * std::f64::consts::PI * (0.25 * (1.0 - (-1f64).exp()) - 0.125 * (1.0 - (-2f64).exp()));
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        // equals the Euclidean area of the homothetic image (1 - 1/e)Ω
        assert!((v - std::f64::consts::PI * (1.0 - (-1f64).exp()).powi(2)).abs() < 1e-12);
        assert!((funk_ball_formula(2, 40.0).unwrap() - std::f64::consts::PI).abs() < 1e-6);
        // the ratio to the Euclidean ball is 1 - nr/2 + O(r²)
        for (n, r) in [(2, 1e-4), (3, 1e-4)] {
            let ratio = funk_ball_formula(n, r).unwrap() / (unit_ball_volume(n) * r.powi(n as i32));
            assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
        }
        assert!(funk_ball_formula(1, 1.0).is_err());
    }

    #[test]
    fn euclidean_volumes() {
        let e = metric("euclidean", 2);
        let sq = bh_volume(
            &e,
            |_| true,
            &McRegion::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            10_000,
            1,
        )
        .unwrap();
        assert!((sq.value - 1.0).abs() < 1e-12);
        let pv = ball_volume_polar(&e, &[0.2, 0.1], &[0.5, 1.0], &PolarOptions::for_dim(2)).unwrap();
        assert!((pv.volumes[1] - std::f64::consts::PI).abs() < 1e-10);
        assert!((pv.sphere_measure[1] - 2.0 * std::f64::consts::PI).abs() < 1e-10);
        assert!(!pv.beyond_injectivity);
    }

    #[test]
    fn funk_ball_mc_matches_formula() {
        let f = metric("funk", 2);
        let exact = funk_ball_formula(2, 1.0).unwrap();
        for c in [[0.0, 0.0], [0.3, 0.0]] {
            let ball = BallSpec {
                center: c.to_vec(),
                radius: 1.0,
                source: DistanceSource::FunkClosedForm,
            };
            let est = ball_volume_mc(&f, &ball, 200_000, 3).unwrap();
            assert!((est.value - exact).abs() < 3.0 * est.stderr.max(1e-4), "{est:?} vs {exact}");
        }
    }

    #[test]
    fn funk_polar_matches_formula() {
        let f = metric("funk", 2);
        let pv = ball_volume_polar(&f, &[0.3, 0.0], &[0.5, 1.0], &PolarOptions::for_dim(2)).unwrap();
        for (r, v) in pv.radii.iter().zip(&pv.volumes) {
            let exact = funk_ball_formula(2, *r).unwrap();
            assert!((v - exact).abs() < 1e-6 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn sphere_small_ball_coefficient() {
        let s = metric("sphere", 2);
        let p = small_ball_probe(&s, &[0.3, 0.1], &[0.02, 0.04, 0.06, 0.08, 0.1], false).unwrap();
        assert!((p.c2 + 1.0 / 12.0).abs() < 1e-4, "{p:?}");
        assert!((p.ricci_coefficient + 1.0 / 12.0).abs() < 1e-8);
        assert!(small_ball_probe(&metric("funk", 2), &[0.0, 0.0], &[0.02, 0.04, 0.06, 0.08], false).is_err());
    }
}
