//! Spray coefficients, geodesics, the exponential map, covariant
//! derivatives and parallel transport.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{fd_oracle, lift_xy, FdScheme, Jet, JetSpec};
use crate::linalg;
use crate::metric_zoo::MetricSpec;
use crate::minkowski_lab::fundamental_tensor;
use crate::ode::{integrate, OdeOptions};

/// Jets of `G^i` with base order `ox` and fiber order `oy`, from
/// `G^i = ¼ g^{il} ([F²]_{x^k y^l} y^k - [F²]_{x^l})`.
pub fn spray_jets(metric: &MetricSpec, x: &[f64], y: &[f64], ox: usize, oy: usize) -> Result<Vec<Jet>> {
    let n = metric.dim();
    let spec = JetSpec::new(n, ox + 1, oy + 2)?;
    let f2 = metric.f2_jet(x, y, spec)?;
    let (_, yj) = lift_xy(x, y, spec)?;
    let target = JetSpec::new(n, ox, oy)?;
    let fy: Vec<Jet> = (0..n).map(|l| f2.d_y(l)).collect::<Result<_>>()?;
    let g: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|l| Ok(fy[i].d_y(l)?.truncate(target) * 0.5))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rhs: Vec<Jet> = (0..n)
        .map(|l| {
            let mut acc = -f2.d_x(l)?.truncate(target);
            for k in 0..n {
                acc += &(fy[l].d_x(k)?.truncate(target) * &yj[k]);
            }
            Ok(acc * 0.25)
        })
        .collect::<Result<_>>()?;
    linalg::solve(&g, &rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SprayCoeffs {
    /// `G^i(y)`.
    pub g: Vec<f64>,
    /// `N^i_j = ∂G^i/∂y^j`, row `i`.
    pub n: Vec<Vec<f64>>,
}

pub fn spray_coeffs(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<SprayCoeffs> {
    let dim = metric.dim();
    let gj = spray_jets(metric, x, y, 0, 1)?;
    Ok(SprayCoeffs {
        g: gj.iter().map(|j| j.value()).collect(),
        n: gj
            .iter()
            .map(|j| (0..dim).map(|k| j.dy(&[k])).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?,
    })
}

/// `G^i` only.
pub fn spray(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(spray_jets(metric, x, y, 0, 0)?.iter().map(|j| j.value()).collect())
}

/// `G^i` from the coordinate-derivative form
/// `¼ g^{il} {2 ∂_k g_jl - ∂_l g_jk} y^j y^k`, kept as a cross-check of
/// [`spray_jets`].
pub fn spray_from_fundamental_tensor(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = metric.dim();
    let f2 = metric.f2_jet(x, y, JetSpec::new(n, 1, 2)?)?;
    let dg = |j: usize, l: usize, k: usize| -> Result<f64> { Ok(0.5 * f2.mixed(&[k], &[j, l])?) };
    let g = fundamental_tensor(metric, x, y)?;
    let mut w = vec![0.0; n];
    for (l, wl) in w.iter_mut().enumerate() {
        for j in 0..n {
            for k in 0..n {
                *wl += (2.0 * dg(j, l, k)? - dg(j, k, l)?) * y[j] * y[k];
            }
        }
    }
    Ok(g.raise(&w).iter().map(|v| 0.25 * v).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeodesicOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Rescale the initial velocity to `F = 1`.
    pub unit_speed: bool,
    /// Number of uniform output intervals on `[0, t_end]`.
    pub samples: usize,
    pub max_steps: usize,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            rtol: 1e-10,
            atol: 1e-10,
            unit_speed: false,
            samples: 50,
            max_steps: 200_000,
        }
    }
}

impl GeodesicOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
            ..OdeOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `F(x, ẋ)`.
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|ẍ + 2G(ẋ)|` at interior checkpoints, with `ẍ` from a
    /// fourth-order difference of the integrated velocity.
    pub max_el_residual: f64,
    /// Largest relative change of `F(ẋ)`.
    pub speed_drift: f64,
    pub unit_speed: bool,
    /// Set when integrated backwards (the Funk metric is only forward complete).
    pub reversed: bool,
    /// Parameter where the path left the chart, if it did.
    pub exit: Option<f64>,
}

/// Chart membership plus a bound catching blow-up towards a point the
/// chart leaves out (the stereographic pole).
pub(crate) fn in_chart(metric: &MetricSpec, x: &[f64]) -> bool {
    metric.contains(x) && x.iter().all(|v| v.abs() < CHART_BOUND)
}

const CHART_BOUND: f64 = 1e6;

fn geodesic_rhs(metric: &MetricSpec) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + '_ {
    let n = metric.dim();
    move |_t, s, d| {
        let g = spray(metric, &s[..n], &s[n..])?;
        d[..n].copy_from_slice(&s[n..]);
        for i in 0..n {
            d[n + i] = -2.0 * g[i];
        }
        Ok(())
    }
}

fn initial_velocity(metric: &MetricSpec, x0: &[f64], y0: &[f64], unit_speed: bool) -> Result<Vec<f64>> {
    let f = metric.f(x0, y0)?;
    if !(f > crate::metric_zoo::MIN_F) {
        return Err(Error::Precondition(format!("initial velocity {y0:?} has F = {f:e}")));
    }
    Ok(if unit_speed { y0.iter().map(|v| v / f).collect() } else { y0.to_vec() })
}

/// Integrates `ẍ + 2G(ẋ) = 0` from `(x0, y0)` over `[0, t_end]` (`t_end < 0`
/// integrates backwards and sets `reversed`).
pub fn integrate_geodesic(metric: &MetricSpec, x0: &[f64], y0: &[f64], t_end: f64, opts: &GeodesicOptions) -> Result<GeodesicPath> {
    let n = metric.dim();
    if t_end == 0.0 || !t_end.is_finite() {
        return Err(Error::Config(format!("invalid geodesic length {t_end}")));
    }
    let v0 = initial_velocity(metric, x0, y0, opts.unit_speed)?;
    let m = opts.samples.max(1);
    let dt = t_end / m as f64;
    let delta = (dt.abs() / 5.0).min(1e-2) * t_end.signum();
    // sample times plus a five-point stencil around each interior one
    let mut times = Vec::new();
    for k in 1..=m {
        let t = dt * k as f64;
        if k < m {
            for s in [-2.0, -1.0] {
                times.push(t + s * delta);
            }
            times.push(t);
            for s in [1.0, 2.0] {
                times.push(t + s * delta);
            }
        } else {
            times.push(t);
        }
    }
    let mut s0 = x0.to_vec();
    s0.extend_from_slice(&v0);
    let traj = integrate(geodesic_rhs(metric), 0.0, &s0, &times, &opts.ode(), |s| in_chart(metric, &s[..n]))?;
    let f0 = metric.f(x0, &v0)?;
    let mut samples = vec![GeodesicSample {
        t: 0.0,
        x: x0.to_vec(),
        v: v0.clone(),
        speed: f0,
    }];
    let mut max_el: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let outs = &traj.outputs;
    let mut idx = 0;
    for k in 1..=m {
        let interior = k < m;
        let centre = if interior { idx + 2 } else { idx };
        if centre >= outs.len() {
            break;
        }
        let (t, s) = &outs[centre];
        let speed = metric.f(&s[..n], &s[n..])?;
        drift = drift.max((speed - f0).abs() / f0);
        if interior {
            let g = spray(metric, &s[..n], &s[n..])?;
            let v = |j: usize, i: usize| outs[idx + j].1[n + i];
            for i in 0..n {
                // (v(-2) - 8v(-1) + 8v(1) - v(2)) / 12δ
                let acc = (v(0, i) - 8.0 * v(1, i) + 8.0 * v(3, i) - v(4, i)) / (12.0 * delta);
                max_el = max_el.max((acc + 2.0 * g[i]).abs());
            }
        }
        samples.push(GeodesicSample {
            t: *t,
            x: s[..n].to_vec(),
            v: s[n..].to_vec(),
            speed,
        });
        idx += if interior { 5 } else { 1 };
    }
    Ok(GeodesicPath {
        samples,
        accepted_steps: traj.stats.accepted,
        rejected_steps: traj.stats.rejected,
        max_el_residual: max_el,
        speed_drift: drift,
        unit_speed: opts.unit_speed,
        reversed: t_end < 0.0,
        exit: traj.exit,
    })
}

/// Geodesic states `(x, ẋ)` at arbitrary parameters (either sign) from `(x, y)`.
pub fn geodesic_states(metric: &MetricSpec, x: &[f64], y: &[f64], times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    transported_states(metric, x, y, &[], times).map(|v| v.into_iter().map(|(x, v, _)| (x, v)).collect())
}

/// States `(x, ẋ, frame)` along the geodesic with the frame parallel
/// transported, at arbitrary parameters of either sign.
#[allow(clippy::type_complexity)]
pub fn transported_states(
    metric: &MetricSpec,
    x: &[f64],
    y: &[f64],
    frame: &[Vec<f64>],
    times: &[f64],
) -> Result<Vec<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)>> {
    let n = metric.dim();
    let m = frame.len();
    let mut s0 = x.to_vec();
    s0.extend_from_slice(y);
    for u in frame {
        s0.extend_from_slice(u);
    }
    let rhs = |_t: f64, s: &[f64], d: &mut [f64]| -> Result<()> {
        let (xs, vs) = (&s[..n], &s[n..2 * n]);
        let sc = if m > 0 {
            spray_coeffs(metric, xs, vs)?
        } else {
            SprayCoeffs {
                g: spray(metric, xs, vs)?,
                n: Vec::new(),
            }
        };
        d[..n].copy_from_slice(vs);
        for i in 0..n {
            d[n + i] = -2.0 * sc.g[i];
        }
        for a in 0..m {
            let u = &s[2 * n + a * n..2 * n + (a + 1) * n];
            for i in 0..n {
                d[2 * n + a * n + i] = -(0..n).map(|j| sc.n[i][j] * u[j]).sum::<f64>();
            }
        }
        Ok(())
    };
    let unpack = |s: &[f64]| {
        (
            s[..n].to_vec(),
            s[n..2 * n].to_vec(),
            (0..m).map(|a| s[2 * n + a * n..2 * n + (a + 1) * n].to_vec()).collect(),
        )
    };
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out = vec![None; times.len()];
    let opts = OdeOptions::default();
    let neg: Vec<usize> = order.iter().rev().copied().filter(|&i| times[i] < 0.0).collect();
    let pos: Vec<usize> = order.iter().copied().filter(|&i| times[i] >= 0.0).collect();
    for group in [neg, pos] {
        if group.is_empty() {
            continue;
        }
        let ts: Vec<f64> = group.iter().map(|&i| times[i]).collect();
        let requested = *ts.last().expect("non-empty group");
        let traj = integrate(rhs, 0.0, &s0, &ts, &opts, |s| in_chart(metric, &s[..n]))?;
        if traj.outputs.len() < ts.len() {
            return Err(Error::Range {
                exit_t: traj.exit.unwrap_or(f64::NAN),
                requested,
            });
        }
        for (slot, (_, s)) in group.iter().zip(&traj.outputs) {
            out[*slot] = Some(unpack(s));
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every time filled")).collect())
}

/// `exp_x(y)`: the point reached at `t = 1` by the geodesic with `ċ(0) = y`.
pub fn exp_map(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if y.iter().all(|v| *v == 0.0) {
        return Ok(x.to_vec());
    }
    let n = metric.dim();
    let mut s0 = x.to_vec();
    s0.extend_from_slice(y);
    let traj = integrate(geodesic_rhs(metric), 0.0, &s0, &[1.0], &OdeOptions::default(), |s| {
        in_chart(metric, &s[..n])
    })?;
    match traj.outputs.last() {
        Some((_, s)) => Ok(s[..n].to_vec()),
        None => Err(Error::Range {
            exit_t: traj.exit.unwrap_or(f64::NAN),
            requested: 1.0,
        }),
    }
}

/// `D_y U = dU(y) + N(y) U` for a vector field `U` given as a function of
/// the base point; `dU(y)` by central differences.
pub fn covariant_derivative<U>(metric: &MetricSpec, field: U, x: &[f64], y: &[f64]) -> Result<Vec<f64>>
where
    U: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = metric.dim();
    let u = field(x)?;
    let nm = spray_coeffs(metric, x, y)?.n;
    (0..n)
        .map(|i| {
            let mut du = 0.0;
            for (k, yk) in y.iter().enumerate() {
                let mut a = vec![0; n];
                a[k] = 1;
                let comp = |p: &[f64]| Ok(field(p)?[i]);
                du += yk * fd_oracle(comp, x, &a[..], &[], FdScheme::for_order(1))?.value;
            }
            Ok(du + (0..n).map(|j| nm[i][j] * u[j]).sum::<f64>())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportResult {
    pub frame_in: Vec<Vec<f64>>,
    pub frame_out: Vec<Vec<f64>>,
    /// Largest change of any `g_ċ(U_a, U_b)`.
    pub gram_drift: f64,
    /// Largest relative change of any `F(U_a)`.
    pub norm_drift: f64,
    pub exit: Option<f64>,
}

fn gram(metric: &MetricSpec, x: &[f64], v: &[f64], frame: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let g = fundamental_tensor(metric, x, v)?;
    let m = frame.len();
    Ok(DMatrix::from_fn(m, m, |a, b| g.inner(&frame[a], &frame[b])))
}

/// Parallel transport of `frame` along the geodesic from `(x, y)` over
/// `[0, t_end]`, monitoring the `g_ċ` Gram matrix and the Minkowski norms
/// of the frame at `checkpoints` uniform times.
pub fn parallel_transport(
    metric: &MetricSpec,
    x: &[f64],
    y: &[f64],
    frame: &[Vec<f64>],
    t_end: f64,
    checkpoints: usize,
) -> Result<TransportResult> {
    let times: Vec<f64> = (1..=checkpoints).map(|k| t_end * k as f64 / checkpoints as f64).collect();
    let g0 = gram(metric, x, y, frame)?;
    let norms0: Vec<f64> = frame.iter().map(|u| metric.f(x, u)).collect::<Result<_>>()?;
    let states = transported_states(metric, x, y, frame, &times)?;
    let mut gram_drift: f64 = 0.0;
    let mut norm_drift: f64 = 0.0;
    for (xs, vs, us) in &states {
        let gm = gram(metric, xs, vs, us)?;
        gram_drift = gram_drift.max((gm - &g0).abs().max());
        for (u, f0) in us.iter().zip(&norms0) {
            norm_drift = norm_drift.max((metric.f(xs, u)? - f0).abs() / f0);
        }
    }
    if states.iter().any(|(_, _, us)| us.iter().any(|u| u.iter().any(|c| !c.is_finite()))) {
        return Err(Error::NumericalIntegrity("transported frame became non-finite".into()));
    }
    Ok(TransportResult {
        frame_in: frame.to_vec(),
        frame_out: states.last().map(|s| s.2.clone()).unwrap_or_default(),
        gram_drift,
        norm_drift,
        exit: None,
    })
}

/// Transport along an arbitrary curve `t ↦ (c(t), ċ(t))` by the same
/// equation `U' = -N(ċ) U`.
pub fn transport_along_curve<C>(metric: &MetricSpec, curve: C, frame: &[Vec<f64>], t_end: f64) -> Result<Vec<Vec<f64>>>
where
    C: Fn(f64) -> (Vec<f64>, Vec<f64>),
{
    let n = metric.dim();
    let m = frame.len();
    let s0: Vec<f64> = frame.iter().flatten().copied().collect();
    let rhs = |t: f64, s: &[f64], d: &mut [f64]| -> Result<()> {
        let (c, v) = curve(t);
        let nm = spray_coeffs(metric, &c, &v)?.n;
        for a in 0..m {
            for i in 0..n {
                d[a * n + i] = -(0..n).map(|j| nm[i][j] * s[a * n + j]).sum::<f64>();
            }
        }
        Ok(())
    };
    let traj = integrate(rhs, 0.0, &s0, &[t_end], &OdeOptions::default(), |_| true)?;
    let s = &traj
        .outputs
        .last()
        .ok_or_else(|| Error::Integration {
            t: traj.exit.unwrap_or(f64::NAN),
            reason: "curve transport stopped early".into(),
        })?
        .1;
    Ok((0..m).map(|a| s[a * n..(a + 1) * n].to_vec()).collect())
}
