//! Quantities living in a single tangent space: fundamental tensor, Cartan
//! torsion and its derivative, mean Cartan torsion, distortion,
//! Busemann-Hausdorff density and the geometry of the indicatrix.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{fd_oracle, Jet, JetSpec, FdScheme};
use crate::metric_zoo::MetricSpec;
use crate::quadrature::{unit_ball_volume, SphereGrid};
use crate::sampling::{stratified_mc, McEstimate, McRegion};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalTensor {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det_g: f64,
}

impl FundamentalTensor {
    /// Builds `g_ij = ½ ∂²F²/∂y^i∂y^j` from a jet of `F²` with fiber order ≥ 2.
    pub fn from_f2_jet(f2: &Jet, metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Self> {
        let n = f2.spec().n;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * f2.dy(&[i, j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Self::from_matrix(g, metric, x, y)
    }

    fn from_matrix(g: DMatrix<f64>, metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Self> {
        let chol = g.clone().cholesky().ok_or_else(|| Error::MetricValidity {
            metric: metric.label(),
            x: x.to_vec(),
            y: y.to_vec(),
            reason: "fundamental tensor not positive definite".into(),
        })?;
        let det_g = chol.l_dirty().diagonal().iter().map(|d| d * d).product();
        Ok(FundamentalTensor {
            g_inv: chol.inverse(),
            g,
            det_g,
        })
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.g[(i, j)] * u[i] * v[j];
            }
        }
        acc
    }

    /// Raises an index: the vector `ξ` with `g(ξ, ·) = w`.
    pub fn raise(&self, w: &[f64]) -> Vec<f64> {
        (&self.g_inv * DVector::from_column_slice(w)).iter().copied().collect()
    }

    /// Lowers an index: `g(v, ·)`.
    pub fn lower(&self, v: &[f64]) -> Vec<f64> {
        (&self.g * DVector::from_column_slice(v)).iter().copied().collect()
    }
}

pub fn fundamental_tensor(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<FundamentalTensor> {
    let f2 = metric.f2_jet(x, y, JetSpec::new(metric.dim(), 0, 2)?)?;
    FundamentalTensor::from_f2_jet(&f2, metric, x, y)
}

/// Fiber derivative tensor `scale · ∂^k F²/∂y...` of rank `k` from a jet.
pub(crate) fn fiber_tensor(f2: &Jet, rank: usize, scale: f64) -> Result<Tensor> {
    let n = f2.spec().n;
    let mut err = None;
    let t = Tensor::from_fn(n, rank, |idx| match f2.dy(idx) {
        Ok(v) => scale * v,
        Err(e) => {
            err = Some(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(t),
    }
}

/// Cartan torsion, its fiber derivative and the mean Cartan torsion at a sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CartanData {
    /// `C_ijk = ¼ ∂³F²`.
    pub c: Tensor,
    /// `C̃_ijkl = ¼ ∂⁴F²`.
    pub c_tilde: Tensor,
    /// `I_k = g^{ij} C_ijk`.
    pub i: Vec<f64>,
}

pub fn cartan_torsion(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Tensor> {
    let f2 = metric.f2_jet(x, y, JetSpec::new(metric.dim(), 0, 3)?)?;
    fiber_tensor(&f2, 3, 0.25)
}

pub fn cartan_tilde(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Tensor> {
    let f2 = metric.f2_jet(x, y, JetSpec::new(metric.dim(), 0, 4)?)?;
    fiber_tensor(&f2, 4, 0.25)
}

pub fn mean_cartan_from(g: &FundamentalTensor, c: &Tensor) -> Vec<f64> {
    let n = c.n;
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += g.g_inv[(i, j)] * c.get(&[i, j, k]);
                }
            }
            acc
        })
        .collect()
}

pub fn mean_cartan(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(cartan_data(metric, x, y)?.i)
}

pub fn cartan_data(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<CartanData> {
    let f2 = metric.f2_jet(x, y, JetSpec::new(metric.dim(), 0, 4)?)?;
    let g = FundamentalTensor::from_f2_jet(&f2, metric, x, y)?;
    let c = fiber_tensor(&f2, 3, 0.25)?;
    let c_tilde = fiber_tensor(&f2, 4, 0.25)?;
    let i = mean_cartan_from(&g, &c);
    Ok(CartanData { c, c_tilde, i })
}

/// `τ = ln(√det g / σ)`.
pub fn distortion(metric: &MetricSpec, x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("density σ = {sigma} must be positive")));
    }
    let g = fundamental_tensor(metric, x, y)?;
    Ok((g.det_g.sqrt() / sigma).ln())
}

/// `max_k |∂τ/∂y^k - I_k|`, with the derivative of `τ` by finite differences.
pub fn distortion_derivative_check(metric: &MetricSpec, x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    let n = metric.dim();
    let i = mean_cartan(metric, x, y)?;
    let mut point = x.to_vec();
    point.extend_from_slice(y);
    let tau = |p: &[f64]| distortion(metric, &p[..n], &p[n..], sigma);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut b = vec![0; n];
        b[k] = 1;
        let d = fd_oracle(tau, &point, &vec![0; n], &b, FdScheme::for_order(1))?;
        worst = worst.max((d.value - i[k]).abs());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum MeasureMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// Busemann-Hausdorff density `σ_F(x) = Vol(Bⁿ) / Vol{F(x, ·) < 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BhDensity {
    pub sigma: f64,
    /// Euclidean volume of the unit ball of `F_x`.
    pub body_volume: f64,
    /// Error estimate of `body_volume`.
    pub body_error: f64,
    pub method: MeasureMethod,
}

fn body_volume_on(metric: &MetricSpec, x: &[f64], grid: &SphereGrid) -> Result<f64> {
    let n = metric.dim();
    let s = grid.try_integrate(|d| Ok(metric.f(x, d)?.powi(-(n as i32))))?;
    Ok(s / n as f64)
}

/// Density by spherical quadrature of `(1/n) ∫ F(x, θ)^{-n} dθ`; the
/// difference to a coarser grid is the error estimate.
pub fn bh_density(metric: &MetricSpec, x: &[f64]) -> Result<BhDensity> {
    let n = metric.dim();
    let fine = body_volume_on(metric, x, &SphereGrid::standard(n)?)?;
    let coarse = body_volume_on(metric, x, &SphereGrid::coarse(n)?)?;
    Ok(BhDensity {
        sigma: unit_ball_volume(n) / fine,
        body_volume: fine,
        body_error: (fine - coarse).abs(),
        method: MeasureMethod::Quadrature,
    })
}

/// Closed form when the metric provides one, quadrature otherwise.
pub fn bh_density_value(metric: &MetricSpec, x: &[f64]) -> Result<f64> {
    match metric.bh_density_exact(x) {
        Some(s) => Ok(s),
        None => Ok(bh_density(metric, x)?.sigma),
    }
}

/// Monte-Carlo estimate of the unit-body volume by rejection in a box.
pub fn bh_body_volume_mc(metric: &MetricSpec, x: &[f64], n_samples: usize, seed: u64) -> Result<McEstimate> {
    let n = metric.dim();
    let grid = SphereGrid::coarse(n)?;
    let mut reach: f64 = 0.0;
    for d in &grid.directions {
        reach = reach.max(1.0 / metric.f(x, d)?);
    }
    let r = 1.1 * reach;
    let region = McRegion::Box {
        lo: vec![-r; n],
        hi: vec![r; n],
    };
    let est = stratified_mc(
        |y| match metric.f(x, y) {
            Ok(f) if f < 1.0 => 1.0,
            _ => 0.0,
        },
        &region,
        n_samples,
        seed,
    );
    Ok(est)
}

/// Quadrature density cross-checked against Monte-Carlo; disagreement
/// beyond three combined standard errors is a numerical-integrity error.
pub fn bh_density_checked(metric: &MetricSpec, x: &[f64], n_samples: usize, seed: u64) -> Result<(BhDensity, McEstimate)> {
    let q = bh_density(metric, x)?;
    let mc = bh_body_volume_mc(metric, x, n_samples, seed)?;
    let tol = 3.0 * (mc.stderr.powi(2) + q.body_error.powi(2)).sqrt();
    if (q.body_volume - mc.value).abs() > tol {
        return Err(Error::NumericalIntegrity(format!(
            "unit-body volume: quadrature {} vs Monte-Carlo {} ± {}",
            q.body_volume, mc.value, mc.stderr
        )));
    }
    Ok((q, mc))
}

fn check_tangent(g: &FundamentalTensor, y: &[f64], f: f64, u: &[f64]) -> Result<()> {
    let un = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let gy = g.inner(y, u);
    if gy.abs() > 1e-8 * f * un {
        return Err(Error::Precondition(format!(
            "vector {u:?} not tangent to the indicatrix (g_y(y,u) = {gy:e})"
        )));
    }
    Ok(())
}

/// Cartan data and fundamental tensor at a point of the indicatrix.
pub struct IndicatrixPoint {
    pub y: Vec<f64>,
    pub g: FundamentalTensor,
    pub c: Tensor,
}

impl IndicatrixPoint {
    /// Normalizes `y` onto the indicatrix `F = 1`.
    pub fn new(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Self> {
        let f = metric.f(x, y)?;
        let y: Vec<f64> = y.iter().map(|v| v / f).collect();
        let f2 = metric.f2_jet(x, &y, JetSpec::new(metric.dim(), 0, 3)?)?;
        Ok(IndicatrixPoint {
            g: FundamentalTensor::from_f2_jet(&f2, metric, x, &y)?,
            c: fiber_tensor(&f2, 3, 0.25)?,
            y,
        })
    }

    /// The vector `C_y(u, v)` dual to `C_y(u, v, ·)`.
    pub fn c_vec(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let lowered = self.c.apply_tail(&[u, v]);
        self.g.raise(&lowered)
    }

    /// `Ṙ_y(u,v)w = C(C(u,w),v) - C(C(v,w),u) + ġ(v,w)u - ġ(u,w)v`.
    pub fn riemann(&self, u: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        for t in [u, v, w] {
            check_tangent(&self.g, &self.y, 1.0, t)?;
        }
        let a = self.c_vec(&self.c_vec(u, w), v);
        let b = self.c_vec(&self.c_vec(v, w), u);
        let gvw = self.g.inner(v, w);
        let guw = self.g.inner(u, w);
        Ok((0..u.len())
            .map(|i| a[i] - b[i] + gvw * u[i] - guw * v[i])
            .collect())
    }

    /// Sectional curvature of the plane spanned by tangent vectors `u, v`.
    pub fn sectional(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let r = self.riemann(u, v, v)?;
        let num = self.g.inner(&r, u);
        let den = self.g.inner(u, u) * self.g.inner(v, v) - self.g.inner(u, v).powi(2);
        Ok(num / den)
    }
}

pub fn indicatrix_riemann(metric: &MetricSpec, x: &[f64], y: &[f64], u: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    IndicatrixPoint::new(metric, x, y)?.riemann(u, v, w)
}

/// Orthonormal frame `(e1, e2, e3)` with `e1` along `y`.
fn frame3(y: &[f64]) -> [[f64; 3]; 3] {
    let e1 = normalize(y);
    let helper = if e1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d: f64 = (0..3).map(|i| helper[i] * e1[i]).sum();
    let e2 = normalize(&(0..3).map(|i| helper[i] - d * e1[i]).collect::<Vec<_>>());
    let e3 = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    [[e1[0], e1[1], e1[2]], [e2[0], e2[1], e2[2]], e3]
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / r).collect()
}

/// Radial parametrization of the indicatrix near `y`:
/// `(a, b) ↦ θ/F(θ)` with `θ` on the unit sphere, `θ(0,0) ∥ y`.
struct RadialChart<'a> {
    metric: &'a MetricSpec,
    x: &'a [f64],
    frame: [[f64; 3]; 3],
}

impl RadialChart<'_> {
    fn theta(&self, a: f64, b: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let f = &self.frame;
        let (ca, sa, cb, sb) = (a.cos(), a.sin(), b.cos(), b.sin());
        let mut t = [0.0; 3];
        let mut ta = [0.0; 3];
        let mut tb = [0.0; 3];
        for i in 0..3 {
            t[i] = ca * cb * f[0][i] + sa * cb * f[1][i] + sb * f[2][i];
            ta[i] = -sa * cb * f[0][i] + ca * cb * f[1][i];
            tb[i] = -ca * sb * f[0][i] - sa * sb * f[1][i] + cb * f[2][i];
        }
        (t, ta, tb)
    }

    /// First fundamental form `(E, F, G)` of `ġ` in the chart.
    fn first_form(&self, a: f64, b: f64) -> Result<[f64; 3]> {
        let (t, ta, tb) = self.theta(a, b);
        let j = self.metric.f2_jet(self.x, &t, JetSpec::new(3, 0, 2)?)?;
        let f = j.value().sqrt();
        let grad: Vec<f64> = (0..3).map(|i| Ok(j.dy(&[i])? / (2.0 * f))).collect::<Result<_>>()?;
        let g = FundamentalTensor::from_matrix(
            DMatrix::from_fn(3, 3, |i, k| 0.5 * j.dy(&[i, k]).expect("order 2 jet")),
            self.metric,
            self.x,
            &t,
        )?;
        // d(θ/F)(w) = (w - θ dF(w)/F) / F
        let push = |w: &[f64; 3]| -> Vec<f64> {
            let df: f64 = (0..3).map(|i| grad[i] * w[i]).sum();
            (0..3).map(|i| (w[i] - t[i] * df / f) / f).collect()
        };
        let pa = push(&ta);
        let pb = push(&tb);
        Ok([g.inner(&pa, &pa), g.inner(&pa, &pb), g.inner(&pb, &pb)])
    }
}

/// Gauss curvature of `(S, ġ)` at `y/F(y)` (dimension three), by the
/// Brioschi formula with finite-difference derivatives of the first
/// fundamental form in the radial chart.
pub fn indicatrix_gauss_oracle(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if metric.dim() != 3 {
        return Err(Error::Precondition("Gauss-curvature oracle needs n = 3".into()));
    }
    let chart = &RadialChart {
        metric,
        x,
        frame: frame3(y),
    };
    let comp = |k: usize| move |p: &[f64]| -> Result<f64> { Ok(chart.first_form(p[0], p[1])?[k]) };
    let d = |k: usize, da: usize, db: usize| -> Result<f64> {
        let order = da + db;
        Ok(fd_oracle(comp(k), &[0.0, 0.0], &[da], &[db], FdScheme::for_order(order))?.value)
    };
    let [e, f, g] = chart.first_form(0.0, 0.0)?;
    let (e_u, e_v, e_vv) = (d(0, 1, 0)?, d(0, 0, 1)?, d(0, 0, 2)?);
    let (f_u, f_v, f_uv) = (d(1, 1, 0)?, d(1, 0, 1)?, d(1, 1, 1)?);
    let (g_u, g_v, g_uu) = (d(2, 1, 0)?, d(2, 0, 1)?, d(2, 2, 0)?);
    let m1 = nalgebra::Matrix3::new(
        -0.5 * e_vv + f_uv - 0.5 * g_uu,
        0.5 * e_u,
        f_u - 0.5 * e_v,
        f_v - 0.5 * g_u,
        e,
        f,
        0.5 * g_v,
        f,
        g,
    );
    let m2 = nalgebra::Matrix3::new(0.0, 0.5 * e_v, 0.5 * g_u, 0.5 * e_v, e, f, 0.5 * g_u, f, g);
    Ok((m1.determinant() - m2.determinant()) / (e * g - f * f).powi(2))
}

/// Sectional curvature of `(S, ġ)` at `y/F(y)` from the Cartan-torsion
/// formula, on the tangent plane (dimension three).
pub fn indicatrix_sectional_formula(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if metric.dim() != 3 {
        return Err(Error::Precondition("indicatrix sectional curvature needs n = 3".into()));
    }
    let p = IndicatrixPoint::new(metric, x, y)?;
    let fr = frame3(y);
    // g_y-orthogonal projections of two Euclidean-orthogonal directions
    let proj = |w: &[f64; 3]| -> Vec<f64> {
        let c = p.g.inner(&p.y, w);
        (0..3).map(|i| w[i] - c * p.y[i]).collect()
    };
    let u = proj(&fr[1]);
    let v = proj(&fr[2]);
    p.sectional(&u, &v)
}

/// `ġ` on `θ^⊥` pulled back by `θ ↦ θ/F(θ)`: `(g - ℓ⊗ℓ)/F²` with `ℓ = g(θ,·)/F`.
fn pulled_back_metric(metric: &MetricSpec, x: &[f64], theta: &[f64]) -> Result<(FundamentalTensor, f64, Vec<f64>)> {
    let g = fundamental_tensor(metric, x, theta)?;
    let f = metric.f(x, theta)?;
    let l: Vec<f64> = g.lower(theta).iter().map(|v| v / f).collect();
    Ok((g, f, l))
}

/// Riemannian volume of the indicatrix with the metric induced by `g_y`.
pub fn santalo_volume(metric: &MetricSpec, x: &[f64]) -> Result<f64> {
    if !metric.reversible() {
        return Err(Error::Precondition(
            "indicatrix volume comparison needs a reversible norm".into(),
        ));
    }
    let n = metric.dim();
    let grid = SphereGrid::standard(n)?;
    grid.try_integrate(|theta| {
        let (g, f, l) = pulled_back_metric(metric, x, theta)?;
        let basis: Vec<Vec<f64>> = match n {
            2 => vec![vec![-theta[1], theta[0]]],
            3 => {
                let fr = frame3(theta);
                vec![fr[1].to_vec(), fr[2].to_vec()]
            }
            _ => unreachable!("grid only exists for n = 2, 3"),
        };
        let m = basis.len();
        let gram = DMatrix::from_fn(m, m, |a, b| {
            let la: f64 = l.iter().zip(&basis[a]).map(|(p, q)| p * q).sum();
            let lb: f64 = l.iter().zip(&basis[b]).map(|(p, q)| p * q).sum();
            (g.inner(&basis[a], &basis[b]) - la * lb) / (f * f)
        });
        Ok(gram.determinant().sqrt())
    })
}

/// Busemann-Hausdorff length of the indicatrix curve (n = 2) for the
/// metric induced by `F`: each tangent line is a one-dimensional Minkowski
/// space with density `2/(1/F(t) + 1/F(-t))`.
pub fn indicatrix_bh_length(metric: &MetricSpec, x: &[f64]) -> Result<f64> {
    if metric.dim() != 2 {
        return Err(Error::Precondition("indicatrix length is defined here for n = 2".into()));
    }
    let grid = SphereGrid::standard(2)?;
    grid.try_integrate(|theta| {
        let f = metric.f(x, theta)?;
        let j = metric.f_jet(x, theta, JetSpec::new(2, 0, 1)?)?;
        let w = [-theta[1], theta[0]];
        let df = j.dy(&[0])? * w[0] + j.dy(&[1])? * w[1];
        let t: Vec<f64> = (0..2).map(|i| (w[i] - theta[i] * df / f) / f).collect();
        let tm: Vec<f64> = t.iter().map(|v| -v).collect();
        let fp = metric.f(x, &t)?;
        let fm = metric.f(x, &tm)?;
        Ok(2.0 / (1.0 / fp + 1.0 / fm))
    })
}
