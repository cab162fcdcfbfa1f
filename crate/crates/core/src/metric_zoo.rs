//! Built-in Finsler metrics, convex domains, Funk/Hilbert distances and
//! the Okada residual.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{lift_xy, Jet, JetSpec, Scalar};
use crate::quadrature::{unit_ball_volume, SphereGrid};
use crate::sampling::{halton_point, unit_direction};

/// A Finsler metric written once over any [`Scalar`], so the same formula
/// serves plain evaluation and jet differentiation.
pub trait FinslerMetric: Send + Sync + 'static {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    /// Chart membership of a base point.
    fn contains(&self, x: &[f64]) -> bool;
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S>;
    fn eval_sq<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        Ok(self.eval(x, y)?.square())
    }
    fn reversible(&self) -> bool;
    /// Maps `u ∈ [0,1)^n` into a compact part of the chart used for
    /// validation and random sampling.
    fn sample_point(&self, u: &[f64]) -> Vec<f64>;
    /// Busemann-Hausdorff density when a closed form is known.
    fn bh_density(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// Object-safe view of [`FinslerMetric`].
pub trait DynMetric: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn contains(&self, x: &[f64]) -> bool;
    fn reversible(&self) -> bool;
    fn sample_point(&self, u: &[f64]) -> Vec<f64>;
    fn bh_density(&self, x: &[f64]) -> Option<f64>;
    fn f(&self, x: &[f64], y: &[f64]) -> Result<f64>;
    fn f_sq(&self, x: &[f64], y: &[f64]) -> Result<f64>;
    fn f_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet>;
    fn f_sq_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet>;
}

impl<T: FinslerMetric> DynMetric for T {
    fn dim(&self) -> usize {
        FinslerMetric::dim(self)
    }
    fn label(&self) -> String {
        FinslerMetric::label(self)
    }
    fn contains(&self, x: &[f64]) -> bool {
        FinslerMetric::contains(self, x)
    }
    fn reversible(&self) -> bool {
        FinslerMetric::reversible(self)
    }
    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        FinslerMetric::sample_point(self, u)
    }
    fn bh_density(&self, x: &[f64]) -> Option<f64> {
        FinslerMetric::bh_density(self, x)
    }
    fn f(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.eval(x, y)
    }
    fn f_sq(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.eval_sq(x, y)
    }
    fn f_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        self.eval(x, y)
    }
    fn f_sq_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        self.eval_sq(x, y)
    }
}

/// Catalog parameters. Unused fields are ignored by metrics that do not
/// need them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Quartic-norm perturbation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// `ball` or `quartic:<eps>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// Randers: `euclidean`, `sphere` or `hyperbolic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    /// Randers: constant part of `β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Randers: linear part, `β_i(x) = beta_i + Σ_j beta_linear[i][j] x^j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_linear: Option<Vec<Vec<f64>>>,
}

/// Identifiers accepted by [`MetricSpec::from_id`].
pub const CATALOG: [&str; 8] = [
    "euclidean",
    "sphere",
    "hyperbolic",
    "randers",
    "berwald_product",
    "quartic_norm",
    "funk",
    "hilbert",
];

/// A validated metric together with its catalog identification.
#[derive(Clone)]
pub struct MetricSpec {
    pub id: String,
    pub params: MetricParams,
    metric: Arc<dyn DynMetric>,
}

impl fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSpec")
            .field("id", &self.id)
            .field("label", &self.metric.label())
            .finish()
    }
}

/// Fiber points with `F` below this are rejected before differentiation.
pub const MIN_F: f64 = 1e-12;

impl MetricSpec {
    /// Wraps a user metric after running the construction-time validation.
    pub fn new(id: impl Into<String>, params: MetricParams, metric: impl FinslerMetric) -> Result<Self> {
        let spec = Self::unchecked(id, params, metric);
        validate(&spec, 100)?;
        Ok(spec)
    }

    /// Wraps a metric without validation.
    pub fn unchecked(id: impl Into<String>, params: MetricParams, metric: impl FinslerMetric) -> Self {
        MetricSpec {
            id: id.into(),
            params,
            metric: Arc::new(metric),
        }
    }

    pub fn from_id(id: &str, params: &MetricParams) -> Result<Self> {
        let n = params.dim.unwrap_or(if id == "berwald_product" { 3 } else { 2 });
        if !(2..=crate::jets::MAX_DIM).contains(&n) {
            return Err(Error::Config(format!("dimension {n} unsupported")));
        }
        let p = params.clone();
        match id {
            "euclidean" => Self::new(id, p, Conformal::new(n, ConformalKind::Flat)),
            "sphere" => Self::new(id, p, Conformal::new(n, ConformalKind::Sphere)),
            "hyperbolic" => Self::new(id, p, Conformal::new(n, ConformalKind::Hyperbolic)),
            "randers" => {
                let alpha = match params.alpha.as_deref().unwrap_or("euclidean") {
                    "euclidean" => Alpha::Conformal(ConformalKind::Flat),
                    "sphere" => Alpha::Conformal(ConformalKind::Sphere),
                    "hyperbolic" => Alpha::Conformal(ConformalKind::Hyperbolic),
                    other => return Err(Error::Config(format!("unknown Randers alpha `{other}`"))),
                };
                let b0 = params.beta.clone().unwrap_or_else(|| {
                    let mut b = vec![0.0; n];
                    b[0] = 0.3;
                    b
                });
                let m = params.beta_linear.clone().unwrap_or_else(|| {
                    // a rotational (non-closed) part keeps the default non-Berwald
                    let mut m = vec![vec![0.0; n]; n];
                    m[0][1] = -0.15;
                    m[1][0] = 0.15;
                    m
                });
                Self::new(id, p, Randers::new(n, alpha, b0, m)?)
            }
            "berwald_product" => {
                if n != 3 {
                    return Err(Error::Config("berwald_product is three-dimensional".into()));
                }
                let b = params.beta.as_ref().map_or(0.3, |v| v.last().copied().unwrap_or(0.3));
                Self::new(id, p, Randers::new(3, Alpha::HyperbolicPlaneTimesLine, vec![0.0, 0.0, b], vec![vec![0.0; 3]; 3])?)
            }
            "quartic_norm" => Self::new(id, p, QuarticNorm::new(n, params.eps.unwrap_or(0.1))?),
            "funk" | "hilbert" => {
                let domain = ConvexDomain::parse(n, params.domain.as_deref().unwrap_or("ball"))?;
                if id == "funk" {
                    Self::new(id, p, Funk::new(domain))
                } else {
                    Self::new(id, p, Hilbert::new(domain))
                }
            }
            other => Err(Error::Config(format!(
                "unknown metric `{other}`; available: {}",
                CATALOG.join(", ")
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn label(&self) -> String {
        self.metric.label()
    }

    pub fn reversible(&self) -> bool {
        self.metric.reversible()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.metric.contains(x)
    }

    pub fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        self.metric.sample_point(u)
    }

    pub fn bh_density_exact(&self, x: &[f64]) -> Option<f64> {
        self.metric.bh_density(x)
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if !self.contains(x) {
            return Err(Error::OutsideChart {
                metric: self.label(),
                point: x.to_vec(),
            });
        }
        Ok(())
    }

    pub fn f(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        if y.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        self.metric.f(x, y)
    }

    pub fn f_sq(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        if y.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        self.metric.f_sq(x, y)
    }

    /// Evaluates `F` on already-lifted coordinate jets.
    pub fn f_on_jets(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let xv: Vec<f64> = x.iter().map(|j| j.value()).collect();
        self.check_x(&xv)?;
        self.metric.f_jet(x, y)
    }

    pub fn f_sq_on_jets(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let xv: Vec<f64> = x.iter().map(|j| j.value()).collect();
        self.check_x(&xv)?;
        self.metric.f_sq_jet(x, y)
    }

    fn check_fiber(&self, x: &[f64], y: &[f64]) -> Result<()> {
        let f = self.f(x, y)?;
        if !(f > MIN_F) {
            return Err(Error::Precondition(format!(
                "F(x, y) = {f:e} too small to differentiate at y = {y:?}"
            )));
        }
        Ok(())
    }

    /// Jet of `F` at `(x, y)`.
    pub fn f_jet(&self, x: &[f64], y: &[f64], spec: JetSpec) -> Result<Jet> {
        self.check_fiber(x, y)?;
        let (xj, yj) = lift_xy(x, y, spec)?;
        self.metric.f_jet(&xj, &yj)
    }

    /// Jet of `F²` at `(x, y)`.
    pub fn f2_jet(&self, x: &[f64], y: &[f64], spec: JetSpec) -> Result<Jet> {
        self.check_fiber(x, y)?;
        let (xj, yj) = lift_xy(x, y, spec)?;
        self.metric.f_sq_jet(&xj, &yj)
    }
}

/// Construction-time checks at `count` Halton samples: positivity,
/// 1-homogeneity, positive-definite fundamental tensor and the claimed
/// reversibility.
pub fn validate(metric: &MetricSpec, count: usize) -> Result<()> {
    let n = metric.dim();
    let spec = JetSpec::new(n, 0, 2)?;
    for i in 0..count as u64 {
        let h = halton_point(i, 2 * n);
        let x = metric.sample_point(&h[..n]);
        let y = unit_direction(&h[n..]);
        let bad = |reason: String| Error::MetricValidity {
            metric: metric.label(),
            x: x.clone(),
            y: y.clone(),
            reason,
        };
        let f = metric.f(&x, &y)?;
        if !(f > MIN_F) || !f.is_finite() {
            return Err(bad(format!("F = {f:e} not positive")));
        }
        for lambda in [0.5, 2.0] {
            let ys: Vec<f64> = y.iter().map(|v| lambda * v).collect();
            let fl = metric.f(&x, &ys)?;
            if (fl - lambda * f).abs() > 1e-10 * lambda * f {
                return Err(bad(format!("homogeneity fails at λ = {lambda}: {fl} vs {}", lambda * f)));
            }
        }
        if metric.reversible() {
            let ym: Vec<f64> = y.iter().map(|v| -v).collect();
            let fm = metric.f(&x, &ym)?;
            if (f - fm).abs() > 1e-10 * f {
                return Err(bad(format!("claimed reversible but F(-y) = {fm} vs F(y) = {f}")));
            }
        }
        let f2 = metric.f2_jet(&x, &y, spec)?;
        let g = DMatrix::from_fn(n, n, |a, b| 0.5 * f2.dy(&[a, b]).expect("order 2 jet"));
        let min_eig = SymmetricEigen::new(g).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(bad(format!("fundamental tensor not positive definite (min eigenvalue {min_eig:e})")));
        }
    }
    Ok(())
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = a[0].clone() * b[0].clone();
    for i in 1..a.len() {
        acc = acc + a[i].clone() * b[i].clone();
    }
    acc
}

fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a)
}

fn values<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|s| s.value()).collect()
}

fn box_point(u: &[f64], half: f64) -> Vec<f64> {
    u.iter().map(|t| half * (2.0 * t - 1.0)).collect()
}

fn ball_point(u: &[f64], radius: f64) -> Vec<f64> {
    let n = u.len();
    let d = unit_direction(u);
    let r = radius * u[0].powf(1.0 / n as f64);
    d.into_iter().map(|v| r * v).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConformalKind {
    Flat,
    /// `4|dx|²/(1+|x|²)²`, curvature +1.
    Sphere,
    /// `4|dx|²/(1-|x|²)²` on the unit ball, curvature -1.
    Hyperbolic,
}

impl ConformalKind {
    fn factor<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let r2 = norm2(x);
        match self {
            ConformalKind::Flat => Ok(r2.constant_like(1.0)),
            ConformalKind::Sphere => r2.constant_like(2.0).try_div(&(r2.clone() + 1.0)),
            ConformalKind::Hyperbolic => r2.constant_like(2.0).try_div(&(-r2.clone() + 1.0)),
        }
    }

    fn factor_f64(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            ConformalKind::Flat => 1.0,
            ConformalKind::Sphere => 2.0 / (1.0 + r2),
            ConformalKind::Hyperbolic => 2.0 / (1.0 - r2),
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            ConformalKind::Hyperbolic => x.iter().map(|v| v * v).sum::<f64>() < 1.0,
            _ => x.iter().all(|v| v.is_finite()),
        }
    }

    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        match self {
            ConformalKind::Hyperbolic => ball_point(u, 0.8),
            _ => box_point(u, 1.0),
        }
    }
}

/// Riemannian metric `c(x)|y|` conformal to the Euclidean one.
#[derive(Clone, Debug)]
pub struct Conformal {
    pub n: usize,
    pub kind: ConformalKind,
}

impl Conformal {
    pub fn new(n: usize, kind: ConformalKind) -> Self {
        Conformal { n, kind }
    }
}

impl FinslerMetric for Conformal {
    fn dim(&self) -> usize {
        self.n
    }
    fn label(&self) -> String {
        format!("{:?}(n={})", self.kind, self.n).to_lowercase()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.kind.contains(x)
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        Ok(self.kind.factor(x)? * norm2(y).sqrt()?)
    }
    fn eval_sq<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        Ok(self.kind.factor(x)?.square() * norm2(y))
    }
    fn reversible(&self) -> bool {
        true
    }
    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        self.kind.sample_point(u)
    }
    fn bh_density(&self, x: &[f64]) -> Option<f64> {
        Some(self.kind.factor_f64(x).powi(self.n as i32))
    }
}

/// Riemannian part of a Randers metric.
#[derive(Clone, Debug, PartialEq)]
pub enum Alpha {
    Conformal(ConformalKind),
    /// Constant symmetric positive-definite matrix (row-major).
    Constant(Vec<Vec<f64>>),
    /// Hyperbolic plane (conformal disc in `x¹, x²`) times a line.
    HyperbolicPlaneTimesLine,
}

impl Alpha {
    fn alpha_sq<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        match self {
            Alpha::Conformal(k) => Ok(k.factor(x)?.square() * norm2(y)),
            Alpha::Constant(a) => {
                let mut acc = y[0].constant_like(0.0);
                for i in 0..y.len() {
                    for j in 0..y.len() {
                        acc = acc + y[i].clone() * y[j].clone() * a[i][j];
                    }
                }
                Ok(acc)
            }
            Alpha::HyperbolicPlaneTimesLine => {
                let c = ConformalKind::Hyperbolic.factor(&x[..2])?;
                Ok(c.square() * norm2(&y[..2]) + y[2].square())
            }
        }
    }

    /// Matrix `a_ij(x)`.
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        match self {
            Alpha::Conformal(k) => DMatrix::identity(n, n) * k.factor_f64(x).powi(2),
            Alpha::Constant(a) => DMatrix::from_fn(n, n, |i, j| a[i][j]),
            Alpha::HyperbolicPlaneTimesLine => {
                let c2 = ConformalKind::Hyperbolic.factor_f64(&x[..2]).powi(2);
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c2, c2, 1.0]))
            }
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Alpha::Conformal(k) => k.contains(x),
            Alpha::Constant(_) => x.iter().all(|v| v.is_finite()),
            Alpha::HyperbolicPlaneTimesLine => x[0] * x[0] + x[1] * x[1] < 1.0 && x[2].is_finite(),
        }
    }

    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Alpha::Conformal(k) => k.sample_point(u),
            Alpha::Constant(_) => box_point(u, 1.0),
            Alpha::HyperbolicPlaneTimesLine => {
                let mut p = ball_point(&u[..2], 0.8);
                p.push(2.0 * u[2] - 1.0);
                p
            }
        }
    }
}

/// Randers metric `F = α + β` with affine `β_i(x) = b0_i + Σ_j m_ij x^j`.
#[derive(Clone, Debug)]
pub struct Randers {
    pub n: usize,
    pub alpha: Alpha,
    pub b0: Vec<f64>,
    pub m: Vec<Vec<f64>>,
}

impl Randers {
    pub fn new(n: usize, alpha: Alpha, b0: Vec<f64>, m: Vec<Vec<f64>>) -> Result<Self> {
        if b0.len() != n || m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("Randers β data must be {n}-dimensional")));
        }
        if let Alpha::Constant(a) = &alpha {
            if a.len() != n || a.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!("Randers α matrix must be {n}x{n}")));
            }
        }
        if matches!(alpha, Alpha::HyperbolicPlaneTimesLine) && n != 3 {
            return Err(Error::Config("product α is three-dimensional".into()));
        }
        let r = Randers { n, alpha, b0, m };
        for i in 0..200u64 {
            let x = r.alpha.sample_point(&halton_point(i, n));
            let b = r.beta_norm(&x);
            if !(b < 1.0) {
                // F vanishes or turns negative along -β
                return Err(Error::MetricValidity {
                    metric: "randers".into(),
                    y: r.beta_at(&x).iter().map(|v| -v).collect(),
                    x,
                    reason: format!("‖β‖ = {b} ≥ 1"),
                });
            }
        }
        Ok(r)
    }

    pub fn beta_at(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.b0[i] + (0..self.n).map(|j| self.m[i][j] * x[j]).sum::<f64>())
            .collect()
    }

    /// α-length of `β` at `x`.
    pub fn beta_norm(&self, x: &[f64]) -> f64 {
        let a = self.alpha.matrix(x);
        let b = nalgebra::DVector::from_vec(self.beta_at(x));
        let ainv = a.try_inverse().expect("α positive definite");
        (b.transpose() * ainv * &b)[(0, 0)].sqrt()
    }
}

impl FinslerMetric for Randers {
    fn dim(&self) -> usize {
        self.n
    }
    fn label(&self) -> String {
        format!("randers(n={}, alpha={:?}, b0={:?})", self.n, self.alpha, self.b0)
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.alpha.contains(x)
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let alpha = self.alpha.alpha_sq(x, y)?.sqrt()?;
        let mut beta = y[0].constant_like(0.0);
        for i in 0..self.n {
            let mut bi = x[0].constant_like(self.b0[i]);
            for j in 0..self.n {
                if self.m[i][j] != 0.0 {
                    bi = bi + x[j].clone() * self.m[i][j];
                }
            }
            beta = beta + bi * y[i].clone();
        }
        Ok(alpha + beta)
    }
    fn reversible(&self) -> bool {
        self.b0.iter().all(|v| *v == 0.0) && self.m.iter().flatten().all(|v| *v == 0.0)
    }
    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        self.alpha.sample_point(u)
    }
    fn bh_density(&self, x: &[f64]) -> Option<f64> {
        let det = self.alpha.matrix(x).determinant();
        let b = self.beta_norm(x);
        Some(det.sqrt() * (1.0 - b * b).powf((self.n as f64 + 1.0) / 2.0))
    }
}

/// Minkowski norm `(|y|⁴ + ε Σ y_i⁴)^{1/4}`.
#[derive(Clone, Debug)]
pub struct QuarticNorm {
    pub n: usize,
    pub eps: f64,
}

impl QuarticNorm {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps <= -0.5 {
            return Err(Error::Config(format!("quartic norm ε = {eps} out of range")));
        }
        Ok(QuarticNorm { n, eps })
    }
}

impl FinslerMetric for QuarticNorm {
    fn dim(&self) -> usize {
        self.n
    }
    fn label(&self) -> String {
        format!("quartic_norm(n={}, eps={})", self.n, self.eps)
    }
    fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        self.eval_sq(x, y)?.sqrt()
    }
    fn eval_sq<S: Scalar>(&self, _x: &[S], y: &[S]) -> Result<S> {
        let r2 = norm2(y);
        let mut q = r2.square();
        for yi in y {
            q = q + yi.square().square() * self.eps;
        }
        q.sqrt()
    }
    fn reversible(&self) -> bool {
        true
    }
    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        box_point(u, 1.0)
    }
}

/// Strongly convex domain `Ω = {φ < 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexDomain {
    pub n: usize,
    pub kind: DomainKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    UnitBall,
    /// `φ = |x|² + ε Σ x_i⁴ - 1`.
    Quartic(f64),
}

impl ConvexDomain {
    pub fn unit_ball(n: usize) -> Self {
        ConvexDomain {
            n,
            kind: DomainKind::UnitBall,
        }
    }

    pub fn quartic(n: usize, eps: f64) -> Result<Self> {
        let d = ConvexDomain {
            n,
            kind: DomainKind::Quartic(eps),
        };
        d.check_convexity()?;
        Ok(d)
    }

    /// Parses `ball` or `quartic:<eps>` (`quartic` alone means ε = 0.1).
    pub fn parse(n: usize, s: &str) -> Result<Self> {
        match s {
            "ball" | "unit_ball" => Ok(Self::unit_ball(n)),
            "quartic" => Self::quartic(n, 0.1),
            _ => {
                let eps = s
                    .strip_prefix("quartic:")
                    .and_then(|e| e.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown domain `{s}` (expected ball or quartic:<eps>)")))?;
                Self::quartic(n, eps)
            }
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            DomainKind::UnitBall => "ball".into(),
            DomainKind::Quartic(e) => format!("quartic:{e}"),
        }
    }

    pub fn phi<S: Scalar>(&self, z: &[S]) -> S {
        let r2 = norm2(z);
        match self.kind {
            DomainKind::UnitBall => r2 - 1.0,
            DomainKind::Quartic(eps) => {
                let mut acc = r2 - 1.0;
                for zi in z {
                    acc = acc + zi.square().square() * eps;
                }
                acc
            }
        }
    }

    pub fn grad_phi<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        z.iter()
            .map(|zi| match self.kind {
                DomainKind::UnitBall => zi.clone() * 2.0,
                DomainKind::Quartic(eps) => zi.clone() * 2.0 + zi.square() * zi.clone() * (4.0 * eps),
            })
            .collect()
    }

    pub fn hessian_phi(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i != j {
                return 0.0;
            }
            match self.kind {
                DomainKind::UnitBall => 2.0,
                DomainKind::Quartic(eps) => 2.0 + 12.0 * eps * z[i] * z[i],
            }
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n && self.phi(x) < 0.0
    }

    fn check_convexity(&self) -> Result<()> {
        for i in 0..200u64 {
            let d = unit_direction(&halton_point(i, self.n));
            let t = self.exit_param(&vec![0.0; self.n], &d)?;
            let z: Vec<f64> = d.iter().map(|v| v * t).collect();
            let g = self.grad_phi(&z);
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8 {
                return Err(Error::Geometry(format!("∇φ vanishes on the boundary at {z:?}")));
            }
            if SymmetricEigen::new(self.hessian_phi(&z)).eigenvalues.min() <= 0.0 {
                return Err(Error::Geometry(format!("domain {} not strongly convex at {z:?}", self.label())));
            }
        }
        Ok(())
    }

    /// The `t > 0` with `φ(x + t v) = 0`, by Newton iteration safeguarded
    /// with bisection.
    pub fn exit_param(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let h0 = self.phi(x);
        if !(h0 < 0.0) {
            return Err(Error::Geometry(format!("base point {x:?} is not interior")));
        }
        let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(vn > 0.0) {
            return Err(Error::Geometry("zero ray direction".into()));
        }
        let at = |t: f64| -> (f64, f64) {
            let z: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + t * b).collect();
            let g = self.grad_phi(&z);
            (self.phi(&z), g.iter().zip(v).map(|(a, b)| a * b).sum())
        };
        let mut hi = 1.0 / vn;
        let mut k = 0;
        while at(hi).0 <= 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 80 {
                return Err(Error::Geometry(format!("ray from {x:?} along {v:?} never leaves the domain")));
            }
        }
        let mut lo = 0.0;
        let mut t = hi;
        for _ in 0..200 {
            let (h, dh) = at(t);
            if h == 0.0 {
                return Ok(t);
            }
            if h > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let mut tn = if dh > 0.0 { t - h / dh } else { f64::NAN };
            if !(tn > lo && tn < hi) {
                tn = 0.5 * (lo + hi);
            }
            if (tn - t).abs() <= 1e-16 * t.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(tn);
            }
            t = tn;
        }
        Ok(t)
    }

    /// Euclidean volume of `Ω`.
    pub fn volume(&self) -> Result<f64> {
        match self.kind {
            DomainKind::UnitBall => Ok(unit_ball_volume(self.n)),
            DomainKind::Quartic(_) => {
                let grid = SphereGrid::standard(self.n)?;
                let origin = vec![0.0; self.n];
                let s = grid.try_integrate(|d| Ok(self.exit_param(&origin, d)?.powi(self.n as i32)))?;
                Ok(s / self.n as f64)
            }
        }
    }

    /// Inradius about the origin bound used for sampling.
    fn sample_radius(&self) -> f64 {
        0.75
    }
}

/// `t = 1/F_f(x, y)` lifted to any scalar: a value-level root followed by
/// Newton steps on the defining equation, which is exact to truncation
/// order once the number of steps exceeds log2 of the jet order.
fn funk_inverse<S: Scalar>(domain: &ConvexDomain, x: &[S], y: &[S]) -> Result<S> {
    let t0 = domain.exit_param(&values(x), &values(y))?;
    let mut t = y[0].constant_like(t0);
    for _ in 0..4 {
        let z: Vec<S> = x.iter().zip(y).map(|(a, b)| a.clone() + t.clone() * b.clone()).collect();
        let phi = domain.phi(&z);
        let dphi = dot(&domain.grad_phi(&z), y);
        t = t - phi.try_div(&dphi)?;
    }
    Ok(t)
}

/// Closed-form Funk metric of the unit ball.
pub fn funk_unit_ball<S: Scalar>(x: &[S], y: &[S]) -> Result<S> {
    let xy = dot(x, y);
    let q = -norm2(x) + 1.0;
    if q.value() <= 0.0 {
        return Err(Error::OutsideChart {
            metric: "funk(ball)".into(),
            point: values(x),
        });
    }
    let disc = xy.square() + norm2(y) * q.clone();
    (disc.sqrt()? + xy).try_div(&q)
}

/// Funk metric of a general domain by root-finding on `φ(x + y/F) = 0`.
pub fn funk_general<S: Scalar>(domain: &ConvexDomain, x: &[S], y: &[S]) -> Result<S> {
    let t = funk_inverse(domain, x, y)?;
    t.constant_like(1.0).try_div(&t)
}

#[derive(Clone, Debug)]
pub struct Funk {
    pub domain: ConvexDomain,
    /// Use the closed form on the unit ball (the root-finder otherwise).
    pub closed_form: bool,
    omega_volume: f64,
}

impl Funk {
    pub fn new(domain: ConvexDomain) -> Self {
        let closed_form = domain.kind == DomainKind::UnitBall;
        let omega_volume = domain.volume().unwrap_or(f64::NAN);
        Funk {
            domain,
            closed_form,
            omega_volume,
        }
    }

    /// Forces the general root-finding route even on the unit ball.
    pub fn general(domain: ConvexDomain) -> Self {
        Funk {
            closed_form: false,
            ..Self::new(domain)
        }
    }
}

impl FinslerMetric for Funk {
    fn dim(&self) -> usize {
        self.domain.n
    }
    fn label(&self) -> String {
        format!("funk(n={}, domain={})", self.domain.n, self.domain.label())
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.domain.contains(x)
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        if self.closed_form {
            funk_unit_ball(x, y)
        } else {
            funk_general(&self.domain, x, y)
        }
    }
    fn reversible(&self) -> bool {
        false
    }
    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        ball_point(u, self.domain.sample_radius())
    }
    fn bh_density(&self, _x: &[f64]) -> Option<f64> {
        // the unit ball of F_f at x is Ω - x
        self.omega_volume
            .is_finite()
            .then(|| unit_ball_volume(self.domain.n) / self.omega_volume)
    }
}

/// Hilbert metric `½(F_f(y) + F_f(-y))`.
#[derive(Clone, Debug)]
pub struct Hilbert {
    pub funk: Funk,
}

impl Hilbert {
    pub fn new(domain: ConvexDomain) -> Self {
        Hilbert { funk: Funk::new(domain) }
    }
}

impl FinslerMetric for Hilbert {
    fn dim(&self) -> usize {
        self.funk.domain.n
    }
    fn label(&self) -> String {
        format!("hilbert(n={}, domain={})", self.funk.domain.n, self.funk.domain.label())
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.funk.domain.contains(x)
    }
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let ym: Vec<S> = y.iter().map(|v| -v.clone()).collect();
        Ok((self.funk.eval(x, y)? + self.funk.eval(x, &ym)?) * 0.5)
    }
    fn reversible(&self) -> bool {
        true
    }
    fn sample_point(&self, u: &[f64]) -> Vec<f64> {
        FinslerMetric::sample_point(&self.funk, u)
    }
    fn bh_density(&self, x: &[f64]) -> Option<f64> {
        // Klein model: √det g = (1 - |x|²)^{-(n+1)/2}
        (self.funk.domain.kind == DomainKind::UnitBall)
            .then(|| (1.0 - x.iter().map(|a| a * a).sum::<f64>()).powf(-(self.funk.domain.n as f64 + 1.0) / 2.0))
    }
}

/// Funk distance `ln(|z-p|/|z-q|)` with `z` where the ray from `p` through
/// `q` leaves the domain.
pub fn funk_distance(domain: &ConvexDomain, p: &[f64], q: &[f64]) -> Result<f64> {
    if !domain.contains(p) || !domain.contains(q) {
        return Err(Error::Geometry(format!("points {p:?}, {q:?} must be interior")));
    }
    let v: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    if v.iter().all(|a| *a == 0.0) {
        return Ok(0.0);
    }
    // z = p + t v, so |z-p| : |z-q| = t : (t-1)
    let t = domain.exit_param(p, &v)?;
    Ok((t / (t - 1.0)).ln())
}

pub fn hilbert_distance(domain: &ConvexDomain, p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(0.5 * (funk_distance(domain, p, q)? + funk_distance(domain, q, p)?))
}

/// `∂F/∂x^i - F ∂F/∂y^i`, which vanishes identically for Funk metrics.
pub fn okada_residual(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = metric.dim();
    let j = metric.f_jet(x, y, JetSpec::new(n, 1, 1)?)?;
    let f = j.value();
    (0..n)
        .map(|i| Ok(j.mixed(&[i], &[])? - f * j.dy(&[i])?))
        .collect()
}
