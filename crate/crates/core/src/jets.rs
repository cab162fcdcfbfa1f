//! Truncated multivariate Taylor arithmetic on the tangent bundle.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar function of the `2n`
//! coordinates `(x, y)` around an expansion point, truncated separately in the
//! base coordinates (total order `<= max_x_order`) and in the fiber coordinates
//! (total order `<= max_y_order`). Arithmetic on jets is exact up to that
//! truncation, so a single evaluation of a metric on lifted coordinates yields
//! every mixed partial derivative the curvature code needs.
//!
//! Coefficients are stored once per multi-index, which makes Schwarz symmetry
//! structural: there is no separate storage for permuted derivative orders.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Highest supported total order in the base coordinates.
pub const MAX_X_ORDER: usize = 2;
/// Highest supported total order in the fiber coordinates.
pub const MAX_Y_ORDER: usize = 5;
/// Largest supported dimension (four bits per variable in the monomial keys).
pub const MAX_DIM: usize = 8;

const BITS: u32 = 4;

/// Differentiation orders carried by a jet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct JetSpec {
    pub n: usize,
    pub max_x_order: usize,
    pub max_y_order: usize,
}

impl JetSpec {
    pub fn new(n: usize, max_x_order: usize, max_y_order: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::Config(format!(
                "jet dimension {n} outside supported range 2..={MAX_DIM}"
            )));
        }
        if max_x_order > MAX_X_ORDER || max_y_order > MAX_Y_ORDER {
            return Err(Error::Config(format!(
                "jet orders ({max_x_order},{max_y_order}) exceed supported maxima ({MAX_X_ORDER},{MAX_Y_ORDER})"
            )));
        }
        Ok(Self {
            n,
            max_x_order,
            max_y_order,
        })
    }

    /// Number of lifted variables (`2n`).
    pub fn vars(&self) -> usize {
        2 * self.n
    }

    pub fn total_order(&self) -> usize {
        self.max_x_order + self.max_y_order
    }

    /// Largest spec contained in both.
    pub fn meet(&self, other: &JetSpec) -> JetSpec {
        debug_assert_eq!(self.n, other.n, "jets of different dimension");
        JetSpec {
            n: self.n,
            max_x_order: self.max_x_order.min(other.max_x_order),
            max_y_order: self.max_y_order.min(other.max_y_order),
        }
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        binomial(self.n + self.max_x_order, self.n) * binomial(self.n + self.max_y_order, self.n)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn exponent(key: u64, var: usize) -> usize {
    ((key >> (BITS as usize * var)) & 0xF) as usize
}

fn unit_key(var: usize) -> u64 {
    1u64 << (BITS as usize * var)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

type DerivMap = (Arc<Layout>, Vec<(u32, u32, f64)>);

struct Layout {
    spec: JetSpec,
    keys: Vec<u64>,
    index: HashMap<u64, u32>,
    mul: Vec<[u32; 3]>,
    deriv: Vec<OnceLock<Option<DerivMap>>>,
    trunc: Mutex<HashMap<JetSpec, Arc<Vec<u32>>>>,
}

impl Layout {
    fn build(spec: JetSpec) -> Layout {
        let n = spec.n;
        let parts = |order: usize, offset: usize| -> Vec<(u64, usize)> {
            let mut out = vec![(0u64, 0usize)];
            let mut frontier = vec![(0u64, 0usize, 0usize)];
            // grow monomials with non-decreasing variable index to avoid duplicates
            for _ in 0..order {
                let mut next = Vec::new();
                for &(key, deg, last) in &frontier {
                    for v in last..n {
                        let k = key + unit_key(offset + v);
                        next.push((k, deg + 1, v));
                        out.push((k, deg + 1));
                    }
                }
                frontier = next;
            }
            out
        };
        let xs = parts(spec.max_x_order, 0);
        let ys = parts(spec.max_y_order, n);
        let mut monos: Vec<(usize, u64)> = Vec::with_capacity(xs.len() * ys.len());
        for &(kx, dx) in &xs {
            for &(ky, dy) in &ys {
                monos.push((dx + dy, kx + ky));
            }
        }
        monos.sort_unstable();
        let keys: Vec<u64> = monos.iter().map(|&(_, k)| k).collect();
        let index: HashMap<u64, u32> = keys
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, i as u32))
            .collect();
        let degs: Vec<(usize, usize)> = keys
            .iter()
            .map(|&k| {
                let dx = (0..n).map(|v| exponent(k, v)).sum();
                let dy = (n..2 * n).map(|v| exponent(k, v)).sum();
                (dx, dy)
            })
            .collect();
        let mut mul = Vec::new();
        for i in 0..keys.len() {
            for j in 0..keys.len() {
                if degs[i].0 + degs[j].0 <= spec.max_x_order
                    && degs[i].1 + degs[j].1 <= spec.max_y_order
                {
                    let k = index[&(keys[i] + keys[j])];
                    mul.push([i as u32, j as u32, k]);
                }
            }
        }
        Layout {
            spec,
            keys,
            index,
            mul,
            deriv: (0..2 * n).map(|_| OnceLock::new()).collect(),
            trunc: Mutex::new(HashMap::new()),
        }
    }

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn deriv_map(&self, var: usize) -> Option<&DerivMap> {
        self.deriv[var]
            .get_or_init(|| {
                let is_x = var < self.spec.n;
                let spec = self.spec;
                let target = if is_x {
                    if spec.max_x_order == 0 {
                        return None;
                    }
                    JetSpec {
                        max_x_order: spec.max_x_order - 1,
                        ..spec
                    }
                } else {
                    if spec.max_y_order == 0 {
                        return None;
                    }
                    JetSpec {
                        max_y_order: spec.max_y_order - 1,
                        ..spec
                    }
                };
                let tl = layout(target);
                let map = tl
                    .keys
                    .iter()
                    .enumerate()
                    .map(|(dst, &key)| {
                        let e = exponent(key, var);
                        let src = self.index[&(key + unit_key(var))];
                        (src, dst as u32, (e + 1) as f64)
                    })
                    .collect();
                Some((tl, map))
            })
            .as_ref()
    }

    fn trunc_map(&self, target: JetSpec) -> Arc<Vec<u32>> {
        let mut cache = self.trunc.lock().expect("jet layout cache poisoned");
        cache
            .entry(target)
            .or_insert_with(|| {
                let tl = layout(target);
                Arc::new(tl.keys.iter().map(|k| self.index[k]).collect())
            })
            .clone()
    }
}

fn layout(spec: JetSpec) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<JetSpec, Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(l) = cache.lock().expect("jet layout cache poisoned").get(&spec) {
        return l.clone();
    }
    // built outside the lock: derivative maps recurse into `layout`
    let built = Arc::new(Layout::build(spec));
    cache
        .lock()
        .expect("jet layout cache poisoned")
        .entry(spec)
        .or_insert(built)
        .clone()
}

/// Truncated Taylor expansion of a scalar on the tangent bundle.
///
/// `coeff(a, b)` is `∂^a_x ∂^b_y f / (a! b!)` at the expansion point.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("spec", &self.layout.spec)
            .field("value", &self.c[0])
            .finish_non_exhaustive()
    }
}

/// Seeds the `2n` coordinate jets `(x^1..x^n, y^1..y^n)` at `point`.
pub fn lift(point: &[f64], spec: JetSpec) -> Result<Vec<Jet>> {
    let spec = JetSpec::new(spec.n, spec.max_x_order, spec.max_y_order)?;
    if point.len() != spec.vars() {
        return Err(Error::Config(format!(
            "lift expects {} coordinates, got {}",
            spec.vars(),
            point.len()
        )));
    }
    let l = layout(spec);
    Ok(point
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            let mut c = vec![0.0; l.len()];
            c[0] = p;
            let has_first = if v < spec.n {
                spec.max_x_order > 0
            } else {
                spec.max_y_order > 0
            };
            if has_first {
                c[l.index[&unit_key(v)] as usize] = 1.0;
            }
            Jet {
                layout: l.clone(),
                c,
            }
        })
        .collect())
}

/// Convenience: lift base point `x` and fiber point `y` separately.
pub fn lift_xy(x: &[f64], y: &[f64], spec: JetSpec) -> Result<(Vec<Jet>, Vec<Jet>)> {
    if x.len() != spec.n || y.len() != spec.n {
        return Err(Error::Config(format!(
            "lift expects x and y of length {}, got {} and {}",
            spec.n,
            x.len(),
            y.len()
        )));
    }
    let mut p = x.to_vec();
    p.extend_from_slice(y);
    let mut all = lift(&p, spec)?;
    let ys = all.split_off(spec.n);
    Ok((all, ys))
}

impl Jet {
    pub fn constant(spec: JetSpec, value: f64) -> Result<Jet> {
        let spec = JetSpec::new(spec.n, spec.max_x_order, spec.max_y_order)?;
        let l = layout(spec);
        let mut c = vec![0.0; l.len()];
        c[0] = value;
        Ok(Jet { layout: l, c })
    }

    pub fn spec(&self) -> JetSpec {
        self.layout.spec
    }

    /// Order-(0,0) coefficient.
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    fn key_of(&self, a: &[usize], b: &[usize]) -> Result<u64> {
        let spec = self.spec();
        if a.len() != spec.n || b.len() != spec.n {
            return Err(Error::Config(format!(
                "multi-index lengths ({}, {}) do not match dimension {}",
                a.len(),
                b.len(),
                spec.n
            )));
        }
        let (da, db): (usize, usize) = (a.iter().sum(), b.iter().sum());
        if da > spec.max_x_order || db > spec.max_y_order {
            return Err(Error::Config(format!(
                "requested order ({da},{db}) exceeds jet orders ({},{})",
                spec.max_x_order, spec.max_y_order
            )));
        }
        let mut key = 0u64;
        for (v, &e) in a.iter().chain(b.iter()).enumerate() {
            key += (e as u64) << (BITS as usize * v);
        }
        Ok(key)
    }

    /// Raw Taylor coefficient for multi-indices `a` (base) and `b` (fiber).
    pub fn coeff(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let key = self.key_of(a, b)?;
        Ok(self.c[self.layout.index[&key] as usize])
    }

    /// Mixed partial derivative `∂^a_x ∂^b_y f` at the expansion point.
    pub fn partial(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let w: f64 = a.iter().chain(b.iter()).map(|&e| factorial(e)).product();
        Ok(self.coeff(a, b)? * w)
    }

    /// Partial derivative with respect to fiber variables listed by index
    /// (repetitions allowed), e.g. `dy(&[0, 0, 1])` is `∂³f/∂y¹∂y¹∂y²`.
    pub fn dy(&self, vars: &[usize]) -> Result<f64> {
        self.mixed(&[], vars)
    }

    /// Mixed partial with base variables `xv` and fiber variables `yv`.
    pub fn mixed(&self, xv: &[usize], yv: &[usize]) -> Result<f64> {
        let n = self.spec().n;
        let mut a = vec![0usize; n];
        let mut b = vec![0usize; n];
        for &i in xv {
            a[i] += 1;
        }
        for &i in yv {
            b[i] += 1;
        }
        self.partial(&a, &b)
    }

    fn deriv(&self, var: usize) -> Result<Jet> {
        let (tl, map) = self.layout.deriv_map(var).ok_or_else(|| {
            Error::Config(format!(
                "cannot differentiate jet of orders ({},{}) in variable {var}",
                self.spec().max_x_order,
                self.spec().max_y_order
            ))
        })?;
        let mut c = vec![0.0; tl.len()];
        for &(src, dst, f) in map {
            c[dst as usize] = f * self.c[src as usize];
        }
        Ok(Jet {
            layout: tl.clone(),
            c,
        })
    }

    /// Jet of `∂f/∂x^i`; one base order is consumed.
    pub fn d_x(&self, i: usize) -> Result<Jet> {
        self.deriv(i)
    }

    /// Jet of `∂f/∂y^i`; one fiber order is consumed.
    pub fn d_y(&self, i: usize) -> Result<Jet> {
        self.deriv(self.spec().n + i)
    }

    /// Drops coefficients beyond `spec` (which must not exceed the current orders).
    pub fn truncate(&self, spec: JetSpec) -> Jet {
        let spec = self.spec().meet(&spec);
        if spec == self.spec() {
            return self.clone();
        }
        let map = self.layout.trunc_map(spec);
        Jet {
            layout: layout(spec),
            c: map.iter().map(|&i| self.c[i as usize]).collect(),
        }
    }

    fn aligned(&self, other: &Jet) -> (std::borrow::Cow<'_, Jet>, Jet) {
        if Arc::ptr_eq(&self.layout, &other.layout) {
            return (std::borrow::Cow::Borrowed(self), other.clone());
        }
        let spec = self.spec().meet(&other.spec());
        (
            std::borrow::Cow::Owned(self.truncate(spec)),
            other.truncate(spec),
        )
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        if Arc::ptr_eq(&self.layout, &other.layout) {
            return self.mul_same(other);
        }
        let (a, b) = self.aligned(other);
        a.mul_same(&b)
    }

    fn mul_same(&self, other: &Jet) -> Jet {
        let mut c = vec![0.0; self.c.len()];
        for &[i, j, k] in &self.layout.mul {
            c[k as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet {
            layout: self.layout.clone(),
            c,
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let (a, b) = self.aligned(other);
        Jet {
            layout: b.layout.clone(),
            c: a.c.iter().zip(&b.c).map(|(&x, &y)| f(x, y)).collect(),
        }
    }

    fn map_coeffs(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            c: self.c.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `Σ_k d_k h^k` with `h = self - value()`; `d` holds the univariate
    /// Taylor coefficients of the outer function at `value()`.
    fn compose(&self, d: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let k_max = self.spec().total_order();
        let mut r = Jet {
            layout: self.layout.clone(),
            c: vec![0.0; self.c.len()],
        };
        r.c[0] = d[k_max];
        for k in (0..k_max).rev() {
            r = r.mul_same(&h);
            r.c[0] += d[k];
        }
        r
    }

    fn order_plus_one(&self) -> usize {
        self.spec().total_order() + 1
    }

    pub fn recip(&self) -> Result<Jet> {
        let v = self.value();
        if v == 0.0 || !v.is_finite() {
            return Err(Error::Domain { op: "recip", value: v });
        }
        let d: Vec<f64> = (0..self.order_plus_one())
            .map(|k| (-1f64).powi(k as i32) / v.powi(k as i32 + 1))
            .collect();
        Ok(self.compose(&d))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        let v = other.value();
        if v == 0.0 || !v.is_finite() {
            return Err(Error::Domain { op: "div", value: v });
        }
        Ok(self.mul_ref(&other.recip()?))
    }

    pub fn powf(&self, p: f64) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::Domain { op: "powf", value: v });
        }
        let mut d = Vec::with_capacity(self.order_plus_one());
        let mut binom = 1.0;
        for k in 0..self.order_plus_one() {
            d.push(binom * v.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&d))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::Domain { op: "sqrt", value: v });
        }
        self.powf(0.5)
    }

    pub fn ln(&self) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::Domain { op: "ln", value: v });
        }
        let d: Vec<f64> = (0..self.order_plus_one())
            .map(|k| {
                if k == 0 {
                    v.ln()
                } else {
                    (-1f64).powi(k as i32 + 1) / (k as f64 * v.powi(k as i32))
                }
            })
            .collect();
        Ok(self.compose(&d))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let d: Vec<f64> = (0..self.order_plus_one())
            .map(|k| e / factorial(k))
            .collect();
        self.compose(&d)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..self.order_plus_one())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..self.order_plus_one())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&d)
    }

    pub fn sinh(&self) -> Jet {
        let v = self.value();
        let (s, c) = (v.sinh(), v.cosh());
        let d: Vec<f64> = (0..self.order_plus_one())
            .map(|k| if k % 2 == 0 { s } else { c } / factorial(k))
            .collect();
        self.compose(&d)
    }

    pub fn cosh(&self) -> Jet {
        let v = self.value();
        let (s, c) = (v.sinh(), v.cosh());
        let d: Vec<f64> = (0..self.order_plus_one())
            .map(|k| if k % 2 == 0 { c } else { s } / factorial(k))
            .collect();
        self.compose(&d)
    }

    /// Smooth maximum `(a + b + sqrt((a-b)^2 + width^2)) / 2`.
    pub fn smooth_max(&self, other: &Jet, width: f64) -> Result<Jet> {
        let diff = self - other;
        let root = (&diff * &diff + width * width).sqrt()?;
        Ok((&(self + other) + &root) * 0.5)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }
}

macro_rules! jet_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.zip(b, |x, y| x + y));
jet_binop!(Sub, sub, |a, b| a.zip(b, |x, y| x - y));
jet_binop!(Mul, mul, |a, b| a.mul_ref(b));

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if Arc::ptr_eq(&self.layout, &rhs.layout) {
            for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                *a += b;
            }
        } else {
            *self = &*self + rhs;
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map_coeffs(|x| -x)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut r = self.clone();
        r.c[0] += rhs;
        r
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.map_coeffs(|x| x * rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        &self * rhs
    }
}

impl Div<f64> for &Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.map_coeffs(|x| x / rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        &self / rhs
    }
}

/// Numeric type a metric formula can be evaluated on: plain `f64` for fast
/// pointwise work, [`Jet`] for derivatives.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant of the same kind (same jet orders) as `self`.
    fn constant_like(&self, v: f64) -> Self;
    fn try_div(&self, rhs: &Self) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;
    fn ln(&self) -> Result<Self>;
    fn powf(&self, p: f64) -> Result<Self>;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant_like(&self, v: f64) -> Self {
        v
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 || !rhs.is_finite() {
            return Err(Error::Domain {
                op: "div",
                value: *rhs,
            });
        }
        Ok(self / rhs)
    }
    fn sqrt(&self) -> Result<Self> {
        if *self < 0.0 || !self.is_finite() {
            return Err(Error::Domain {
                op: "sqrt",
                value: *self,
            });
        }
        Ok(f64::sqrt(*self))
    }
    fn ln(&self) -> Result<Self> {
        if *self <= 0.0 || !self.is_finite() {
            return Err(Error::Domain {
                op: "ln",
                value: *self,
            });
        }
        Ok(f64::ln(*self))
    }
    fn powf(&self, p: f64) -> Result<Self> {
        if *self < 0.0 || !self.is_finite() {
            return Err(Error::Domain {
                op: "powf",
                value: *self,
            });
        }
        Ok(f64::powf(*self, p))
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn constant_like(&self, v: f64) -> Self {
        let mut c = vec![0.0; self.c.len()];
        c[0] = v;
        Jet {
            layout: self.layout.clone(),
            c,
        }
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        Jet::try_div(self, rhs)
    }
    fn sqrt(&self) -> Result<Self> {
        Jet::sqrt(self)
    }
    fn ln(&self) -> Result<Self> {
        Jet::ln(self)
    }
    fn powf(&self, p: f64) -> Result<Self> {
        Jet::powf(self, p)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn sinh(&self) -> Self {
        Jet::sinh(self)
    }
    fn cosh(&self) -> Self {
        Jet::cosh(self)
    }
}

/// Step size and extrapolation depth of the finite-difference oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdScheme {
    pub step: f64,
    pub richardson_levels: usize,
}

impl Default for FdScheme {
    fn default() -> Self {
        Self {
            step: 1e-3,
            richardson_levels: 2,
        }
    }
}

impl FdScheme {
    /// Base step grown with the derivative order so roundoff stays below
    /// the extrapolated truncation error.
    pub fn for_order(order: usize) -> Self {
        let step = match order {
            0 | 1 => 5e-3,
            2 => 1e-2,
            3 => 2e-2,
            _ => 4e-2,
        };
        Self {
            step,
            richardson_levels: 2,
        }
    }
}

/// Finite-difference estimate with an error indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdEstimate {
    pub value: f64,
    pub error: f64,
}

fn central_stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => &[
            (-3, -0.5),
            (-2, 2.0),
            (-1, -2.5),
            (1, 2.5),
            (2, -2.0),
            (3, 0.5),
        ],
    }
}

/// Mixed partial `∂^a_x ∂^b_y f` by tensor-product central differences with
/// Richardson extrapolation. `point` holds `2n` coordinates `(x, y)`.
pub fn fd_oracle<F>(f: F, point: &[f64], a: &[usize], b: &[usize], scheme: FdScheme) -> Result<FdEstimate>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if scheme.step <= 0.0 || !(1..=3).contains(&scheme.richardson_levels) {
        return Err(Error::Config(format!("invalid finite-difference scheme {scheme:?}")));
    }
    let orders: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    if orders.len() != point.len() {
        return Err(Error::Config(format!(
            "multi-index of length {} does not match point of length {}",
            orders.len(),
            point.len()
        )));
    }
    if orders.iter().any(|&o| o > 5) {
        return Err(Error::Config("finite differences limited to order 5 per variable".into()));
    }
    let active: Vec<usize> = (0..orders.len()).filter(|&v| orders[v] > 0).collect();
    let total: usize = orders.iter().sum();
    let estimate = |h_scale: f64| -> Result<f64> {
        let steps: Vec<f64> = active
            .iter()
            .map(|&v| scheme.step * h_scale * point[v].abs().max(1.0))
            .collect();
        let stencils: Vec<&[(i32, f64)]> = active.iter().map(|&v| central_stencil(orders[v])).collect();
        let mut acc = 0.0;
        let mut idx = vec![0usize; active.len()];
        let mut p = point.to_vec();
        loop {
            let mut w = 1.0;
            for (k, &v) in active.iter().enumerate() {
                let (off, c) = stencils[k][idx[k]];
                p[v] = point[v] + off as f64 * steps[k];
                w *= c;
            }
            let val = f(&p)?;
            if !val.is_finite() {
                return Err(Error::OracleFailure(format!(
                    "non-finite evaluation inside stencil at {p:?}"
                )));
            }
            acc += w * val;
            // odometer over stencil positions
            let mut k = 0;
            loop {
                if k == active.len() {
                    let denom: f64 = steps
                        .iter()
                        .zip(&active)
                        .map(|(h, &v)| h.powi(orders[v] as i32))
                        .product();
                    return Ok(acc / denom);
                }
                idx[k] += 1;
                if idx[k] < stencils[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    };
    if total == 0 {
        let v = f(point)?;
        return Ok(FdEstimate { value: v, error: 0.0 });
    }
    let levels = scheme.richardson_levels;
    let mut table: Vec<f64> = (0..=levels)
        .map(|l| estimate(0.5f64.powi(l as i32)))
        .collect::<Result<_>>()?;
    let mut last_diff = 0.0;
    // each pass removes the next even power of h
    for pass in 1..=levels {
        let factor = 4f64.powi(pass as i32);
        let next: Vec<f64> = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        last_diff = (next[next.len() - 1] - table[table.len() - 1]).abs();
        table = next;
    }
    Ok(FdEstimate {
        value: table[table.len() - 1],
        error: last_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(ox: usize, oy: usize) -> JetSpec {
        JetSpec::new(2, ox, oy).unwrap()
    }

    #[test]
    fn storage_covers_all_multi_indices() {
        for (ox, oy) in [(0, 0), (1, 2), (2, 5)] {
            let s = spec(ox, oy);
            assert_eq!(layout(s).len(), s.len());
        }
        assert_eq!(JetSpec::new(3, 2, 5).unwrap().len(), 10 * 56);
    }

    #[test]
    fn rejects_orders_beyond_caps() {
        assert!(matches!(JetSpec::new(2, 3, 0), Err(Error::Config(_))));
        assert!(matches!(JetSpec::new(2, 0, 6), Err(Error::Config(_))));
        assert!(matches!(JetSpec::new(1, 0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn polynomial_in_fiber_is_exact() {
        let v = lift(&[0.0, 0.0, 1.0, 0.0], spec(0, 2)).unwrap();
        let f = &v[2] * &v[2] + &v[3] * &v[3];
        assert_eq!(f.value(), 1.0);
        assert_eq!(f.coeff(&[0, 0], &[0, 2]).unwrap(), 1.0);
        assert_eq!(f.partial(&[0, 0], &[0, 2]).unwrap(), 2.0);
        assert_eq!(f.partial(&[0, 0], &[1, 0]).unwrap(), 2.0);
    }

    #[test]
    fn constant_has_no_higher_coefficients() {
        let v = lift(&[0.3, 0.1, 1.0, 2.0], spec(2, 3)).unwrap();
        let seven = v[0].constant_like(7.0);
        assert_eq!(seven.value(), 7.0);
        assert!(seven.coefficients()[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn euclidean_norm_value_and_gradient() {
        let v = lift(&[0.0, 0.0, 3.0, 4.0], spec(0, 2)).unwrap();
        let f = (&v[2] * &v[2] + &v[3] * &v[3]).sqrt().unwrap();
        assert_relative_eq!(f.value(), 5.0, epsilon = 1e-15);
        assert_relative_eq!(f.partial(&[0, 0], &[1, 0]).unwrap(), 0.6, epsilon = 1e-15);
        assert_relative_eq!(f.partial(&[0, 0], &[0, 1]).unwrap(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn sqrt_of_shifted_variable() {
        let v = lift(&[4.0, 0.0, 1.0, 0.0], spec(1, 0)).unwrap();
        let r = v[0].sqrt().unwrap();
        assert_eq!(r.value(), 2.0);
        assert_relative_eq!(r.coeff(&[1, 0], &[0, 0]).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn raw_partials_of_monomials() {
        let v = lift(&[0.4, -0.2, 0.7, 1.3], spec(2, 5)).unwrap();
        let y1_cubed = &v[2] * &v[2] * &v[2];
        assert_relative_eq!(y1_cubed.partial(&[0, 0], &[3, 0]).unwrap(), 6.0, epsilon = 1e-14);
        let x1y1 = &v[0] * &v[2];
        assert_relative_eq!(x1y1.partial(&[1, 0], &[1, 0]).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(x1y1.partial(&[3, 0], &[0, 0]), Err(Error::Config(_))));
    }

    #[test]
    fn domain_errors_identify_operation() {
        let v = lift(&[0.0, -1.0, 1.0, 1.0], spec(1, 1)).unwrap();
        assert!(matches!(v[0].recip(), Err(Error::Domain { op: "recip", .. })));
        assert!(matches!(v[1].sqrt(), Err(Error::Domain { op: "sqrt", .. })));
        assert!(matches!(v[1].ln(), Err(Error::Domain { op: "ln", .. })));
        assert!(matches!(v[2].try_div(&v[0]), Err(Error::Domain { op: "div", .. })));
    }

    fn random_jet(rng: &mut ChaCha8Rng) -> Jet {
        let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let v = lift(&p, spec(2, 3)).unwrap();
        let a: f64 = rng.gen_range(-1.0..1.0);
        // smooth composition with nonzero mixed terms
        (&v[0] * &v[2] * a + &v[1].sin() + &v[3] * &v[3] * 0.5 + &v[0] * &v[1] * &v[3]).exp()
            * 0.3
    }

    #[test]
    fn ln_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let j = random_jet(&mut rng);
            let back = j.exp().ln().unwrap();
            for (x, y) in back.coefficients().iter().zip(j.coefficients()) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn product_rule_for_squares() {
        // d/dv (j^2) == 2 j dj/dv, compared coefficientwise on the common orders
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let j = random_jet(&mut rng);
            for var in 0..2 {
                let lhs = (&j * &j).d_y(var).unwrap();
                let rhs = &(&j * &j.d_y(var).unwrap()) * 2.0;
                let lhs = lhs.truncate(rhs.spec());
                for (x, y) in lhs.coefficients().iter().zip(rhs.coefficients()) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trig_and_hyperbolic_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let j = random_jet(&mut rng);
        let one = &j.sin() * &j.sin() + &j.cos() * &j.cos();
        let hyp = &j.cosh() * &j.cosh() - &j.sinh() * &j.sinh();
        for jet in [one, hyp] {
            assert!((jet.value() - 1.0).abs() < 1e-13);
            assert!(jet.coefficients()[1..].iter().all(|c| c.abs() < 1e-12));
        }
        let p = j.powf(2.5).unwrap();
        let q = &(&j * &j) * &j.sqrt().unwrap();
        for (x, y) in p.coefficients().iter().zip(q.coefficients()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_max_tracks_larger_argument() {
        let v = lift(&[2.0, -1.0, 1.0, 1.0], spec(1, 1)).unwrap();
        let m = v[0].smooth_max(&v[1], 1e-6).unwrap();
        assert!((m.value() - 2.0).abs() < 1e-9);
        assert!((m.partial(&[1, 0], &[0, 0]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fd_oracle_known_derivatives() {
        let sin = |p: &[f64]| Ok(p[0].sin());
        let e = fd_oracle(sin, &[0.0, 0.0, 0.0, 0.0], &[1, 0], &[0, 0], FdScheme::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-10, "{e:?}");
        let quartic = |p: &[f64]| Ok(p[0].powi(4));
        let e = fd_oracle(quartic, &[0.0; 4], &[4, 0], &[0, 0], FdScheme::for_order(4)).unwrap();
        assert!((e.value - 24.0).abs() < 1e-6, "{e:?}");
    }

    #[test]
    fn fd_oracle_flags_non_finite_stencils() {
        let bad = |p: &[f64]| Ok(p[0].sqrt());
        let r = fd_oracle(bad, &[0.0; 4], &[1, 0], &[0, 0], FdScheme::default());
        assert!(matches!(r, Err(Error::OracleFailure(_))));
    }

    #[test]
    fn jet_partials_match_fd_on_random_compositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let a: f64 = rng.gen_range(-1.0..1.0);
            let f_generic = |v: &[Jet]| -> Jet {
                (&v[0] * &v[2] * a + &v[1].sin() + &v[3] * &v[3] * 0.5).exp()
            };
            let f_plain = |q: &[f64]| -> Result<f64> {
                Ok((q[0] * q[2] * a + q[1].sin() + q[3] * q[3] * 0.5).exp())
            };
            let jet = f_generic(&lift(&p, spec(2, 2)).unwrap());
            let xa: [usize; 2] = [rng.gen_range(0..2), rng.gen_range(0..2)];
            let ya: [usize; 2] = [rng.gen_range(0..2), rng.gen_range(0..2)];
            if xa.iter().sum::<usize>() + ya.iter().sum::<usize>() > 3 {
                continue;
            }
            let order = xa.iter().sum::<usize>() + ya.iter().sum::<usize>();
            let exact = jet.partial(&xa, &ya).unwrap();
            let fd = fd_oracle(f_plain, &p, &xa, &ya, FdScheme::for_order(order)).unwrap();
            assert!(
                (exact - fd.value).abs() <= (1e-6 * exact.abs()).max(1e-8),
                "{exact} vs {fd:?} at {p:?} {xa:?} {ya:?} a={a}"
            );
        }
    }
}
