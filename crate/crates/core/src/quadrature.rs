//! Quadrature rules: Gauss-Legendre nodes, adaptive Gauss-Kronrod on
//! intervals, and direction grids on the unit sphere in dimensions 2 and 3.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
/// Returns the value and an error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let mut segments = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let (total, err): (f64, f64) = segments
            .iter()
            .fold((0.0, 0.0), |(s, e), &(_, _, (v, ev))| (s + v, e + ev));
        if !total.is_finite() {
            return Err(Error::NumericalIntegrity("non-finite integrand".into()));
        }
        if err <= tol.max(1e-15 * total.abs()) {
            return Ok((total, err));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("non-empty segment list");
        let (lo, hi, _) = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        segments.push((lo, mid, gk15(&f, lo, mid)));
        segments.push((mid, hi, gk15(&f, mid, hi)));
    }
    let (total, err) = segments
        .iter()
        .fold((0.0, 0.0), |(s, e), &(_, _, (v, ev))| (s + v, e + ev));
    if err <= 1e3 * tol {
        Ok((total, err))
    } else {
        Err(Error::NumericalIntegrity(format!(
            "adaptive quadrature did not converge (error {err:e} > {tol:e})"
        )))
    }
}

/// Weighted directions on the unit sphere `S^{n-1}`.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    /// Uniform trapezoid rule on the circle.
    pub fn circle(m: usize) -> SphereGrid {
        let w = 2.0 * PI / m as f64;
        SphereGrid {
            dim: 2,
            directions: (0..m)
                .map(|k| {
                    let t = w * k as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect(),
            weights: vec![w; m],
        }
    }

    /// Product rule on `S^2`: Gauss-Legendre in `z = cos θ`, trapezoid in `φ`.
    pub fn sphere(m_z: usize, m_phi: usize) -> SphereGrid {
        let (zs, wz) = gauss_legendre(m_z);
        let wphi = 2.0 * PI / m_phi as f64;
        let mut directions = Vec::with_capacity(m_z * m_phi);
        let mut weights = Vec::with_capacity(m_z * m_phi);
        for (z, w) in zs.iter().zip(&wz) {
            let s = (1.0 - z * z).sqrt();
            for k in 0..m_phi {
                let p = wphi * k as f64;
                directions.push(vec![s * p.cos(), s * p.sin(), *z]);
                weights.push(w * wphi);
            }
        }
        SphereGrid {
            dim: 3,
            directions,
            weights,
        }
    }

    /// Default grid: 720 angles on the circle, 64 x 128 product grid on `S^2`.
    pub fn standard(dim: usize) -> Result<SphereGrid> {
        match dim {
            2 => Ok(Self::circle(720)),
            3 => Ok(Self::sphere(64, 128)),
            _ => Err(Error::Config(format!(
                "sphere quadrature implemented for n = 2, 3 (got {dim})"
            ))),
        }
    }

    /// A coarser grid with roughly half the resolution, used for error estimates.
    pub fn coarse(dim: usize) -> Result<SphereGrid> {
        match dim {
            2 => Ok(Self::circle(360)),
            3 => Ok(Self::sphere(48, 96)),
            _ => Err(Error::Config(format!(
                "sphere quadrature implemented for n = 2, 3 (got {dim})"
            ))),
        }
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * f(d))
            .sum()
    }

    pub fn try_integrate(&self, f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (d, w) in self.directions.iter().zip(&self.weights) {
            acc += w * f(d)?;
        }
        Ok(acc)
    }
}

/// Euclidean volume of the unit ball `B^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Euclidean area of the unit sphere `S^{n-1}`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_quadrature_on_peaked_integrand() {
        let (v, _) = integrate(|t| 1.0 / (1e-4 + t * t), -1.0, 1.0, 1e-12).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn sphere_grids_reproduce_areas() {
        assert!((SphereGrid::circle(720).integrate(|_| 1.0) - 2.0 * PI).abs() < 1e-12);
        let g = SphereGrid::sphere(64, 128);
        assert!((g.integrate(|_| 1.0) - 4.0 * PI).abs() < 1e-12);
        // ∫ z^2 = 4π/3
        assert!((g.integrate(|d| d[2] * d[2]) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }
}
