//! Deterministic sample generation: Halton points, seeded random tangent
//! samples and stratified Monte-Carlo over boxes and balls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % b) as f64;
        index /= b;
    }
    r
}

/// The `index`-th Halton point in `[0,1)^dim` (index 0 is skipped).
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
    (0..dim).map(|k| halton(index + 1, PRIMES[k])).collect()
}

/// Maps `u ∈ [0,1)^n` to the unit sphere `S^{n-1}` (Box-Muller on pairs).
pub fn unit_direction(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut g = Vec::with_capacity(n + 1);
    let mut k = 0;
    while g.len() < n {
        let u1 = u[k % n].clamp(1e-12, 1.0 - 1e-12);
        let u2 = u[(k + 1) % n];
        let r = (-2.0 * u1.ln()).sqrt();
        let a = 2.0 * std::f64::consts::PI * (u2 + 0.618_033_988_749_894_9 * (k / 2) as f64);
        g.push(r * a.cos());
        g.push(r * a.sin());
        k += 2;
    }
    g.truncate(n);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return e;
    }
    g.iter().map(|v| v / norm).collect()
}

/// Seeded uniform direction on `S^{n-1}`.
pub fn random_direction(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: f64 = v.iter().map(|a| a * a).sum();
        if r2 > 1e-6 && r2 <= 1.0 {
            let r = r2.sqrt();
            return v.into_iter().map(|a| a / r).collect();
        }
    }
}

/// Uniform point in the ball of radius `r` about the origin.
pub fn random_in_ball(rng: &mut impl Rng, n: usize, r: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().map(|a| a * a).sum::<f64>() < 1.0 {
            return v.into_iter().map(|a| a * r).collect();
        }
    }
}

/// A point of the slit tangent bundle.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TangentSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Seeded tangent samples: base points from the metric's sampling region,
/// uniform directions scaled by a factor in `[0.5, 2]`.
pub fn tangent_samples(metric: &crate::metric_zoo::MetricSpec, count: usize, seed: u64) -> Vec<TangentSample> {
    let n = metric.dim();
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let u: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
            let x = metric.sample_point(&u);
            let s = r.gen_range(0.5..2.0);
            let y = random_direction(&mut r, n).into_iter().map(|v| v * s).collect();
            TangentSample { x, y }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Region sampled by [`stratified_mc`].
#[derive(Clone, Debug, PartialEq)]
pub enum McRegion {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl McRegion {
    pub fn dim(&self) -> usize {
        match self {
            McRegion::Box { lo, .. } => lo.len(),
            McRegion::Ball { center, .. } => center.len(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            McRegion::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            McRegion::Ball { radius, center } => {
                crate::quadrature::unit_ball_volume(center.len()) * radius.powi(center.len() as i32)
            }
        }
    }

    /// Volume-preserving map from the unit cube.
    fn map(&self, u: &[f64]) -> Vec<f64> {
        match self {
            McRegion::Box { lo, hi } => u.iter().zip(lo.iter().zip(hi)).map(|(t, (a, b))| a + t * (b - a)).collect(),
            McRegion::Ball { center, radius } => {
                let n = center.len();
                let rho = radius * u[0].powf(1.0 / n as f64);
                let d = match n {
                    2 => {
                        let a = 2.0 * std::f64::consts::PI * u[1];
                        vec![a.cos(), a.sin()]
                    }
                    3 => {
                        let z = 2.0 * u[1] - 1.0;
                        let s = (1.0 - z * z).max(0.0).sqrt();
                        let a = 2.0 * std::f64::consts::PI * u[2];
                        vec![s * a.cos(), s * a.sin(), z]
                    }
                    _ => unit_direction(&u[1..]),
                };
                center.iter().zip(d).map(|(c, di)| c + rho * di).collect()
            }
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Samples where the integrand was nonzero.
    pub hits: usize,
}

/// Stratified Monte-Carlo of `∫_region f`: a jittered grid on the unit
/// cube with two samples per cell, mapped volume-preservingly onto the
/// region. Cells are processed in fixed-size chunks with per-chunk ChaCha
/// streams, so the result is bit-identical for a given seed regardless
/// of thread count.
pub fn stratified_mc<F>(f: F, region: &McRegion, n_samples: usize, seed: u64) -> McEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = region.dim();
    let per_axis = ((n_samples as f64 / 2.0).powf(1.0 / dim as f64).floor() as usize).max(1);
    let cells = per_axis.pow(dim as u32);
    const CHUNK: usize = 4096;
    let n_chunks = cells.div_ceil(CHUNK);
    let vol = region.volume();
    let partial: Vec<(f64, f64, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64 + 1);
            let mut sum = 0.0;
            let mut var = 0.0;
            let mut hits = 0;
            let mut u = vec![0.0; dim];
            for cell in chunk * CHUNK..((chunk + 1) * CHUNK).min(cells) {
                let mut vals = [0.0; 2];
                for v in vals.iter_mut() {
                    let mut c = cell;
                    for ui in u.iter_mut() {
                        let k = c % per_axis;
                        c /= per_axis;
                        *ui = (k as f64 + rng.gen::<f64>()) / per_axis as f64;
                    }
                    *v = f(&region.map(&u));
                    if *v != 0.0 {
                        hits += 1;
                    }
                }
                let cell_vol = vol / cells as f64;
                sum += cell_vol * 0.5 * (vals[0] + vals[1]);
                // unbiased per-cell variance of the mean of two samples
                let d = vals[0] - vals[1];
                var += cell_vol * cell_vol * d * d / 4.0;
            }
            (sum, var, hits)
        })
        .collect();
    let (value, var, hits) = partial
        .iter()
        .fold((0.0, 0.0, 0), |(s, v, h), &(a, b, c)| (s + a, v + b, h + c));
    McEstimate {
        value,
        stderr: var.sqrt(),
        n_samples: 2 * cells,
        hits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn directions_are_unit() {
        for i in 0..50 {
            for n in 2..5 {
                let d = unit_direction(&halton_point(i, n));
                let r: f64 = d.iter().map(|v| v * v).sum();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stratified_disc_area() {
        let region = McRegion::Box {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        };
        let est = stratified_mc(|p| if p[0] * p[0] + p[1] * p[1] < 1.0 { 1.0 } else { 0.0 }, &region, 200_000, 7);
        assert!((est.value - std::f64::consts::PI).abs() < 3.0 * est.stderr + 1e-12, "{est:?}");
        assert!(est.stderr < 1e-3);
        let again = stratified_mc(|p| if p[0] * p[0] + p[1] * p[1] < 1.0 { 1.0 } else { 0.0 }, &region, 200_000, 7);
        assert_eq!(est, again);
    }

    #[test]
    fn ball_map_preserves_volume() {
        let region = McRegion::Ball {
            center: vec![0.2, 0.0, 0.1],
            radius: 0.5,
        };
        let est = stratified_mc(|_| 1.0, &region, 10_000, 1);
        assert!((est.value - region.volume()).abs() < 1e-12);
        // mean of |p - c|^2 over the ball is 3r^2/5
        let m = stratified_mc(
            |p| (p[0] - 0.2).powi(2) + p[1].powi(2) + (p[2] - 0.1).powi(2),
            &region,
            200_000,
            1,
        );
        let exact = region.volume() * 0.6 * 0.25;
        assert!((m.value - exact).abs() < 4.0 * m.stderr + 1e-9, "{m:?} vs {exact}");
    }
}
