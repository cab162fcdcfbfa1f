//! The identity suite behind `verify`.

use std::f64::consts::PI;
use std::time::Instant;

use finsler_core::comparison::{
    conjugate_point_bound, model_volume, ratio_monotonicity_check, CheckStatus, VolumeRoute,
};
use finsler_core::curvature_lab::{
    berwald_curvature, bh_density_field, constant_curvature_ode_check, dot_landsberg_residual, jacobi_oracle,
    landsberg_by_transport, landsberg_dot, landsberg_from_berwald, projective_ode_check, riemann_curvature,
    s_curvature, s_hessian_residual,
};
use finsler_core::measures::{ball_volume_mc, bh_volume, funk_ball_formula, small_ball_probe, BallSpec, DistanceSource};
use finsler_core::metric_zoo::{okada_residual, validate, MetricParams, MetricSpec};
use finsler_core::minkowski_lab::{
    cartan_torsion, fundamental_tensor, indicatrix_gauss_oracle, indicatrix_sectional_formula, santalo_volume,
};
use finsler_core::sampling::{tangent_samples, McRegion, TangentSample};
use finsler_core::spray_geodesics::{parallel_transport, spray};
use finsler_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub id: String,
    pub anchor: String,
    pub status: Status,
    pub measured: Option<f64>,
    /// Target value when the check compares against a constant.
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub metric: String,
    pub label: String,
    pub config: RunConfig,
    pub rows: Vec<SuiteRow>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

/// Wall-clock per row, kept out of the report so reruns stay byte-identical.
pub type Timings = Vec<(String, f64)>;

enum Bound {
    /// `|measured - expected| ≤ tol`, or `measured ≤ tol` without an expectation.
    Within,
    /// `measured ≥ tol`.
    AtLeast,
}

struct Measured {
    value: f64,
    expected: Option<f64>,
    note: Option<String>,
}

fn value(v: f64) -> Measured {
    Measured {
        value: v,
        expected: None,
        note: None,
    }
}

enum Outcome {
    Done(Measured),
    Skip(String),
}

type Runner<'a> = Box<dyn Fn() -> Result<Outcome> + 'a>;

struct Check<'a> {
    id: &'static str,
    anchor: &'static str,
    tol: f64,
    bound: Bound,
    run: Runner<'a>,
}

fn check<'a>(id: &'static str, anchor: &'static str, tol: f64, run: impl Fn() -> Result<Outcome> + 'a) -> Check<'a> {
    Check {
        id,
        anchor,
        tol,
        bound: Bound::Within,
        run: Box::new(run),
    }
}

fn done(v: f64) -> Result<Outcome> {
    Ok(Outcome::Done(value(v)))
}

fn worst<F>(samples: &[TangentSample], mut f: F) -> Result<f64>
where
    F: FnMut(&TangentSample) -> Result<f64>,
{
    let mut w: f64 = 0.0;
    for s in samples {
        w = w.max(f(s)?);
    }
    Ok(w)
}

fn principal_spread(m: &MetricSpec, samples: &[TangentSample], kappa: f64) -> Result<Outcome> {
    let mut mean = 0.0;
    let mut count = 0.0;
    let mut dev: f64 = 0.0;
    for s in samples {
        for k in riemann_curvature(m, &s.x, &s.y)?.principal {
            mean += k;
            count += 1.0;
            dev = dev.max((k - kappa).abs());
        }
    }
    let mean = mean / count;
    Ok(Outcome::Done(Measured {
        value: mean,
        expected: Some(kappa),
        note: Some(format!("max |κ_i - ({kappa})| = {dev:.3e} over {} samples", samples.len())),
    }))
}

fn with_dim(id: &str, base: &MetricParams, n: usize) -> Result<MetricSpec> {
    MetricSpec::from_id(
        id,
        &MetricParams {
            dim: Some(n),
            ..base.clone()
        },
    )
}

fn is_unit_ball(m: &MetricSpec) -> bool {
    matches!(m.params.domain.as_deref(), None | Some("ball"))
}

/// Checks that apply to `m`, in report order.
fn checks<'a>(m: &'a MetricSpec, cfg: &'a RunConfig, samples: &'a [TangentSample]) -> Vec<Check<'a>> {
    let n = m.dim();
    let seed = cfg.seed_or(1);
    let mc = cfg.mc_samples.unwrap_or(crate::DEFAULT_MC_SAMPLES);
    let mut out = vec![
        check("metric-validity", "positive-definite fundamental tensor and homogeneity on samples", 0.0, move || {
            match validate(m, cfg.samples_or(20).max(20)) {
                Ok(()) => done(0.0),
                Err(Error::MetricValidity { reason, .. }) => Ok(Outcome::Done(Measured {
                    value: 1.0,
                    expected: None,
                    note: Some(reason),
                })),
                Err(e) => Err(e),
            }
        }),
        check("homogeneity", "F is positively 1-homogeneous in y", 1e-10, move || {
            done(worst(samples, |s| {
                let f = m.f(&s.x, &s.y)?;
                let y2: Vec<f64> = s.y.iter().map(|v| 2.5 * v).collect();
                Ok((m.f(&s.x, &y2)? - 2.5 * f).abs() / f)
            })?)
        }),
        check("euler-fundamental-tensor", "g_y(y, y) = F(y)²", 1e-10, move || {
            done(worst(samples, |s| {
                let g = fundamental_tensor(m, &s.x, &s.y)?;
                let f2 = m.f_sq(&s.x, &s.y)?;
                Ok((g.inner(&s.y, &s.y) - f2).abs() / f2)
            })?)
        }),
        check("cartan-euler", "C_y(y, u, v) = 0", 1e-9, move || {
            done(worst(samples, |s| {
                let c = cartan_torsion(m, &s.x, &s.y)?;
                let mut w: f64 = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        w = w.max((0..n).map(|i| s.y[i] * c.get(&[i, j, k])).sum::<f64>().abs());
                    }
                }
                Ok(w)
            })?)
        }),
        check("spray-homogeneity", "G(x, λy) = λ² G(x, y)", 1e-9, move || {
            done(worst(samples, |s| {
                let g1 = spray(m, &s.x, &s.y)?;
                let y2: Vec<f64> = s.y.iter().map(|v| 2.5 * v).collect();
                let g2 = spray(m, &s.x, &y2)?;
                let scale = 1.0 + g1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                Ok(g1.iter().zip(&g2).fold(0.0f64, |a, (p, q)| a.max((q - 6.25 * p).abs())) / scale)
            })?)
        }),
        check("landsberg-berwald-identity", "L_y(u,v,w) = -½ g_y(B_y(u,v,w), y)", 1e-6, move || {
            done(worst(samples, |s| {
                let b = berwald_curvature(m, &s.x, &s.y)?.b.max_abs();
                let l = landsberg_from_berwald(m, &s.x, &s.y)?;
                let t = landsberg_by_transport(m, &s.x, &s.y, 1e-2)?;
                Ok(l.max_diff(&t.tensor) / (1.0 + b))
            })?)
        }),
        check("s-hessian-mean-berwald", "½ Hess_y S = E_y", 1e-5, move || {
            let density = bh_density_field(m);
            done(worst(samples, |s| s_hessian_residual(m, &s.x, &s.y, &density))?)
        }),
        check("riemann-self-adjoint", "R_y is g_y-self-adjoint and R_y(y) = 0", 1e-8, move || {
            done(worst(samples, |s| {
                let r = riemann_curvature(m, &s.x, &s.y)?;
                let scale = 1.0 + r.r.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
                Ok(r.self_adjoint_residual.max(r.ry_residual) / scale)
            })?)
        }),
        check("transport-gram", "parallel transport preserves g_ċ(U, V) along geodesics", 1e-8, move || {
            let frame: Vec<Vec<f64>> = (0..n).map(|k| (0..n).map(|i| if i == k { 1.0 } else { 0.3 }).collect()).collect();
            let mut w: f64 = 0.0;
            let mut exits = 0;
            for s in samples.iter().take(3) {
                match parallel_transport(m, &s.x, &s.y, &frame, 0.5, 5) {
                    Ok(r) => w = w.max(r.gram_drift),
                    Err(Error::Range { .. }) => exits += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(Outcome::Done(Measured {
                value: w,
                expected: None,
                note: (exits > 0).then(|| format!("{exits} geodesics left the chart")),
            }))
        }),
        check("jacobi-equation", "Jacobi fields of the spray satisfy D_ċD_ċJ + R_ċ(J) = 0", 1e-5, move || {
            let mut w: f64 = 0.0;
            let mut used = 0;
            for s in samples.iter().take(3) {
                let f = m.f(&s.x, &s.y)?;
                let u: Vec<f64> = s.y.iter().map(|v| v / f).collect();
                let v: Vec<f64> = (0..n).map(|i| if i == 0 { -u[1] } else if i == 1 { u[0] } else { 0.2 }).collect();
                match jacobi_oracle(m, &s.x, &u, &v, 1.0) {
                    Ok(r) => {
                        w = w.max(r.max_residual);
                        used += 1;
                    }
                    Err(Error::Range { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            if used == 0 {
                return Ok(Outcome::Skip("every sampled geodesic left the chart".into()));
            }
            done(w)
        }),
        check("seeded-mc-determinism", "seeded Monte-Carlo is bitwise reproducible", 0.0, move || {
            let x = m.sample_point(&vec![0.5; n]);
            let region = McRegion::Ball {
                center: x,
                radius: 0.05,
            };
            let a = bh_volume(m, |_| true, &region, 4_000, seed)?;
            let b = bh_volume(m, |_| true, &region, 4_000, seed)?;
            done(if a.value.to_bits() == b.value.to_bits() { 0.0 } else { 1.0 })
        }),
    ];
    match m.id.as_str() {
        "euclidean" => {
            out.push(check("flat-curvature", "vanishing Riemann curvature of a Minkowski space", 1e-10, move || {
                done(worst(samples, |s| {
                    Ok(riemann_curvature(m, &s.x, &s.y)?.principal.iter().fold(0.0f64, |a, k| a.max(k.abs())))
                })?)
            }));
            out.push(check("flat-berwald", "vanishing Berwald curvature of a Minkowski space", 1e-10, move || {
                done(worst(samples, |s| Ok(berwald_curvature(m, &s.x, &s.y)?.b.max_abs()))?)
            }));
            out.push(check("flat-s-curvature", "vanishing S-curvature of a Minkowski space", 1e-10, move || {
                let density = bh_density_field(m);
                done(worst(samples, |s| Ok(s_curvature(m, &s.x, &s.y, &density)?.s.abs()))?)
            }));
            out.push(check("santalo-euclidean", "indicatrix volume of the Euclidean norm", 1e-5, move || {
                if n > 3 {
                    return Ok(Outcome::Skip("sphere quadrature for n = 2, 3".into()));
                }
                let area = if n == 2 { 2.0 * PI } else { 4.0 * PI };
                Ok(Outcome::Done(Measured {
                    value: santalo_volume(m, &vec![0.0; n])?,
                    expected: Some(area),
                    note: None,
                }))
            }));
        }
        "sphere" => {
            out.push(check("sphere-curvature", "round sphere has constant curvature 1", 1e-6, move || {
                principal_spread(m, samples, 1.0)
            }));
            out.push(check("sphere-conjugate-point", "first conjugate point at π/√λ under Ric ≥ (n-1)λ", 1e-3, move || {
                let mut x = vec![0.0; n];
                x[0] = 0.5;
                let mut y = vec![0.0; n];
                y[1] = 1.0;
                let r = conjugate_point_bound(m, &x, &y, 1.0)?;
                match r.first_conjugate {
                    Some(t) => Ok(Outcome::Done(Measured {
                        value: t,
                        expected: Some(PI),
                        note: None,
                    })),
                    None => Ok(Outcome::Skip(r.inconclusive.unwrap_or_default())),
                }
            }));
            out.push(check("small-ball-sphere", "second-order coefficient of small-ball volume", 0.05, move || {
                if n > 3 {
                    return Ok(Outcome::Skip("polar quadrature for n = 2, 3".into()));
                }
                let mut x = vec![0.0; n];
                x[0] = 0.2;
                let p = small_ball_probe(m, &x, &[0.02, 0.04, 0.06, 0.08, 0.1], false)?;
                let exact = -((n * (n - 1)) as f64) / (6.0 * (n + 2) as f64);
                Ok(Outcome::Done(Measured {
                    value: p.c2 / exact,
                    expected: Some(1.0),
                    note: Some(format!(
                        "c₂ = {:.6}, Ricci oracle {:.6}, r(x) coefficient {:.6}",
                        p.c2, p.ricci_coefficient, p.r_coefficient
                    )),
                }))
            }));
            out.push(check("sphere-volume-ratio", "μ(B(x,r))/V_{λ,0}(r) non-increasing under Ric ≥ (n-1)λ", 0.0, move || {
                if n > 3 {
                    return Ok(Outcome::Skip("polar quadrature for n = 2, 3".into()));
                }
                let rep = ratio_monotonicity_check(m, &vec![0.0; n], 1.0, 0.0, &[0.5, 1.0, 1.5, 2.0, 2.5], VolumeRoute::Polar)?;
                match rep.status {
                    CheckStatus::Skipped => Ok(Outcome::Skip("curvature-bound sweep failed".into())),
                    _ => done(rep.worst_increase.max(0.0)),
                }
            }));
        }
        "hyperbolic" => {
            out.push(check("hyperbolic-curvature", "hyperbolic space has constant curvature -1", 1e-6, move || {
                principal_spread(m, samples, -1.0)
            }));
        }
        "berwald_product" => {
            out.push(check("berwald-vanishing-b", "Berwald Randers metric: B = 0", 1e-8, move || {
                done(worst(samples, |s| Ok(berwald_curvature(m, &s.x, &s.y)?.b.max_abs()))?)
            }));
            out.push(check("berwald-vanishing-l", "every Berwald space is Landsberg: L = 0", 1e-7, move || {
                done(worst(samples, |s| Ok(landsberg_from_berwald(m, &s.x, &s.y)?.max_abs()))?)
            }));
            out.push(check("berwald-vanishing-s", "Berwald metric with BH measure: S = 0", 1e-6, move || {
                let density = bh_density_field(m);
                done(worst(samples, |s| Ok(s_curvature(m, &s.x, &s.y, &density)?.s.abs()))?)
            }));
            out.push(check("berwald-transport-norm", "Berwald transport preserves the Minkowski norms", 1e-6, move || {
                let frame = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.7, -0.4], vec![0.2, 0.1, 1.0]];
                done(worst(&samples[..samples.len().min(4)], |s| {
                    Ok(parallel_transport(m, &s.x, &s.y, &frame, 1.0, 20)?.norm_drift)
                })?)
            }));
        }
        "quartic_norm" => {
            out.push(check("minkowski-flat", "Minkowski norm: vanishing B and R", 1e-10, move || {
                done(worst(samples, |s| {
                    let b = berwald_curvature(m, &s.x, &s.y)?.b.max_abs();
                    let r = riemann_curvature(m, &s.x, &s.y)?.principal.iter().fold(0.0f64, |a, k| a.max(k.abs()));
                    Ok(b.max(r))
                })?)
            }));
            let mut santalo = check("santalo-strict", "Santaló: indicatrix volume below the Euclidean sphere", 1e-4, move || {
                if n > 3 || !m.reversible() {
                    return Ok(Outcome::Skip("reversible norms with n = 2, 3".into()));
                }
                let area = if n == 2 { 2.0 * PI } else { 4.0 * PI };
                done(area - santalo_volume(m, &vec![0.0; n])?)
            });
            santalo.bound = Bound::AtLeast;
            out.push(santalo);
            out.push(check("indicatrix-curvature-formula", "indicatrix curvature from the Cartan torsion", 1e-4, move || {
                if n != 3 {
                    return Ok(Outcome::Skip("Gauss-curvature oracle needs n = 3".into()));
                }
                done(worst(samples, |s| {
                    let a = indicatrix_sectional_formula(m, &s.x, &s.y)?;
                    let b = indicatrix_gauss_oracle(m, &s.x, &s.y)?;
                    Ok((a - b).abs() / b.abs().max(1e-12))
                })?)
            }));
        }
        "funk" => {
            out.push(check("funk-constant-curvature", "Funk metric has constant flag curvature -1/4", 1e-6, move || {
                principal_spread(m, samples, -0.25)
            }));
            out.push(check("okada", "Okada: F_x = F F_y", 1e-8, move || {
                done(worst(samples, |s| Ok(okada_residual(m, &s.x, &s.y)?.iter().fold(0.0f64, |a, r| a.max(r.abs()))))?)
            }));
            out.push(check("funk-s-curvature", "Funk S-curvature S = (n+1)F/2", 1e-6, move || {
                let density = bh_density_field(m);
                let c = 0.5 * (n + 1) as f64;
                done(worst(samples, |s| Ok((s_curvature(m, &s.x, &s.y, &density)?.s - c * m.f(&s.x, &s.y)?).abs()))?)
            }));
            out.push(check("funk-mean-berwald", "Funk E = (n+1)/(4F³)(F² g - g(y,·) g(y,·))", 1e-6, move || {
                let c = (n + 1) as f64;
                done(worst(samples, |s| {
                    let f = m.f(&s.x, &s.y)?;
                    let e = berwald_curvature(m, &s.x, &s.y)?.e;
                    let g = fundamental_tensor(m, &s.x, &s.y)?;
                    let gy = g.lower(&s.y);
                    let mut w: f64 = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let want = c / (4.0 * f.powi(3)) * (f * f * g.g[(i, j)] - gy[i] * gy[j]);
                            w = w.max((e.get(&[i, j]) - want).abs());
                        }
                    }
                    Ok(w)
                })?)
            }));
            out.push(check("funk-landsberg-cartan", "Funk L + ½ F C = 0", 1e-4, move || {
                done(worst(samples, |s| {
                    let f = m.f(&s.x, &s.y)?;
                    Ok(landsberg_from_berwald(m, &s.x, &s.y)?.max_diff(&cartan_torsion(m, &s.x, &s.y)?.scale(-0.5 * f)))
                })?)
            }));
            out.push(check("funk-dot-landsberg", "constant curvature: L̇ + κF²C = 0 with κ = -1/4", 1e-5, move || {
                done(worst(samples, |s| dot_landsberg_residual(m, &s.x, &s.y, -0.25))?)
            }));
            out.push(check("funk-cartan-fit", "C(t) along geodesics follows the κ = -1/4 closed form", 1e-4, move || {
                if n != 2 {
                    return Ok(Outcome::Skip("fit implemented on a 2-frame; run with n = 2".into()));
                }
                let grid: Vec<f64> = (0..31).map(|k| 0.1 * k as f64).collect();
                let r = constant_curvature_ode_check(m, &[0.1, -0.2], &[0.6, 0.8], &[1.0, 0.0], &[0.0, 1.0], -0.25, &grid)?;
                done(r.prediction_error)
            }));
            if is_unit_ball(m) {
                out.push(check("funk-ball-volume", "BH volume of a Funk r-ball (r = 1) against the closed form", 3.0, move || {
                    let exact = funk_ball_formula(n, 1.0)?;
                    let ball = BallSpec {
                        center: vec![0.1; n],
                        radius: 1.0,
                        source: DistanceSource::FunkClosedForm,
                    };
                    let est = ball_volume_mc(m, &ball, mc, seed)?;
                    Ok(Outcome::Done(Measured {
                        value: (est.value - exact).abs() / est.stderr,
                        expected: None,
                        note: Some(format!("MC {:.6} ± {:.1e}, formula {exact:.6}; measured in σ", est.value, est.stderr)),
                    }))
                }));
                out.push(check("funk-model-equality", "V_{-1/4, δ} equals the Funk ball volume, δ = (n+1)/(2(n-1))", 1e-8, move || {
                    let delta = (n + 1) as f64 / (2.0 * (n - 1) as f64);
                    let mut w: f64 = 0.0;
                    for k in 1..=20 {
                        let r = 0.2 * k as f64;
                        w = w.max((model_volume(-0.25, delta, n, r)? - funk_ball_formula(n, r)?).abs());
                    }
                    Ok(Outcome::Done(Measured {
                        value: w,
                        expected: None,
                        note: Some(format!("δ = {delta} from S/F = (n+1)/2; 20 radii")),
                    }))
                }));
                out.push(check("funk-model-ratio", "μ(B(x,r))/V_{-1/4, δ}(r) ≡ 1 on the Funk space", 1e-3, move || {
                    let delta = (n + 1) as f64 / (2.0 * (n - 1) as f64);
                    let route = VolumeRoute::MonteCarlo { samples: mc, seed };
                    let rep = ratio_monotonicity_check(m, &vec![0.1; n], -0.25, delta, &[0.5, 1.0, 2.0], route)?;
                    if rep.status == CheckStatus::Skipped {
                        return Ok(Outcome::Skip("curvature-bound sweep failed".into()));
                    }
                    done(rep.rows.iter().fold(0.0f64, |a, r| a.max((r.ratio - 1.0).abs())))
                }));
            }
            out.push(check("projective-funk-hilbert", "Rapcsák pair: φ'' + κφ - κ̃/φ³ = 0 for Funk against Hilbert", 1e-4, move || {
                if n != 2 || !is_unit_ball(m) {
                    return Ok(Outcome::Skip("pair check on the unit disc".into()));
                }
                let h = with_dim("hilbert", &m.params, n)?;
                let a = projective_ode_check(m, &h, -0.25, -1.0, &[0.1, 0.0], &[0.0, 1.0], 2.0, 1e-2)?;
                let b = projective_ode_check(&h, m, -1.0, -0.25, &[0.1, 0.0], &[0.0, 1.0], 2.0, 1e-2)?;
                done(a.max(b))
            }));
        }
        "hilbert" => {
            out.push(check("hilbert-constant-curvature", "Hilbert metric has constant flag curvature -1", 1e-5, move || {
                principal_spread(m, samples, -1.0)
            }));
            out.push(check("hilbert-dot-landsberg", "Hilbert L̇ - F²C = 0", 1e-4, move || {
                done(worst(samples, |s| {
                    let f2 = m.f_sq(&s.x, &s.y)?;
                    Ok(landsberg_dot(m, &s.x, &s.y)?.max_diff(&cartan_torsion(m, &s.x, &s.y)?.scale(f2)))
                })?)
            }));
            out.push(check("hilbert-cartan-fit", "C(t) along geodesics follows the κ = -1 closed form", 1e-4, move || {
                if n != 2 {
                    return Ok(Outcome::Skip("fit implemented on a 2-frame; run with n = 2".into()));
                }
                let grid: Vec<f64> = (0..31).map(|k| 0.1 * k as f64).collect();
                let r = constant_curvature_ode_check(m, &[0.1, -0.2], &[0.6, 0.8], &[1.0, 0.0], &[0.0, 1.0], -1.0, &grid)?;
                done(r.prediction_error)
            }));
            out.push(check("projective-hilbert-funk", "Rapcsák pair: φ'' + κφ - κ̃/φ³ = 0 for Hilbert against Funk", 1e-4, move || {
                if n != 2 {
                    return Ok(Outcome::Skip("pair check in dimension 2".into()));
                }
                let f = with_dim("funk", &m.params, n)?;
                let a = projective_ode_check(m, &f, -1.0, -0.25, &[0.1, 0.0], &[0.0, 1.0], 2.0, 1e-2)?;
                let b = projective_ode_check(&f, m, -0.25, -1.0, &[0.1, 0.0], &[0.0, 1.0], 2.0, 1e-2)?;
                done(a.max(b))
            }));
        }
        _ => {}
    }
    out
}

/// Runs every check that applies to the configured metric. A numerical
/// integrity error inside a check marks the row failed and is returned
/// alongside the report so the caller can pick the exit code.
pub fn run_verify(cfg: &RunConfig) -> std::result::Result<(SuiteReport, Timings, bool), CliError> {
    let id = cfg.metric_id()?;
    let m = MetricSpec::from_id(id, &cfg.params)?;
    let samples = tangent_samples(&m, cfg.samples_or(20), cfg.seed_or(1));
    let list = checks(&m, cfg, &samples);
    for key in cfg.tolerances.keys() {
        if !list.iter().any(|c| c.id == key) {
            let ids: Vec<&str> = list.iter().map(|c| c.id).collect();
            return Err(CliError::Usage(format!("tolerance override for unknown check `{key}`; checks for {id}: {}", ids.join(", "))));
        }
    }
    let mut rows = Vec::with_capacity(list.len());
    let mut timings = Vec::with_capacity(list.len());
    let mut integrity = false;
    for c in &list {
        let tol = cfg.tolerances.get(c.id).copied().unwrap_or(c.tol);
        let start = Instant::now();
        let row = match (c.run)() {
            Ok(Outcome::Done(meas)) => {
                let dev = match meas.expected {
                    Some(e) => (meas.value - e).abs(),
                    None => meas.value,
                };
                let ok = match c.bound {
                    Bound::Within => dev <= tol,
                    Bound::AtLeast => dev >= tol,
                };
                SuiteRow {
                    id: c.id.into(),
                    anchor: c.anchor.into(),
                    status: if ok { Status::Pass } else { Status::Fail },
                    measured: Some(meas.value),
                    expected: meas.expected,
                    tolerance: tol,
                    note: meas.note,
                }
            }
            Ok(Outcome::Skip(why)) => SuiteRow {
                id: c.id.into(),
                anchor: c.anchor.into(),
                status: Status::Skipped,
                measured: None,
                expected: None,
                tolerance: tol,
                note: Some(why),
            },
            Err(e) => {
                integrity |= matches!(e, Error::NumericalIntegrity(_) | Error::OracleFailure(_));
                SuiteRow {
                    id: c.id.into(),
                    anchor: c.anchor.into(),
                    status: Status::Fail,
                    measured: None,
                    expected: None,
                    tolerance: tol,
                    note: Some(e.to_string()),
                }
            }
        };
        timings.push((c.id.to_string(), start.elapsed().as_secs_f64()));
        rows.push(row);
    }
    let count = |s: Status| rows.iter().filter(|r| r.status == s).count();
    let report = SuiteReport {
        metric: m.id.clone(),
        label: m.label(),
        config: cfg.embedded(),
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        skipped: count(Status::Skipped),
        rows,
    };
    Ok((report, timings, integrity))
}
