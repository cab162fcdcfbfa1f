//! Adaptive Dormand-Prince 5(4) integrator with PI step control.
//!
//! Output times requested by the caller are hit exactly (the step is clipped),
//! and every accepted step is kept so the trajectory can be resampled with
//! cubic Hermite interpolation.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: None,
            h_min: 1e-12,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Accepted states of an integration run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Times of accepted steps, starting at `t0`.
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub dy: Vec<Vec<f64>>,
    /// States at the requested output times that were reached.
    pub outputs: Vec<(f64, Vec<f64>)>,
    pub stats: OdeStats,
    /// Parameter at which the solution left the admissible region, if it did.
    pub exit: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.t.last().expect("trajectory has t0"), self.y.last().expect("trajectory has y0"))
    }

    /// Cubic Hermite interpolation between accepted steps.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let forward = self.t.len() < 2 || self.t[1] >= self.t[0];
        let pos = |s: f64| if forward { s } else { -s };
        let tq = pos(t);
        if tq < pos(self.t[0]) || tq > pos(*self.t.last()?) {
            return None;
        }
        let k = self
            .t
            .windows(2)
            .position(|w| pos(w[0]) <= tq && tq <= pos(w[1]))
            .unwrap_or(0);
        if self.t.len() == 1 {
            return Some(self.y[0].clone());
        }
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Some(
            (0..self.y[k].len())
                .map(|i| {
                    h00 * self.y[k][i]
                        + h10 * h * self.dy[k][i]
                        + h01 * self.y[k + 1][i]
                        + h11 * h * self.dy[k + 1][i]
                })
                .collect(),
        )
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Outcome of one attempted step.
enum Attempt {
    Ok { y: Vec<f64>, dy: Vec<f64>, err: f64 },
    /// The right-hand side refused a stage point (e.g. chart exit).
    Refused,
}

fn attempt<F>(f: &mut F, t: f64, y: &[f64], dy0: &[f64], h: f64, opts: &OdeOptions, stats: &mut OdeStats) -> Result<Attempt>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = vec![dy0.to_vec()];
    let mut tmp = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += A[s][j] * kj[i];
            }
            tmp[i] = y[i] + h * acc;
        }
        let mut ks = vec![0.0; n];
        stats.rhs_evals += 1;
        match f(t + C[s] * h, &tmp, &mut ks) {
            Ok(()) => {}
            Err(Error::OutsideChart { .. }) | Err(Error::Domain { .. }) | Err(Error::Geometry(_)) => {
                return Ok(Attempt::Refused)
            }
            Err(e) => return Err(e),
        }
        if ks.iter().any(|v| !v.is_finite()) {
            return Ok(Attempt::Refused);
        }
        k.push(ks);
    }
    // stage 7 is evaluated at the 5th-order solution (FSAL)
    let y_new = tmp;
    let mut err = 0.0;
    for i in 0..n {
        let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        err += (e / sc).powi(2);
    }
    let err = (err / n as f64).sqrt();
    Ok(Attempt::Ok {
        y: y_new,
        dy: k.pop().expect("seven stages"),
        err,
    })
}

/// Integrates `y' = f(t, y)` from `t0` through the monotone list `t_out`
/// (all on the same side of `t0`). `admissible` is checked after each
/// accepted step; when it fails, or stage evaluations keep being refused
/// while the step shrinks below `h_min`, the run stops with `exit` set.
pub fn integrate<F, G>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    opts: &OdeOptions,
    admissible: G,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: Fn(&[f64]) -> bool,
{
    let t_end = *t_out.last().ok_or_else(|| Error::Config("no output times".into()))?;
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    if t_out.windows(2).any(|w| dir * (w[1] - w[0]) < 0.0) || dir * (t_out[0] - t0) < 0.0 {
        return Err(Error::Config("output times must be monotone away from t0".into()));
    }
    let mut stats = OdeStats::default();
    let mut dy = vec![0.0; y0.len()];
    f(t0, y0, &mut dy)?;
    stats.rhs_evals += 1;
    let mut traj = Trajectory {
        t: vec![t0],
        y: vec![y0.to_vec()],
        dy: vec![dy.clone()],
        outputs: Vec::new(),
        stats,
        exit: None,
    };
    let mut out_idx = 0;
    while out_idx < t_out.len() && t_out[out_idx] == t0 {
        traj.outputs.push((t0, y0.to_vec()));
        out_idx += 1;
    }
    let span = (t_end - t0).abs();
    if span == 0.0 {
        return Ok(traj);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = opts.h_init.unwrap_or_else(|| {
        let ny = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        let nd = dy.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        (1e-2 * ny / nd).min(span).max(1e-6 * span)
    });
    let mut err_old: f64 = 1e-4;
    let mut refused_streak = 0usize;
    while out_idx < t_out.len() {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let target = t_out[out_idx];
        let remaining = (target - t).abs();
        let hits_target = h >= remaining;
        let step = if hits_target { remaining } else { h };
        match attempt(&mut f, t, &y, &dy, dir * step, opts, &mut traj.stats)? {
            Attempt::Refused => {
                traj.stats.rejected += 1;
                refused_streak += 1;
                h = step * 0.25;
                if h < opts.h_min.max(1e-14 * t.abs()) || refused_streak > 60 {
                    traj.exit = Some(t);
                    break;
                }
            }
            Attempt::Ok { y: y_new, dy: dy_new, err } => {
                if !err.is_finite() {
                    traj.stats.rejected += 1;
                    h = step * 0.2;
                    continue;
                }
                if err <= 1.0 {
                    if !admissible(&y_new) {
                        traj.stats.rejected += 1;
                        refused_streak += 1;
                        h = step * 0.25;
                        if h < opts.h_min.max(1e-14 * t.abs()) || refused_streak > 60 {
                            traj.exit = Some(t);
                            break;
                        }
                        continue;
                    }
                    refused_streak = 0;
                    traj.stats.accepted += 1;
                    t = if hits_target { target } else { t + dir * step };
                    y = y_new;
                    dy = dy_new;
                    traj.t.push(t);
                    traj.y.push(y.clone());
                    traj.dy.push(dy.clone());
                    if hits_target {
                        traj.outputs.push((t, y.clone()));
                        out_idx += 1;
                        while out_idx < t_out.len() && t_out[out_idx] == t {
                            traj.outputs.push((t, y.clone()));
                            out_idx += 1;
                        }
                    }
                    let fac = (0.9 * err.max(1e-10).powf(-0.17) * err_old.powf(0.04)).clamp(0.2, 5.0);
                    err_old = err.max(1e-4);
                    // a clipped step says nothing about the admissible step size
                    h = if hits_target { h.max(step * fac) } else { step * fac };
                } else {
                    traj.stats.rejected += 1;
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                }
                if h < opts.h_min {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size collapsed below {:e}", opts.h_min),
                    });
                }
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_hits_output_times() {
        let rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
            Ok(())
        };
        let times: Vec<f64> = (1..=10).map(|k| k as f64 * 0.7).collect();
        let tr = integrate(rhs, 0.0, &[0.0, 1.0], &times, &OdeOptions::default(), |_| true).unwrap();
        assert_eq!(tr.outputs.len(), times.len());
        for (t, y) in &tr.outputs {
            assert!((y[0] - t.sin()).abs() < 1e-8, "{t}: {}", y[0] - t.sin());
        }
        let mid = tr.interpolate(3.3).unwrap();
        assert!((mid[0] - 3.3f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn backward_integration() {
        let rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[0];
            Ok(())
        };
        let tr = integrate(rhs, 0.0, &[1.0], &[-1.0], &OdeOptions::default(), |_| true).unwrap();
        assert!((tr.outputs[0].1[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn exit_is_flagged_not_raised() {
        let rhs = |_t: f64, _y: &[f64], d: &mut [f64]| {
            d[0] = 1.0;
            Ok(())
        };
        let tr = integrate(rhs, 0.0, &[0.0], &[5.0], &OdeOptions::default(), |y| y[0] < 1.0).unwrap();
        let exit = tr.exit.unwrap();
        assert!(exit > 0.99 && exit < 1.0, "{exit}");
        assert!(tr.outputs.is_empty());
    }
}
