//! Polar reduction of `-u'' + f u' = g u`.
//!
//! With `(u, u') = r (cos θ, sin θ)`:
//!
//! `θ' = -1 - (g - 1) cos²θ + (f/2) sin 2θ`, `(log r)' = sinθ cosθ (1 - g) + f sin²θ`.
//!
//! `θ = 0` (the root `x₋ ≈ g/f`) repels forward in time at rate `≈ f`, and the root near `π/2`
//! attracts, so forward trajectories settle on `±π/2` except on a single separatrix. That
//! separatrix is the decaying (`L²`) solution; it is computed by integrating backward from a far
//! tail, where the band between the barriers attracts.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::wkb::{default_truncation, WkbSeries};

type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The default horizon is pushed out until `f` reaches this value, so that the attractor
/// `π/2 - 1/f` is within `1/150` of `π/2`.
pub const HORIZON_DRIFT: f64 = 150.0;

/// Stiff steps scale like `∫ f`, so the horizon search also stops once `t·f(t)` reaches this
/// budget; it binds only for small `γ` (for `γ = 0.5` the drift target is reached first).
pub const HORIZON_BUDGET: f64 = 5e6;

/// Per-step absolute tolerance on `θ` for the step-doubling controller.
const STEP_TOL: f64 = 1e-9;

/// Recorded samples are thinned to roughly this many per trajectory.
const MAX_RECORDS: usize = 20_000;

#[derive(Clone)]
pub struct PhaseSystem {
    drift: Coefficient,
    forcing: Coefficient,
    t_start: f64,
}

impl std::fmt::Debug for PhaseSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhaseSystem").field("t_start", &self.t_start).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub times: Vec<f64>,
    /// Angles wrapped into `(-π, π]`.
    pub theta: Vec<f64>,
    pub log_r: Vec<f64>,
}

impl PhaseTrajectory {
    pub fn last_theta(&self) -> f64 {
        *self.theta.last().expect("trajectories hold at least one sample")
    }

    /// Linear interpolation of `(θ, log r)` at `t` inside the recorded range.
    pub fn sample(&self, t: f64) -> Option<(f64, f64)> {
        let n = self.times.len();
        let (lo, hi) = (self.times[0].min(self.times[n - 1]), self.times[0].max(self.times[n - 1]));
        if !(t >= lo && t <= hi) {
            return None;
        }
        let ascending = self.times[n - 1] >= self.times[0];
        let idx = if ascending {
            self.times.partition_point(|&s| s < t)
        } else {
            self.times.partition_point(|&s| s > t)
        };
        if idx == 0 {
            return Some((self.theta[0], self.log_r[0]));
        }
        let idx = idx.min(n - 1);
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = if t1 == t0 { 0.0 } else { (t - t0) / (t1 - t0) };
        let mut dtheta = self.theta[idx] - self.theta[idx - 1];
        dtheta -= 2.0 * PI * (dtheta / (2.0 * PI)).round();
        Some((
            wrap(self.theta[idx - 1] + w * dtheta),
            self.log_r[idx - 1] + w * (self.log_r[idx] - self.log_r[idx - 1]),
        ))
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap(theta: f64) -> f64 {
    let w = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl PhaseSystem {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        forcing: impl Fn(f64) -> f64 + Send + Sync + 'static,
        t_start: f64,
    ) -> Result<Self> {
        if !t_start.is_finite() {
            return Err(invalid("t_start", "must be finite"));
        }
        Ok(Self {
            drift: Arc::new(drift),
            forcing: Arc::new(forcing),
            t_start,
        })
    }

    /// The eigenvalue equation itself: `f = V'`, `g = λ`, starting at the turning point.
    pub fn eigen_equation(p: &Potential, lambda: f64) -> Result<Self> {
        let x_star = p.turning_point(lambda)?;
        let p = *p;
        Self::new(move |t| p.derivative(t), move |_| lambda, x_star)
    }

    /// The remainder equation of a truncated WKB series: `f̃ = -2 Σ_{j=0}^{N} S_j'`,
    /// `g̃ = S_N'' + Σ_{n₁+n₂>N} S_{n₁}' S_{n₂}'`.
    pub fn wkb_remainder(series: &WkbSeries) -> Result<Self> {
        let (a, b) = (series.clone(), series.clone());
        Self::new(move |t| a.remainder_drift(t), move |t| b.remainder_forcing(t), series.turning_point())
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn drift(&self, t: f64) -> f64 {
        (self.drift)(t)
    }

    pub fn forcing(&self, t: f64) -> f64 {
        (self.forcing)(t)
    }

    pub fn theta_rhs(&self, t: f64, theta: f64) -> f64 {
        rhs(self.drift(t), self.forcing(t), theta)
    }

    /// `A Y · Y`, the logarithmic growth rate of `r`.
    pub fn radial_rate(&self, t: f64, theta: f64) -> f64 {
        radial(self.drift(t), self.forcing(t), theta)
    }

    /// Stationary roots `x± = (f ± √(f² - 4g))/2` of `x² - f x + g` at time `t`.
    pub fn roots(&self, t: f64) -> Result<(f64, f64)> {
        let (f, g) = (self.drift(t), self.forcing(t));
        let disc = f * f - 4.0 * g;
        if disc < 0.0 {
            return Err(Error::Precondition(format!("f² < 4g at t = {t}")));
        }
        let s = disc.sqrt();
        // x₋ in the cancellation-free form 2g/(f + √disc).
        let minus = if f + s != 0.0 { 2.0 * g / (f + s) } else { 0.5 * f };
        Ok((minus, 0.5 * (f + s)))
    }

    /// `(θ_l(t), θ_u(t))`: tail inf/sup of `arctan((f - √(f² ∓ 4g∓))/2)` over a geometric sample of `[t, horizon]`.
    pub fn barriers(&self, t: f64, horizon: f64) -> Result<(f64, f64)> {
        let end = horizon.max(t);
        let samples = 400;
        let (mut lower, mut upper) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..=samples {
            let s = if end > t && t > 0.0 {
                t * (end / t).powf(j as f64 / samples as f64)
            } else {
                t + (end - t) * j as f64 / samples as f64
            };
            let (f, g) = (self.drift(s), self.forcing(s));
            let (gp, gm) = (g.max(0.0), (-g).max(0.0));
            let disc = f * f - 4.0 * gp;
            if disc < 0.0 {
                return Err(Error::Precondition(format!("f² < 4g₊ at s = {s}")));
            }
            let up = (2.0 * gp / (f + disc.sqrt())).atan();
            let low = ((f - (f * f + 4.0 * gm).sqrt()) / 2.0).atan();
            upper = upper.max(up);
            lower = lower.min(low);
        }
        Ok((lower, upper))
    }

    /// `max(50 (t_start + 1), t)` where `t` is the first point of a geometric scan with
    /// `f(t) ≥ 150` or `t·f(t) ≥ 5e6`.
    pub fn default_horizon(&self) -> f64 {
        let base = 50.0 * (self.t_start + 1.0);
        let mut t = self.t_start.max(1.0);
        for _ in 0..400 {
            let f = self.drift(t);
            if f >= HORIZON_DRIFT || t * f >= HORIZON_BUDGET {
                break;
            }
            t *= 1.25;
        }
        base.max(t)
    }
}

fn rhs(f: f64, g: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    -1.0 - (g - 1.0) * c * c + f * s * c
}

fn radial(f: f64, g: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    s * c * (1.0 - g) + f * s * s
}

/// One classical RK4 step of `(θ, log r)` with signed step `h`.
fn rk4(sys: &PhaseSystem, t: f64, theta: f64, h: f64) -> (f64, f64) {
    let (f0, g0) = (sys.drift(t), sys.forcing(t));
    let (fm, gm) = (sys.drift(t + 0.5 * h), sys.forcing(t + 0.5 * h));
    let (f1, g1) = (sys.drift(t + h), sys.forcing(t + h));
    let k1 = rhs(f0, g0, theta);
    let k2 = rhs(fm, gm, theta + 0.5 * h * k1);
    let k3 = rhs(fm, gm, theta + 0.5 * h * k2);
    let k4 = rhs(f1, g1, theta + h * k3);
    let r1 = radial(f0, g0, theta);
    let r2 = radial(fm, gm, theta + 0.5 * h * k1);
    let r3 = radial(fm, gm, theta + 0.5 * h * k2);
    let r4 = radial(f1, g1, theta + h * k3);
    (
        theta + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
        h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4),
    )
}

/// Integrates from `(t0, θ0, log r = 0)` to `t1` in either direction with step-doubling error
/// control; `step` is the initial step and a step is halved whenever `θ` moves by more than 0.1.
fn integrate(sys: &PhaseSystem, t0: f64, theta0: f64, t1: f64, step: f64) -> Result<PhaseTrajectory> {
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid("step", format!("must be positive, got {step}")));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let record_gap = span / MAX_RECORDS as f64;
    let max_step = (span / 50.0).max(step);
    let mut traj = PhaseTrajectory {
        times: vec![t0],
        theta: vec![wrap(theta0)],
        log_r: vec![0.0],
    };
    let (mut t, mut theta, mut log_r) = (t0, theta0, 0.0);
    let mut h = step.min(span.max(f64::MIN_POSITIVE));
    let mut last_record = t0;
    while (t1 - t) * dir > 0.0 {
        let remaining = (t1 - t).abs();
        let hs = h.min(remaining);
        let (full, _) = rk4(sys, t, theta, dir * hs);
        let (half, dr1) = rk4(sys, t, theta, dir * hs * 0.5);
        let (two, dr2) = rk4(sys, t + dir * hs * 0.5, half, dir * hs * 0.5);
        let err = (two - full).abs() / 15.0;
        if err > STEP_TOL || (two - theta).abs() > 0.1 || !two.is_finite() {
            h = hs * 0.5;
            if h < 1e-13 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t });
            }
            continue;
        }
        t = if hs == remaining { t1 } else { t + dir * hs };
        theta = two;
        log_r += dr1 + dr2;
        if (t - last_record).abs() >= record_gap || t == t1 {
            traj.times.push(t);
            traj.theta.push(wrap(theta));
            traj.log_r.push(log_r);
            last_record = t;
        }
        if err < STEP_TOL / 32.0 {
            h = (hs * 2.0).min(max_step);
        } else {
            h = hs;
        }
    }
    Ok(traj)
}

/// Forward integration from `t_start` to `horizon`.
pub fn integrate_phase(sys: &PhaseSystem, theta0: f64, horizon: f64, step: f64) -> Result<PhaseTrajectory> {
    if !(horizon > sys.t_start) {
        return Err(Error::Precondition(format!(
            "horizon {horizon} must exceed t_start {}",
            sys.t_start
        )));
    }
    integrate(sys, sys.t_start, theta0, horizon, step)
}

/// Backward integration from `(t_end, θ_end)` down to `t_stop`; samples are returned in time
/// order reversed (starting at `t_end`), with `log r` normalized to 0 at `t_end`.
pub fn integrate_phase_backward(
    sys: &PhaseSystem,
    theta_end: f64,
    t_end: f64,
    t_stop: f64,
    step: f64,
) -> Result<PhaseTrajectory> {
    if !(t_end > t_stop) {
        return Err(Error::Precondition(format!("t_end {t_end} must exceed t_stop {t_stop}")));
    }
    integrate(sys, t_end, theta_end, t_stop, step)
}

/// Backward integration from the stationary root `arctan x₋(t_end)`: the decaying solution.
pub fn decaying_solution(sys: &PhaseSystem, t_end: f64, t_stop: f64, step: f64) -> Result<PhaseTrajectory> {
    let (x_minus, _) = sys.roots(t_end)?;
    integrate_phase_backward(sys, x_minus.atan(), t_end, t_stop, step)
}

/// Numerical check that the WKB remainder stays bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    pub truncation: usize,
    pub horizon: f64,
    /// `max |θ|` over `[x* + 0.5, horizon]` on the decaying solution.
    pub theta_max_tail: f64,
    /// `|θ|` at the horizon.
    pub theta_at_horizon: f64,
    /// `max log r - min log r` over `[x* + 0.5, horizon]`.
    pub log_r_oscillation: f64,
    /// `max log r - min log r` over the far tail `[√((x* + 0.5)·horizon), horizon]`; a Cauchy
    /// test for convergence of `log r`, hence boundedness.
    pub far_tail_variation: f64,
    pub passed: bool,
}

/// Tolerances for [`remainder_validation`].
pub const REMAINDER_THETA_TOL: f64 = 0.01;
pub const REMAINDER_LOG_R_TOL: f64 = 0.05;

/// Integrates the remainder equation of `series` backward from the horizon and reports whether
/// the angle tends to 0 and `log r` settles; requires `N ≥ (1+γ)/(2γ)`.
pub fn remainder_validation(
    p: &Potential,
    lambda: f64,
    series: &WkbSeries,
    horizon: Option<f64>,
) -> Result<RemainderReport> {
    let gamma = p.gamma();
    if series.truncation() < default_truncation(gamma) {
        return Err(Error::Precondition(format!(
            "truncation {} is below (1+γ)/(2γ) = {:.4}",
            series.truncation(),
            (1.0 + gamma) / (2.0 * gamma)
        )));
    }
    if (series.lambda() - lambda).abs() > 1e-12 * lambda || series.gamma() != gamma {
        return Err(invalid("series", "built for a different (γ, λ)"));
    }
    let sys = PhaseSystem::wkb_remainder(series)?;
    let horizon = horizon.unwrap_or_else(|| sys.default_horizon());
    let traj = decaying_solution(&sys, horizon, sys.t_start(), 1e-3)?;
    let tail_from = sys.t_start() + 0.5;
    let far_from = (tail_from * horizon).sqrt();
    let (mut theta_max, mut lo, mut hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    let (mut far_lo, mut far_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for ((&t, &th), &lr) in traj.times.iter().zip(&traj.theta).zip(&traj.log_r) {
        if t >= tail_from {
            theta_max = theta_max.max(th.abs());
            lo = lo.min(lr);
            hi = hi.max(lr);
        }
        if t >= far_from {
            far_lo = far_lo.min(lr);
            far_hi = far_hi.max(lr);
        }
    }
    let theta_at_horizon = traj.theta[0].abs();
    let log_r_oscillation = hi - lo;
    Ok(RemainderReport {
        truncation: series.truncation(),
        horizon,
        theta_max_tail: theta_max,
        theta_at_horizon,
        log_r_oscillation,
        far_tail_variation: far_hi - far_lo,
        passed: theta_at_horizon < REMAINDER_THETA_TOL && far_hi - far_lo < REMAINDER_LOG_R_TOL,
    })
}

/// Distance from `θ` to the nearest of `{-π/2, 0, π/2}` (angles taken modulo `π`).
pub fn distance_to_limit_set(theta: f64) -> f64 {
    let m = theta.rem_euclid(PI);
    m.min(PI - m).min((m - FRAC_PI_2).abs())
}
