//! WKB backend for `γ < 1`.
//!
//! Beyond the turning point `ψ_k ≈ C_k e^{G_k}` with `G_k = Σ_{i≤N} S_i` the integrated series, so
//!
//! - `x₀ ≠ 0`: `c_k ≈ C_k (2δ̂)^{-1} ∫_{B_δ̂(x̂₀)} e^{G_k}`, with sign `(-1)^k` for `x₀ < 0`;
//! - `x₀ = 0`, `k` even: `c_k ≈ C_k δ̂^{-1} ∫_{x*}^{δ̂} e^{G_k}`, which is `C_k ε^{γ(1-γ)/(1+γ)} e^{G_k(δ̂)}/λ_k`
//!   to leading order;
//! - `x₀ = 0`, `k` odd: exactly zero.
//!
//! The unknown `log C_k` is fitted once per mode on the window where the numeric backend applies
//! and the ball sits past `x* + 1`.

use serde::Serialize;

use super::{CutoffModel, CutoffProblem, LogValue};
use crate::error::{Error, Result};
use crate::spectrum::{log_sum_exp, Parity};
use crate::wkb::{build_series, default_truncation, WkbSeries, N_MAX_TABLE};

/// Composite Simpson panels for the log-domain ball integral.
const PANELS: usize = 512;

/// Calibration candidates: geometric from 1 to 1e-8 with this many points.
const CALIBRATION_POINTS: usize = 65;

#[derive(Debug, Clone, Serialize)]
pub struct ModeCalibration {
    pub mode: usize,
    pub turning_point: f64,
    /// Fitted `log C_k`; `None` for modes that vanish identically or have no overlap window.
    pub offset: Option<f64>,
    pub window: Vec<f64>,
    /// `max |log c_k(numeric) - log c_k(asymptotic)|` over the window after fitting.
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct AsymptoticBackend {
    series: Vec<WkbSeries>,
    modes: Vec<ModeCalibration>,
    parities: Vec<Parity>,
}

impl AsymptoticBackend {
    pub(super) fn calibrate(model: &CutoffModel) -> Result<Self> {
        let problem = model.problem();
        let es = model.eigensystem();
        let p = problem.potential();
        // One term past the minimal admissible truncation keeps the remainder variation small.
        let truncation = (default_truncation(problem.gamma) + 1).min(N_MAX_TABLE);
        let mut series = Vec::with_capacity(problem.n);
        let mut modes = Vec::with_capacity(problem.n);
        let parities: Vec<Parity> = (1..=problem.n).map(|k| es.parities()[k]).collect();
        let candidates: Vec<f64> = (0..CALIBRATION_POINTS)
            .map(|j| 10f64.powf(-8.0 * j as f64 / (CALIBRATION_POINTS - 1) as f64))
            .collect();
        for k in 1..=problem.n {
            let s = build_series(&p, es.eigenvalue(k), Some(truncation))?;
            let turning_point = s.turning_point();
            let mut cal = ModeCalibration {
                mode: k,
                turning_point,
                offset: None,
                window: Vec::new(),
                max_residual: 0.0,
            };
            let vanishes = problem.x0 == 0.0 && parities[k - 1] == Parity::Odd;
            if !vanishes {
                let mut diffs = Vec::new();
                for &e in &candidates {
                    if !model.numeric_available(e) || !in_validity(problem, e, turning_point) {
                        continue;
                    }
                    let numeric = model.numeric_coefficient(e, k)?;
                    if numeric.is_zero() {
                        continue;
                    }
                    diffs.push(numeric.log_abs() - log_ball_integral(&s, problem, e));
                    cal.window.push(e);
                }
                if !diffs.is_empty() {
                    let offset = diffs.iter().sum::<f64>() / diffs.len() as f64;
                    cal.max_residual = diffs.iter().map(|d| (d - offset).abs()).fold(0.0, f64::max);
                    cal.offset = Some(offset);
                }
            }
            series.push(s);
            modes.push(cal);
        }
        Ok(Self {
            series,
            modes,
            parities,
        })
    }

    pub fn calibration(&self) -> &[ModeCalibration] {
        &self.modes
    }

    pub fn series(&self, k: usize) -> &WkbSeries {
        &self.series[k - 1]
    }

    pub fn coefficient(&self, problem: &CutoffProblem, epsilon: f64, k: usize) -> Result<LogValue> {
        let parity = self.parities[k - 1];
        if problem.x0 == 0.0 && parity == Parity::Odd {
            return Ok(LogValue::ZERO);
        }
        let cal = &self.modes[k - 1];
        if !in_validity(problem, epsilon, cal.turning_point) {
            return Err(Error::Capability(format!(
                "ε = {epsilon:e}: the ball does not clear the turning point x* + 1 = {:.4} of mode {k}",
                cal.turning_point + 1.0
            )));
        }
        let offset = cal.offset.ok_or_else(|| {
            Error::Capability(format!("mode {k} has no overlap window to fit its WKB constant"))
        })?;
        let sign = if problem.x0 < 0.0 && parity == Parity::Odd { -1 } else { 1 };
        Ok(LogValue::new(sign, offset + log_ball_integral(&self.series[k - 1], problem, epsilon)))
    }
}

/// Ball clear of the oscillatory core: `|x̂₀| - δ̂ ≥ x* + 1`, or `δ̂ ≥ 2x* + 1` when `x₀ = 0`.
fn in_validity(problem: &CutoffProblem, epsilon: f64, turning_point: f64) -> bool {
    let (x, d) = problem.rescaled_ball(epsilon);
    if problem.x0 == 0.0 {
        d >= 2.0 * turning_point + 1.0
    } else {
        x.abs() - d >= turning_point + 1.0
    }
}

/// `log` of the ball average of `e^{G}` (or the half-ball form when `x₀ = 0`).
fn log_ball_integral(series: &WkbSeries, problem: &CutoffProblem, epsilon: f64) -> f64 {
    let (x, d) = problem.rescaled_ball(epsilon);
    let (lo, hi, norm) = if problem.x0 == 0.0 {
        (series.turning_point(), d, d)
    } else {
        (x.abs() - d, x.abs() + d, 2.0 * d)
    };
    let h = (hi - lo) / PANELS as f64;
    let terms: Vec<f64> = (0..=PANELS)
        .map(|i| {
            let w = if i == 0 || i == PANELS {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            series.antiderivative(lo + i as f64 * h) + (w * h / 3.0f64).ln()
        })
        .collect();
    log_sum_exp(&terms) - norm.ln()
}
