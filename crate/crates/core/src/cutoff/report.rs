use rayon::prelude::*;
use serde::Serialize;

use super::{cutoff_time_of, Backend, CutoffModel, CutoffProblem, EpsilonSlice, LogValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    WindowCutoff,
    ProfileCutoff,
    NoCutoff,
    DegenerateZero,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::WindowCutoff => "window_cutoff",
            Verdict::ProfileCutoff => "profile_cutoff",
            Verdict::NoCutoff => "no_cutoff",
            Verdict::DegenerateZero => "degenerate_zero",
        }
    }
}

/// Finite-grid stand-ins for the limits in the cut-off definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// `d(early · t_ε)` must exceed this at the smallest `ε`.
    pub divergence: f64,
    /// `d(late · t_ε)` must fall below this at the smallest `ε`.
    pub convergence: f64,
    pub early: f64,
    pub late: f64,
    /// Final sup-gap between the profile and `e^{-λ_j r}` for a profile verdict.
    pub profile_gap: f64,
    /// Trends are required on `ε ≤ trend_epsilon`.
    pub trend_epsilon: f64,
    /// Slack added to `√n · M_n` in the bounded-distance test.
    pub bound_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            divergence: 1e3,
            convergence: 1e-2,
            early: 0.5,
            late: 1.5,
            profile_gap: 0.1,
            trend_epsilon: 0.1,
            bound_slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub delta: f64,
    pub window: f64,
    pub coefficients: Vec<LogValue>,
    pub backends: Vec<Backend>,
    pub cutoff_time: Option<f64>,
    pub mode_used: Option<usize>,
    pub d_zero: LogValue,
    pub d_early: Option<LogValue>,
    pub d_late: Option<LogValue>,
    /// `d(t_ε + r w_ε)` on the report's `r`-grid.
    pub profile: Vec<LogValue>,
    /// `sup_r |d(t_ε + r w_ε) - e^{-λ_j r}|`.
    pub profile_gap: Option<f64>,
    /// `τ(η)` on the report's `η`-grid.
    pub mixing_times: Vec<f64>,
    /// `log` of each summand of `d²` at `t_ε`.
    pub log_summands_at_cutoff: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffReport {
    pub problem: CutoffProblem,
    pub thresholds: Thresholds,
    pub r_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub records: Vec<EpsilonRecord>,
    pub centered_mode: Option<usize>,
    /// `max_{k≤n} ‖ψ_k‖_∞` on the base grid.
    pub sup_bound: f64,
    /// Largest `ε` at which some coefficient came from the asymptotic backend.
    pub backend_switch: Option<f64>,
    /// Max/min of the profile samples over the `ε`-grid, a finite-grid proxy for `𝔭₊`/`𝔭₋`.
    pub profile_upper: Vec<f64>,
    pub profile_lower: Vec<f64>,
    pub verdict: Verdict,
}

fn record(model: &CutoffModel, slice: &EpsilonSlice, r_grid: &[f64], eta_grid: &[f64], th: &Thresholds) -> EpsilonRecord {
    let problem = model.problem();
    let e = slice.epsilon;
    let window = problem.window(e);
    let timing = model.cutoff_mode().ok().and_then(|m| cutoff_time_of(slice, m).ok());
    let (profile, profile_gap, d_early, d_late, summands) = match timing {
        Some(ct) => {
            let profile: Vec<LogValue> = r_grid.iter().map(|r| slice.distance(ct.t + r * window)).collect();
            let lambda = model.eigensystem().eigenvalue(ct.mode);
            let gap = r_grid
                .iter()
                .zip(&profile)
                .map(|(r, d)| (d.to_f64() - (-lambda * r).exp()).abs())
                .fold(0.0f64, f64::max);
            (
                profile,
                Some(gap),
                Some(slice.distance(th.early * ct.t)),
                Some(slice.distance(th.late * ct.t)),
                (1..=problem.n).map(|k| slice.log_summand(k, ct.t)).collect(),
            )
        }
        None => (Vec::new(), None, None, None, Vec::new()),
    };
    EpsilonRecord {
        epsilon: e,
        delta: problem.delta(e),
        window,
        coefficients: slice.coefficients.clone(),
        backends: slice.backends.clone(),
        cutoff_time: timing.map(|c| c.t),
        mode_used: timing.map(|c| c.mode),
        d_zero: slice.distance(0.0),
        d_early,
        d_late,
        profile,
        profile_gap,
        mixing_times: eta_grid.iter().map(|&eta| slice.mixing_time(eta)).collect(),
        log_summands_at_cutoff: summands,
    }
}

/// Per-`ε` records over the problem grid (computed concurrently, merged in grid order) and the verdict.
pub fn cutoff_report(model: &CutoffModel, r_grid: &[f64], eta_grid: &[f64], thresholds: Thresholds) -> Result<CutoffReport> {
    if eta_grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(crate::error::invalid("eta_grid", "entries must be positive"));
    }
    let problem = model.problem();
    let slices = model.slices()?;
    let records: Vec<EpsilonRecord> = slices
        .par_iter()
        .map(|s| record(model, s, r_grid, eta_grid, &thresholds))
        .collect();
    let sup_bound = (1..=problem.n).map(|k| model.eigensystem().sup_norm(k)).fold(0.0f64, f64::max);
    let backend_switch = records
        .iter()
        .find(|r| r.backends.contains(&Backend::Asymptotic))
        .map(|r| r.epsilon);
    let envelope = |pick: fn(f64, f64) -> f64, init: f64| -> Vec<f64> {
        (0..r_grid.len())
            .map(|i| {
                records
                    .iter()
                    .filter(|r| !r.profile.is_empty())
                    .map(|r| r.profile[i].to_f64())
                    .fold(init, pick)
            })
            .collect()
    };
    let profile_upper = envelope(f64::max, f64::NEG_INFINITY);
    let profile_lower = envelope(f64::min, f64::INFINITY);
    let centered_mode = if problem.x0 == 0.0 {
        model.centered_modes().last().copied()
    } else {
        None
    };
    let mut report = CutoffReport {
        problem: problem.clone(),
        thresholds,
        r_grid: r_grid.to_vec(),
        eta_grid: eta_grid.to_vec(),
        records,
        centered_mode,
        sup_bound,
        backend_switch,
        profile_upper,
        profile_lower,
        verdict: Verdict::DegenerateZero,
    };
    report.verdict = regime_verdict(problem, &report)?;
    Ok(report)
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

/// Classifies the computed grid; never coerces an ambiguous grid into a verdict.
pub fn regime_verdict(problem: &CutoffProblem, data: &CutoffReport) -> Result<Verdict> {
    let th = &data.thresholds;
    if problem.gamma == 1.0 {
        return Err(Error::Precondition("γ = 1 is excluded from regime verdicts".into()));
    }
    if problem.x0 == 0.0 && data.centered_mode.is_none() {
        return Ok(Verdict::DegenerateZero);
    }
    if problem.gamma > 1.0 {
        let bound = (problem.n as f64).sqrt() * data.sup_bound + th.bound_slack;
        // d is decreasing in t, so its supremum over t ≥ 0 is d(0).
        let worst = data.records.iter().map(|r| r.d_zero.to_f64()).fold(0.0f64, f64::max);
        return if worst <= bound {
            Ok(Verdict::NoCutoff)
        } else {
            Err(Error::Inconclusive(format!(
                "sup d = {worst:.6e} exceeds √n·M_n = {bound:.6e}"
            )))
        };
    }

    let last = data.records.last().expect("non-empty grid");
    let (Some(early), Some(late)) = (last.d_early, last.d_late) else {
        return Err(Error::Inconclusive("no cut-off time at the smallest ε".into()));
    };
    if !(early.log_abs() > th.divergence.ln() && late.log_abs() < th.convergence.ln()) {
        return Err(Error::Inconclusive(format!(
            "at ε = {:e}: d({}·t_ε) = {:.4e}, d({}·t_ε) = {:.4e}",
            last.epsilon,
            th.early,
            early.to_f64(),
            th.late,
            late.to_f64()
        )));
    }
    let trend: Vec<&super::EpsilonRecord> = data.records.iter().filter(|r| r.epsilon <= th.trend_epsilon).collect();
    let early_logs: Vec<f64> = trend.iter().filter_map(|r| r.d_early.map(|d| d.log_abs())).collect();
    let late_logs: Vec<f64> = trend.iter().filter_map(|r| r.d_late.map(|d| -d.log_abs())).collect();
    if early_logs.len() != trend.len() || !strictly_increasing(&early_logs) || !strictly_increasing(&late_logs) {
        return Err(Error::Inconclusive(format!(
            "d({}·t_ε) or d({}·t_ε) is not monotone along ε ≤ {}",
            th.early, th.late, th.trend_epsilon
        )));
    }
    let gaps: Vec<f64> = trend.iter().filter_map(|r| r.profile_gap.map(|g| -g)).collect();
    let final_gap = -gaps.last().copied().unwrap_or(f64::NEG_INFINITY);
    if strictly_increasing(&gaps) && final_gap < th.profile_gap {
        Ok(Verdict::ProfileCutoff)
    } else {
        Ok(Verdict::WindowCutoff)
    }
}

/// Fit of `t_ε` against powers of `ε` on `ε ≤ 1e-2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketReport {
    /// `|x₀|^{1-γ}/(1-γ)` for `x₀ ≠ 0`.
    pub limit: Option<f64>,
    pub predicted_exponent: f64,
    pub fitted_exponent: f64,
    /// `t_ε - limit ≈ constant · ε^{exponent}` (or `t_ε ≈ …` when `x₀ = 0`).
    pub fitted_constant: f64,
    pub points: usize,
    /// `|t_ε/limit - 1|` at the smallest `ε`.
    pub limit_error: Option<f64>,
    pub exponent_ok: bool,
}

/// Fit window upper end and minimum number of points for [`mixing_bracket_check`].
pub const BRACKET_WINDOW: f64 = 1e-2;
pub const BRACKET_MIN_POINTS: usize = 4;

pub fn mixing_bracket_check(model: &CutoffModel, epsilon_grid: &[f64]) -> Result<BracketReport> {
    let problem = model.problem();
    let g = problem.gamma;
    if g >= 1.0 {
        return Err(Error::Precondition(format!("brackets need γ < 1, got {g}")));
    }
    let fit_eps: Vec<f64> = epsilon_grid.iter().copied().filter(|&e| e <= BRACKET_WINDOW).collect();
    if fit_eps.len() < BRACKET_MIN_POINTS {
        return Err(Error::InsufficientGrid(format!(
            "{} points with ε ≤ {BRACKET_WINDOW}, need {BRACKET_MIN_POINTS}",
            fit_eps.len()
        )));
    }
    let times: Vec<f64> = fit_eps
        .par_iter()
        .map(|&e| model.cutoff_time(e).map(|c| c.t))
        .collect::<Result<_>>()?;
    // For γ < 1/3 the λ² x^{1-3γ} term of the second WKB level outgrows the O(1) constant, so the
    // correction decays like ε^{2γ/(1+γ)} instead of ε^{(1-γ)/(1+γ)}.
    let (limit, predicted) = if problem.x0 == 0.0 {
        (None, (1.0 - g).powi(2) / (1.0 + g))
    } else {
        (Some(problem.x0.abs().powf(1.0 - g) / (1.0 - g)), (1.0 - g).min(2.0 * g) / (1.0 + g))
    };
    let ys: Vec<f64> = times.iter().map(|t| t - limit.unwrap_or(0.0)).collect();
    if ys.contains(&0.0) || !(ys.iter().all(|&y| y > 0.0) || ys.iter().all(|&y| y < 0.0)) {
        return Err(Error::Inconclusive("t_ε - limit changes sign on the fit window".into()));
    }
    let xs: Vec<f64> = fit_eps.iter().map(|e| e.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ls);
    let limit_error = limit.map(|l| (times.last().unwrap() / l - 1.0).abs());
    Ok(BracketReport {
        limit,
        predicted_exponent: predicted,
        fitted_exponent: slope,
        fitted_constant: ys[0].signum() * intercept.exp(),
        points: fit_eps.len(),
        limit_error,
        exponent_ok: (slope - predicted).abs() <= 0.15 * predicted,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, i) = least_squares(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_helper() {
        assert!(strictly_increasing(&[1.0, 2.0, 3.0]));
        assert!(!strictly_increasing(&[1.0, 1.0]));
        assert!(strictly_increasing(&[]));
    }
}
