//! Truncated χ² distance `d_{n,ε}(t, x₀)` of the process started uniformly on `B_δ(x₀)`.
//!
//! `d²_{n,ε}(t) = Σ_{k=1}^{n} e^{-2λ_{k,ε} t} c_k²` with `c_k = ∫ ρ_{ε,0} ψ_{k,ε}`. After the
//! rescaling `x̂ = x ε^{-1/(1+γ)}` every `c_k` is an average of the base eigenfunction `ψ_k` over
//! `B_δ̂(x̂₀)`. Both grow like `exp(λ_k ε^{-(1-γ)/(1+γ)}·…)`, so everything is kept in signed-log form.

mod asymptotic;
mod logvalue;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use asymptotic::AsymptoticBackend;
pub use logvalue::LogValue;
pub use report::{
    cutoff_report, mixing_bracket_check, regime_verdict, BracketReport, CutoffReport, EpsilonRecord, Thresholds,
    Verdict,
};

use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::spectrum::{default_spacing, solve_eigensystem, EigenSystem, Grid, Parity};

/// The numeric backend only reads `ψ_k` on `|x̂| ≤ 0.9 L`, away from the Dirichlet edge layer.
pub const NUMERIC_REACH: f64 = 0.9;

/// Upper bound on the half-width of grids built by [`cutoff_grid`].
pub const CUTOFF_MAX_HALF_WIDTH: f64 = 1000.0;

/// Relative threshold deciding `ψ_j(0) ≠ 0` for membership in `E_n`.
pub const CENTERED_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// `δ(ε) = ε^{(1-γ)/(1+γ)}`.
    ScalingRule,
    /// `δ = 1`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Numeric,
    Asymptotic,
    Auto,
}

/// Uniform density `1/(2δ)` on `B_δ(x₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialDatum {
    pub x0: f64,
    pub delta: f64,
}

impl InitialDatum {
    pub fn new(x0: f64, delta: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid("delta", format!("must be positive, got {delta}")));
        }
        Ok(Self { x0, delta })
    }

    pub fn density(&self, x: f64) -> f64 {
        if (x - self.x0).abs() <= self.delta {
            0.5 / self.delta
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffProblem {
    pub gamma: f64,
    pub x0: f64,
    pub n: usize,
    pub delta_rule: DeltaRule,
    pub epsilon_grid: Vec<f64>,
}

/// Geometric grid `1 → 1e-4` with 17 points.
pub fn default_epsilon_grid() -> Vec<f64> {
    (0..17).map(|j| 10f64.powf(-(j as f64) / 4.0)).collect()
}

impl CutoffProblem {
    pub fn new(gamma: f64, x0: f64, n: usize, delta_rule: DeltaRule, epsilon_grid: Vec<f64>) -> Result<Self> {
        Potential::new(gamma)?;
        if !x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        if n < 1 {
            return Err(invalid("n", "must be at least 1"));
        }
        if epsilon_grid.is_empty() {
            return Err(invalid("epsilon_grid", "must not be empty"));
        }
        if epsilon_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(invalid("epsilon_grid", "entries must lie in (0, 1]"));
        }
        if epsilon_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilon_grid", "must be strictly decreasing"));
        }
        Ok(Self {
            gamma,
            x0,
            n,
            delta_rule,
            epsilon_grid,
        })
    }

    /// The rule paired with `γ`: scaling for `γ < 1`, unit otherwise.
    pub fn with_default_rule(gamma: f64, x0: f64, n: usize) -> Result<Self> {
        let rule = if gamma < 1.0 { DeltaRule::ScalingRule } else { DeltaRule::Unit };
        Self::new(gamma, x0, n, rule, default_epsilon_grid())
    }

    pub fn potential(&self) -> Potential {
        Potential::new(self.gamma).expect("validated at construction")
    }

    pub fn delta(&self, epsilon: f64) -> f64 {
        match self.delta_rule {
            DeltaRule::ScalingRule => epsilon.powf((1.0 - self.gamma) / (1.0 + self.gamma)),
            DeltaRule::Unit => 1.0,
        }
    }

    /// `w_ε = ε^{(1-γ)/(1+γ)}`.
    pub fn window(&self, epsilon: f64) -> f64 {
        epsilon.powf((1.0 - self.gamma) / (1.0 + self.gamma))
    }

    pub fn datum(&self, epsilon: f64) -> InitialDatum {
        InitialDatum {
            x0: self.x0,
            delta: self.delta(epsilon),
        }
    }

    /// `ε^{-1/(1+γ)}`, the factor taking physical lengths to base-grid lengths.
    pub fn inverse_length(&self, epsilon: f64) -> f64 {
        epsilon.powf(-1.0 / (1.0 + self.gamma))
    }

    /// `(x̂₀, δ̂)` in base-grid units.
    pub fn rescaled_ball(&self, epsilon: f64) -> (f64, f64) {
        let s = self.inverse_length(epsilon);
        (self.x0 * s, self.delta(epsilon) * s)
    }

    pub fn smallest_epsilon(&self) -> f64 {
        *self.epsilon_grid.last().expect("non-empty grid")
    }
}

/// Default grid widened so that the numeric backend covers as much of the `ε`-grid as possible,
/// up to [`CUTOFF_MAX_HALF_WIDTH`]; beyond that the asymptotic backend takes over.
pub fn cutoff_grid(problem: &CutoffProblem) -> Result<Grid> {
    let p = problem.potential();
    let base = Grid::default_for(&p, problem.n)?;
    let needed = problem
        .epsilon_grid
        .iter()
        .map(|&e| {
            let (x, d) = problem.rescaled_ball(e);
            (x.abs() + d) / NUMERIC_REACH + 1.0
        })
        .fold(0.0f64, f64::max);
    let half_width = needed.min(CUTOFF_MAX_HALF_WIDTH).max(base.half_width());
    if half_width == base.half_width() {
        return Ok(base);
    }
    Grid::with_max_spacing(half_width, default_spacing(half_width).min(base.spacing()))
}

/// Modes `j ≤ n` with `|ψ_j(0)| > 1e-8 · bulk sup`, cross-checked against parity labels.
pub fn centered_modes(es: &EigenSystem, n: usize) -> Result<Vec<usize>> {
    let center = es.grid().center();
    let mut members = Vec::new();
    for j in 1..=n {
        let value = es.eigenfunction(j)[center].abs();
        let member = value > CENTERED_THRESHOLD * es.bulk_sup(j);
        if member != (es.parities()[j] == Parity::Even) {
            return Err(Error::EigenSolver(format!(
                "mode {j}: |ψ(0)| = {value:.3e} disagrees with its parity label {:?}",
                es.parities()[j]
            )));
        }
        if member {
            members.push(j);
        }
    }
    Ok(members)
}

/// The cut-off time and the mode that pins it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffTime {
    pub t: f64,
    pub mode: usize,
}

/// Coefficients and rates of one noise level; distances are pure functions of this slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSlice {
    pub epsilon: f64,
    /// `λ_{k,ε}` for `k = 1..=n`.
    pub rates: Vec<f64>,
    /// `c_k` for `k = 1..=n`.
    pub coefficients: Vec<LogValue>,
    pub backends: Vec<Backend>,
}

impl EpsilonSlice {
    /// `log` of the `k`-th summand `e^{-2λ_{k,ε}t} c_k²` of `d²` (`-∞` when `c_k = 0`).
    pub fn log_summand(&self, k: usize, t: f64) -> f64 {
        let c = self.coefficients[k - 1];
        if c.is_zero() {
            f64::NEG_INFINITY
        } else {
            2.0 * c.log_abs() - 2.0 * self.rates[k - 1] * t
        }
    }

    /// `d_{n,ε}(t)`; the formula is used verbatim for negative `t` too.
    pub fn distance(&self, t: f64) -> LogValue {
        let terms: Vec<f64> = (1..=self.coefficients.len()).map(|k| self.log_summand(k, t)).collect();
        LogValue::from_log(0.5 * crate::spectrum::log_sum_exp(&terms))
    }

    /// `inf {t ≥ 0 : d(t) ≤ η}` by bisection to `1e-10` relative.
    pub fn mixing_time(&self, eta: f64) -> f64 {
        let log_eta = eta.ln();
        if self.distance(0.0).log_abs() <= log_eta {
            return 0.0;
        }
        // d ≤ √n · max_k |c_k| e^{-λ_k t}, so this t is past the crossing.
        let half_log_n = 0.5 * (self.coefficients.len() as f64).ln();
        let mut hi = self
            .coefficients
            .iter()
            .zip(&self.rates)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, r)| (c.log_abs() + half_log_n - log_eta) / r)
            .fold(0.0f64, f64::max);
        let mut lo = 0.0;
        while self.distance(hi).log_abs() > log_eta {
            hi = 2.0 * hi + 1.0;
        }
        while hi - lo > 1e-10 * hi.max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if self.distance(mid).log_abs() > log_eta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// A base (`ε = 1`) eigensystem bound to a cut-off problem.
#[derive(Debug, Clone)]
pub struct CutoffModel {
    es: EigenSystem,
    problem: CutoffProblem,
    centered: Vec<usize>,
    asymptotic: Option<AsymptoticBackend>,
}

impl CutoffModel {
    pub fn new(es: EigenSystem, problem: CutoffProblem) -> Result<Self> {
        if es.epsilon() != 1.0 {
            return Err(invalid("es", "cut-off models need the ε = 1 eigensystem"));
        }
        if es.gamma() != problem.gamma {
            return Err(invalid("es", format!("γ = {} does not match the problem's γ = {}", es.gamma(), problem.gamma)));
        }
        if es.n_modes() < problem.n {
            return Err(invalid("es", format!("holds {} modes, problem needs {}", es.n_modes(), problem.n)));
        }
        let centered = centered_modes(&es, problem.n)?;
        let mut model = Self {
            es,
            problem,
            centered,
            asymptotic: None,
        };
        if model.problem.gamma < 1.0 {
            model.asymptotic = Some(AsymptoticBackend::calibrate(&model)?);
        }
        Ok(model)
    }

    /// Builds [`cutoff_grid`] and solves on it.
    pub fn solve(problem: CutoffProblem) -> Result<Self> {
        let grid = cutoff_grid(&problem)?;
        let es = solve_eigensystem(&problem.potential(), &grid, problem.n)?;
        Self::new(es, problem)
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.es
    }

    pub fn problem(&self) -> &CutoffProblem {
        &self.problem
    }

    /// `E_n = {j ≤ n : ψ_j(0) ≠ 0}`.
    pub fn centered_modes(&self) -> &[usize] {
        &self.centered
    }

    pub fn asymptotic(&self) -> Option<&AsymptoticBackend> {
        self.asymptotic.as_ref()
    }

    /// `λ_{k,ε} = λ_k ε^{(γ-1)/(γ+1)}`.
    pub fn rate(&self, k: usize, epsilon: f64) -> f64 {
        let g = self.problem.gamma;
        self.es.eigenvalue(k) * epsilon.powf((g - 1.0) / (g + 1.0))
    }

    fn check_epsilon(epsilon: f64) -> Result<()> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(())
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if !(1..=self.problem.n).contains(&k) {
            return Err(invalid("k", format!("must lie in 1..={}, got {k}", self.problem.n)));
        }
        Ok(())
    }

    /// Whether the rescaled ball lies inside the numeric reach of the grid.
    pub fn numeric_available(&self, epsilon: f64) -> bool {
        let (x, d) = self.problem.rescaled_ball(epsilon);
        x.abs() + d <= NUMERIC_REACH * self.es.grid().half_width()
    }

    /// `c_k` at noise level `ε` from the requested backend.
    pub fn fourier_coefficient(&self, epsilon: f64, k: usize, backend: Backend) -> Result<LogValue> {
        Self::check_epsilon(epsilon)?;
        self.check_mode(k)?;
        Ok(self.coefficient_with_backend(epsilon, k, backend)?.0)
    }

    fn coefficient_with_backend(&self, epsilon: f64, k: usize, backend: Backend) -> Result<(LogValue, Backend)> {
        match backend {
            Backend::Numeric => Ok((self.numeric_coefficient(epsilon, k)?, Backend::Numeric)),
            Backend::Asymptotic => Ok((self.asymptotic_coefficient(epsilon, k)?, Backend::Asymptotic)),
            Backend::Auto => {
                if self.numeric_available(epsilon) {
                    Ok((self.numeric_coefficient(epsilon, k)?, Backend::Numeric))
                } else if self.asymptotic.is_some() {
                    Ok((self.asymptotic_coefficient(epsilon, k)?, Backend::Asymptotic))
                } else {
                    Err(Error::Capability(format!(
                        "ε = {epsilon:e}: the rescaled ball leaves the grid and no asymptotic backend exists for γ = {}",
                        self.problem.gamma
                    )))
                }
            }
        }
    }

    /// Average of `ψ_k` over `B_δ̂(x̂₀)`, exact for the piecewise-linear interpolant.
    pub fn numeric_coefficient(&self, epsilon: f64, k: usize) -> Result<LogValue> {
        if self.problem.x0 == 0.0 && self.es.parities()[k] == Parity::Odd {
            return Ok(LogValue::ZERO);
        }
        if !self.numeric_available(epsilon) {
            return Err(Error::Capability(format!(
                "ε = {epsilon:e}: the rescaled ball leaves 0.9 L = {:.4}",
                NUMERIC_REACH * self.es.grid().half_width()
            )));
        }
        let (x, d) = self.problem.rescaled_ball(epsilon);
        let integral = self.es.integrate_eigenfunction(k, x - d, x + d)?;
        Ok(LogValue::from_f64(integral).scale_exp(-(2.0 * d).ln()))
    }

    pub fn asymptotic_coefficient(&self, epsilon: f64, k: usize) -> Result<LogValue> {
        let backend = self.asymptotic.as_ref().ok_or_else(|| {
            Error::Capability(format!("no asymptotic backend for γ = {} ≥ 1", self.problem.gamma))
        })?;
        backend.coefficient(&self.problem, epsilon, k)
    }

    pub fn slice(&self, epsilon: f64) -> Result<EpsilonSlice> {
        Self::check_epsilon(epsilon)?;
        let mut coefficients = Vec::with_capacity(self.problem.n);
        let mut backends = Vec::with_capacity(self.problem.n);
        for k in 1..=self.problem.n {
            let (c, b) = self.coefficient_with_backend(epsilon, k, Backend::Auto)?;
            coefficients.push(c);
            backends.push(b);
        }
        Ok(EpsilonSlice {
            epsilon,
            rates: (1..=self.problem.n).map(|k| self.rate(k, epsilon)).collect(),
            coefficients,
            backends,
        })
    }

    /// Slices for every `ε` of the problem grid, computed concurrently, in grid order.
    pub fn slices(&self) -> Result<Vec<EpsilonSlice>> {
        self.problem.epsilon_grid.par_iter().map(|&e| self.slice(e)).collect()
    }

    pub fn distance(&self, epsilon: f64, t: f64) -> Result<LogValue> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("must be nonnegative, got {t}")));
        }
        Ok(self.slice(epsilon)?.distance(t))
    }

    /// The mode pinning `t_ε`: `1` for `γ > 1/3`, `n` for `γ ≤ 1/3`, `max E_n` when `x₀ = 0`.
    pub fn cutoff_mode(&self) -> Result<usize> {
        if self.problem.x0 == 0.0 {
            return self.centered.last().copied().ok_or(Error::Degenerate);
        }
        Ok(if self.problem.gamma <= 1.0 / 3.0 + 1e-12 { self.problem.n } else { 1 })
    }

    /// `t_ε = log|c_j| / λ_{j,ε}`.
    pub fn cutoff_time(&self, epsilon: f64) -> Result<CutoffTime> {
        cutoff_time_of(&self.slice(epsilon)?, self.cutoff_mode()?)
    }

    pub fn mixing_time(&self, epsilon: f64, eta: f64) -> Result<f64> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid("eta", format!("must be positive, got {eta}")));
        }
        Ok(self.slice(epsilon)?.mixing_time(eta))
    }

    /// `d(t_ε + r w_ε)` for each `r`.
    pub fn profile_curve(&self, epsilon: f64, r_grid: &[f64]) -> Result<Vec<LogValue>> {
        let slice = self.slice(epsilon)?;
        let t = cutoff_time_of(&slice, self.cutoff_mode()?)?.t;
        let w = self.problem.window(epsilon);
        Ok(r_grid.iter().map(|r| slice.distance(t + r * w)).collect())
    }
}

pub(crate) fn cutoff_time_of(slice: &EpsilonSlice, mode: usize) -> Result<CutoffTime> {
    let c = slice.coefficients[mode - 1];
    if c.is_zero() {
        return Err(Error::Degenerate);
    }
    Ok(CutoffTime {
        t: c.log_abs() / slice.rates[mode - 1],
        mode,
    })
}
