use std::collections::BTreeMap;

use super::{build_coeff_table, WkbTerm};
use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::quadrature;
use crate::spectrum::EigenSystem;

/// `|1 - (aγ+b)|` below this is treated as exact resonance.
pub const RESONANCE_BAND: f64 = 1e-6;
/// `|1 - (aγ+b)|` below this (and above [`RESONANCE_BAND`]) is reported as ill-conditioned.
pub const WARNING_BAND: f64 = 1e-3;

/// Antiderivative piece `coefficient · x^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedTerm {
    pub coefficient: f64,
    pub power: f64,
}

/// Instantiated WKB series `Σ_{n≤N} S_n` for one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct WkbSeries {
    gamma: f64,
    lambda: f64,
    truncation: usize,
    turning_point: f64,
    terms: Vec<WkbTerm>,
    /// `(level, coefficient λ^i A_{n,i}(γ), exponent aγ+b)` for each term.
    numeric: Vec<(usize, f64, f64)>,
    integrated: Vec<IntegratedTerm>,
    log_coefficient: Option<f64>,
    resonance: Option<usize>,
    warnings: Vec<String>,
}

/// `N = ⌈(1+γ)/(2γ)⌉`, with a guard so that exact ratios are not pushed up by rounding.
pub fn default_truncation(gamma: f64) -> usize {
    ((1.0 + gamma) / (2.0 * gamma) - 1e-9).ceil().max(1.0) as usize
}

pub fn build_series(p: &Potential, lambda: f64, truncation: Option<usize>) -> Result<WkbSeries> {
    let gamma = p.gamma();
    let n = truncation.unwrap_or_else(|| default_truncation(gamma));
    if !(1..=super::N_MAX_TABLE).contains(&n) {
        return Err(invalid("truncation", format!("must lie in 1..={}, got {n}", super::N_MAX_TABLE)));
    }
    let turning_point = p.turning_point(lambda)?;
    let table = build_coeff_table(n)?;
    let terms: Vec<WkbTerm> = (1..=n).flat_map(|level| table.terms(level)).collect();
    let numeric: Vec<(usize, f64, f64)> = terms
        .iter()
        .map(|t| (t.level, lambda.powi(t.lambda_power as i32) * t.coeff.eval(gamma), t.exponent(gamma)))
        .collect();

    // Merge equal powers (keyed on the exact pair (a, b) would miss coincidences at special γ).
    let mut by_power: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    let mut log_coefficient = None;
    let mut resonance = None;
    let mut warnings = Vec::new();
    for (term, &(_, c, e)) in terms.iter().zip(&numeric) {
        let power = 1.0 - e;
        if power.abs() < RESONANCE_BAND {
            *log_coefficient.get_or_insert(0.0) += c;
            resonance = Some(term.level);
            continue;
        }
        if power.abs() < WARNING_BAND {
            warnings.push(format!(
                "term (n={}, i={}) is near resonance: |1-(aγ+b)| = {:.3e}, condition number {:.3e}",
                term.level,
                term.lambda_power,
                power.abs(),
                1.0 / power.abs()
            ));
        }
        let key = (power * 1e9).round() as i64;
        let entry = by_power.entry(key).or_insert((0.0, power));
        entry.0 += c / power;
    }
    let integrated = by_power
        .into_values()
        .map(|(coefficient, power)| IntegratedTerm { coefficient, power })
        .collect();
    Ok(WkbSeries {
        gamma,
        lambda,
        truncation: n,
        turning_point,
        terms,
        numeric,
        integrated,
        log_coefficient,
        resonance,
        warnings,
    })
}

/// Fitted decay constants and integrability of the remainder ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// `C_k = sup |S_k'(x)| x^{q_k}` for `k = 1..=N`.
    pub constants: Vec<f64>,
    /// `q_k`: `(2k-1)γ` for `γ ≤ 1`, `kγ + k - 1` otherwise.
    pub rates: Vec<f64>,
    /// `∫ |ratio|` over the range, by composite Simpson in `log x`.
    pub ratio_integral: f64,
    /// Log-log slope of `|ratio|` over the last decade of the range.
    pub ratio_tail_exponent: f64,
    pub finite: bool,
    pub integrable: bool,
}

impl WkbSeries {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn turning_point(&self) -> f64 {
        self.turning_point
    }

    pub fn terms(&self) -> &[WkbTerm] {
        &self.terms
    }

    pub fn integrated(&self) -> &[IntegratedTerm] {
        &self.integrated
    }

    pub fn log_coefficient(&self) -> Option<f64> {
        self.log_coefficient
    }

    pub fn resonance(&self) -> Option<usize> {
        self.resonance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `S_n'(x)` for `x > 0`.
    pub fn s_prime(&self, level: usize, x: f64) -> f64 {
        self.numeric
            .iter()
            .filter(|t| t.0 == level)
            .map(|&(_, c, e)| c * x.powf(-e))
            .sum()
    }

    /// `S_n''(x)` for `x > 0`.
    pub fn s_double_prime(&self, level: usize, x: f64) -> f64 {
        self.numeric
            .iter()
            .filter(|t| t.0 == level)
            .map(|&(_, c, e)| -e * c * x.powf(-e - 1.0))
            .sum()
    }

    /// `Σ_{n=1}^{N} S_n'(x)`.
    pub fn sum_s_prime(&self, x: f64) -> f64 {
        self.numeric.iter().map(|&(_, c, e)| c * x.powf(-e)).sum()
    }

    /// `Σ S_n(x)` with all integration constants dropped.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let powers: f64 = self.integrated.iter().map(|t| t.coefficient * x.powf(t.power)).sum();
        powers + self.log_coefficient.map_or(0.0, |c| c * x.ln())
    }

    /// `Σ_{n=1}^{N} S_n(x)` normalized to vanish at the turning point.
    pub fn eval_log_growth(&self, x: f64) -> Result<f64> {
        if !(x >= self.turning_point * (1.0 - 1e-12)) {
            return Err(Error::Precondition(format!(
                "x = {x} lies below the turning point {}",
                self.turning_point
            )));
        }
        Ok(self.antiderivative(x) - self.antiderivative(self.turning_point))
    }

    /// Forcing of the remainder equation: `S_N'' + Σ_{n₁+n₂>N, n₁,n₂≤N} S_{n₁}' S_{n₂}'`.
    pub fn remainder_forcing(&self, x: f64) -> f64 {
        let n = self.truncation;
        let sp: Vec<f64> = (1..=n).map(|k| self.s_prime(k, x)).collect();
        let mut g = self.s_double_prime(n, x);
        for n1 in 1..=n {
            for n2 in 1..=n {
                if n1 + n2 > n {
                    g += sp[n1 - 1] * sp[n2 - 1];
                }
            }
        }
        g
    }

    /// Drift of the remainder equation: `-2 Σ_{j=0}^{N} S_j'` with `S_0' = -x^γ/2`.
    pub fn remainder_drift(&self, x: f64) -> f64 {
        x.powf(self.gamma) - 2.0 * self.sum_s_prime(x)
    }

    /// Fits the decay constants of each level over `[lo, hi] ⊂ [x*, ∞)` and checks that the
    /// remainder ratio `forcing / Σ_{j=0}^{N} S_j'` is integrable.
    pub fn decay_bound_check(&self, lo: f64, hi: f64) -> Result<DecayReport> {
        if !(lo >= self.turning_point * (1.0 - 1e-12) && hi > lo) {
            return Err(Error::Precondition(format!(
                "range [{lo}, {hi}] must lie in [x* = {}, ∞)",
                self.turning_point
            )));
        }
        let samples = 2000;
        let xs: Vec<f64> = (0..=samples)
            .map(|j| lo * (hi / lo).powf(j as f64 / samples as f64))
            .collect();
        let rates: Vec<f64> = (1..=self.truncation)
            .map(|k| {
                let k = k as f64;
                if self.gamma <= 1.0 {
                    (2.0 * k - 1.0) * self.gamma
                } else {
                    k * self.gamma + k - 1.0
                }
            })
            .collect();
        let constants: Vec<f64> = (1..=self.truncation)
            .map(|k| {
                xs.iter()
                    .map(|&x| self.s_prime(k, x).abs() * x.powf(rates[k - 1]))
                    .fold(0.0, f64::max)
            })
            .collect();
        let ratio = |x: f64| self.remainder_forcing(x) / (self.sum_s_prime(x) - 0.5 * x.powf(self.gamma));
        let ratio_integral = quadrature::simpson(
            |s: f64| {
                let x = s.exp();
                ratio(x).abs() * x
            },
            lo.ln(),
            hi.ln(),
            4000,
        );
        let tail_lo = (hi / 10.0).max(lo);
        let ratio_tail_exponent = (ratio(hi).abs().ln() - ratio(tail_lo).abs().ln()) / (hi.ln() - tail_lo.ln());
        let finite = constants.iter().all(|c| c.is_finite()) && ratio_integral.is_finite();
        Ok(DecayReport {
            constants,
            rates,
            ratio_integral,
            ratio_tail_exponent,
            finite,
            integrable: finite && ratio_tail_exponent < -1.0,
        })
    }
}

/// `log|ψ_k| - Σ S_i` sampled on the grid nodes of `[x* + 0.5, 0.9 L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeReport {
    pub mode: usize,
    pub truncation: usize,
    pub range: (f64, f64),
    pub samples: usize,
    /// `max - min` of the difference; bounded iff the remainder is.
    pub oscillation: f64,
}

/// Compares the computed eigenfunction with the series built from its own eigenvalue.
pub fn remainder_bridge(es: &EigenSystem, k: usize, truncation: Option<usize>) -> Result<BridgeReport> {
    if k == 0 || k > es.n_modes() {
        return Err(invalid("k", format!("must lie in 1..={}, got {k}", es.n_modes())));
    }
    let series = build_series(&es.potential(), es.eigenvalue(k), truncation)?;
    let lo = series.turning_point() + 0.5;
    let hi = 0.9 * es.grid().half_width();
    if !(hi > lo) {
        return Err(Error::DomainTooSmall {
            v_edge: es.potential().value(es.grid().half_width()),
        });
    }
    let psi = es.eigenfunction(k);
    let (mut min, mut max, mut samples) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for (x, u) in es.grid().nodes().iter().zip(psi) {
        if *x < lo || *x > hi {
            continue;
        }
        if *u == 0.0 {
            return Err(Error::Domain { quantity: "log|ψ_k|", x: *x });
        }
        let r = u.abs().ln() - series.antiderivative(*x);
        min = min.min(r);
        max = max.max(r);
        samples += 1;
    }
    Ok(BridgeReport {
        mode: k,
        truncation: series.truncation(),
        range: (lo, hi),
        samples,
        oscillation: max - min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_defaults() {
        assert_eq!(default_truncation(0.4), 2);
        assert_eq!(default_truncation(0.5), 2);
        assert_eq!(default_truncation(1.0 / 3.0), 2);
        assert_eq!(default_truncation(0.2), 3);
        assert_eq!(default_truncation(0.25), 3);
        assert_eq!(default_truncation(2.0), 1);
    }

    #[test]
    fn closed_form_second_level() {
        for &g in &[0.4f64, 0.5, 0.9] {
            let p = Potential::new(g).unwrap();
            let lam = 0.8;
            let s = build_series(&p, lam, None).unwrap();
            for &x in &[2.0f64, 7.5, 40.0] {
                let closed = -g * lam * x.powf(-2.0 * g - 1.0) + lam * lam * x.powf(-3.0 * g);
                assert!((s.s_prime(2, x) - closed).abs() <= 1e-14 * closed.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn half_leading_term() {
        let p = Potential::new(0.5).unwrap();
        let s = build_series(&p, 0.75, None).unwrap();
        let lead = s.integrated().iter().find(|t| (t.power - 0.5).abs() < 1e-12).unwrap();
        assert!((lead.coefficient - 1.5).abs() < 1e-14);
        let x = 1e4;
        let growth = s.eval_log_growth(x).unwrap();
        assert!((growth / 150.0 - 1.0).abs() < 0.03);
        assert!(s.resonance().is_none());
        assert_eq!(s.eval_log_growth(s.turning_point()).unwrap(), 0.0);
        assert!(s.eval_log_growth(0.5 * s.turning_point()).is_err());
    }

    #[test]
    fn third_resonance_log() {
        let p = Potential::new(1.0 / 3.0).unwrap();
        let lam = 0.6;
        let s = build_series(&p, lam, None).unwrap();
        assert_eq!(s.truncation(), 2);
        assert_eq!(s.resonance(), Some(2));
        assert!((s.log_coefficient().unwrap() - lam * lam).abs() < 1e-14);
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn near_resonance_warns() {
        let p = Potential::new(1.0 / 3.0 + 1e-4).unwrap();
        let s = build_series(&p, 0.6, None).unwrap();
        assert!(s.resonance().is_none());
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn large_gamma_bounded() {
        let p = Potential::new(2.0).unwrap();
        let s = build_series(&p, 1.24, None).unwrap();
        assert!(s.integrated().iter().all(|t| t.power < 0.0));
        let a = s.eval_log_growth(1e3).unwrap();
        let b = s.eval_log_growth(1e6).unwrap();
        assert!((a - b).abs() < 2e-3);
    }

    #[test]
    fn decay_constants() {
        let lam = 0.75;
        let s = build_series(&Potential::new(0.5).unwrap(), lam, None).unwrap();
        let r = s.decay_bound_check(s.turning_point(), 1e6).unwrap();
        assert!((r.constants[0] - lam).abs() < 1e-12);
        assert!(r.constants[1] <= (0.5 * lam).max(lam * lam) + 1e-12);
        assert!(r.integrable);
        let s2 = build_series(&Potential::new(2.0).unwrap(), 1.24, Some(2)).unwrap();
        let r2 = s2.decay_bound_check(s2.turning_point(), 1e4).unwrap();
        assert!(r2.finite && r2.integrable);
        assert!((r2.rates[1] - 5.0).abs() < 1e-15);
    }
}
