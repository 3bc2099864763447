//! WKB hierarchy for `f(x) = |x|^γ`.
//!
//! With `S_1' = λ/f` and `S_k' = (S_{k-1}'' + Σ_{j=1}^{k-1} S_j' S_{k-j}')/f`, every level is a
//! finite ladder of monomials
//!
//! `S_n'(x) = Σ_{i=1}^{n} λ^i A_{n,i}(γ) x^{-((n+i-1)γ + (n-i))}`
//!
//! whose coefficients `A_{n,i}` are polynomials in `γ` with rational coefficients. The table is
//! built exactly; numeric `γ` enters only when a [`WkbSeries`] is instantiated.

mod poly;
mod series;

use num::{BigInt, BigRational};

pub use poly::CoeffPoly;
pub use series::{build_series, default_truncation, remainder_bridge, BridgeReport, DecayReport, IntegratedTerm, WkbSeries};

use crate::error::{invalid, Result};

pub const N_MAX_TABLE: usize = 12;

/// One monomial `λ^i A_{n,i}(γ) x^{-(aγ + b)}` of `S_n'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WkbTerm {
    pub level: usize,
    pub lambda_power: usize,
    pub coeff: CoeffPoly,
    pub a: usize,
    pub b: usize,
}

impl WkbTerm {
    /// The decay exponent `aγ + b` of this term in `S_n'`.
    pub fn exponent(&self, gamma: f64) -> f64 {
        self.a as f64 * gamma + self.b as f64
    }
}

/// Exact coefficients `A_{n,i}(γ)` for `1 ≤ i ≤ n ≤ n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffTable {
    rows: Vec<Vec<CoeffPoly>>,
}

fn exponent_parts(n: usize, i: usize) -> (usize, usize) {
    (n + i - 1, n - i)
}

pub fn build_coeff_table(n_max: usize) -> Result<CoeffTable> {
    if !(1..=N_MAX_TABLE).contains(&n_max) {
        return Err(invalid("n_max", format!("must lie in 1..={N_MAX_TABLE}, got {n_max}")));
    }
    let int = |k: i64| BigRational::from_integer(BigInt::from(k));
    let mut rows: Vec<Vec<CoeffPoly>> = vec![vec![CoeffPoly::one()]];
    for n in 2..=n_max {
        let mut row = vec![CoeffPoly::zero(); n];
        // Derivative step: d/dx x^{-(aγ+b)} / x^γ multiplies A_{n-1,i} by -(aγ+b).
        for i in 1..n {
            let (a, b) = exponent_parts(n - 1, i);
            let factor = CoeffPoly::from_coefficients(vec![int(-(b as i64)), int(-(a as i64))]);
            row[i - 1] = &row[i - 1] + &(&factor * &rows[n - 2][i - 1]);
        }
        // Product step: λ^p A_{j,p} · λ^q A_{n-j,q} lands on λ^{p+q} at level n.
        for j in 1..n {
            for p in 1..=j {
                for q in 1..=n - j {
                    let prod = &rows[j - 1][p - 1] * &rows[n - j - 1][q - 1];
                    row[p + q - 1] = &row[p + q - 1] + &prod;
                }
            }
        }
        rows.push(row);
    }
    Ok(CoeffTable { rows })
}

impl CoeffTable {
    pub fn n_max(&self) -> usize {
        self.rows.len()
    }

    /// `A_{n,i}`, with `1 ≤ i ≤ n ≤ n_max`.
    pub fn get(&self, n: usize, i: usize) -> &CoeffPoly {
        &self.rows[n - 1][i - 1]
    }

    /// Terms of `S_n'` in increasing `λ` power.
    pub fn terms(&self, n: usize) -> Vec<WkbTerm> {
        (1..=n)
            .map(|i| {
                let (a, b) = exponent_parts(n, i);
                WkbTerm {
                    level: n,
                    lambda_power: i,
                    coeff: self.get(n, i).clone(),
                    a,
                    b,
                }
            })
            .collect()
    }

    pub fn all_terms(&self) -> Vec<WkbTerm> {
        (1..=self.n_max()).flat_map(|n| self.terms(n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, j| acc * (n - j) / (j + 1))
    }

    #[test]
    fn low_levels() {
        let t = build_coeff_table(3).unwrap();
        assert_eq!(t.get(1, 1), &CoeffPoly::one());
        assert_eq!(t.get(2, 1), &CoeffPoly::from_integers(&[0, -1]));
        assert_eq!(t.get(2, 2), &CoeffPoly::one());
        assert_eq!(t.get(3, 1), &CoeffPoly::from_integers(&[0, 1, 2]));
        assert_eq!(t.get(3, 2), &CoeffPoly::from_integers(&[0, -5]));
        assert_eq!(t.get(3, 3), &CoeffPoly::from_integers(&[2]));
    }

    #[test]
    fn diagonal_is_catalan() {
        let t = build_coeff_table(10).unwrap();
        for n in 1..=10u64 {
            let catalan = binomial(2 * (n - 1), n - 1) / n;
            assert_eq!(t.get(n as usize, n as usize), &CoeffPoly::from_integers(&[catalan as i64]));
        }
    }

    #[test]
    fn degree_and_sign_structure() {
        let t = build_coeff_table(N_MAX_TABLE).unwrap();
        for n in 1..=N_MAX_TABLE {
            for i in 1..=n {
                let c = t.get(n, i);
                assert!(c.degree().unwrap() <= n - i);
                let expected = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
                for g in [0.05, 0.3, 0.5, 0.77, 0.99] {
                    assert_eq!(c.eval(g).signum(), expected, "A_({n},{i})({g})");
                }
            }
        }
    }

    #[test]
    fn exponent_pairs() {
        let t = build_coeff_table(5).unwrap();
        for term in t.all_terms() {
            assert_eq!(term.a, term.level + term.lambda_power - 1);
            assert_eq!(term.b, term.level - term.lambda_power);
        }
    }

    #[test]
    fn table_bounds() {
        assert!(build_coeff_table(0).is_err());
        assert!(build_coeff_table(13).is_err());
    }
}
