//! Symmetric tridiagonal eigenpairs by Sturm bisection and inverse iteration.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal, `off[i]` at `(i, i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::EigenSolver(format!(
                "shape mismatch: {} diagonal vs {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE / f64::EPSILON;
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            }
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th smallest eigenvalue (0-based), bisected to machine precision.
    pub fn eigenvalue(&self, index: usize) -> Result<f64> {
        if index >= self.len() {
            return Err(Error::EigenSolver(format!("index {index} exceeds dimension {}", self.len())));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let norm = lo.abs().max(hi.abs());
        lo -= 1e-12 * norm + f64::MIN_POSITIVE;
        hi += 1e-12 * norm + f64::MIN_POSITIVE;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * (lo.abs().max(hi.abs())) {
                return Ok(mid);
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::EigenSolver(format!("bisection for eigenvalue {index} did not converge")))
    }

    /// Unit eigenvector for an accurate eigenvalue `lambda`, by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let lu = ShiftedLu::factor(self, lambda);
        // Deterministic start vector with components along every eigenvector.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_7).sin()).collect();
        normalize(&mut v);
        for _ in 0..4 {
            let mut w = lu.solve(&v);
            if !normalize(&mut w) {
                return Err(Error::EigenSolver("inverse iteration produced a non-finite vector".into()));
            }
            v = w;
        }
        Ok(v)
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(scale.is_finite() && scale > 0.0) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= scale);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// LU with partial pivoting of `T - λI`, the tridiagonal analogue of LAPACK `gttrf`.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, lambda: f64) -> Self {
        let n = t.len();
        let mut d: Vec<f64> = t.diag.iter().map(|x| x - lambda).collect();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let tiny = f64::EPSILON * t.diag.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if let Some(last) = d.last_mut() {
            if *last == 0.0 {
                *last = tiny;
            }
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - self.dl[i] * x[i];
            } else {
                x[i + 1] -= self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        for k in 0..n {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k).unwrap() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvector_residual() {
        let t = SymTridiagonal::new(
            (0..40).map(|i| 1.0 + (i as f64) * 0.3).collect(),
            (0..39).map(|i| 0.5 + 0.01 * i as f64).collect(),
        )
        .unwrap();
        for k in [0, 1, 7, 39] {
            let lam = t.eigenvalue(k).unwrap();
            let v = t.eigenvector(lam).unwrap();
            let tv = t.mul_vec(&v);
            let res = tv.iter().zip(&v).map(|(a, b)| (a - lam * b).abs()).fold(0.0, f64::max);
            assert!(res < 1e-12, "k={k} residual {res}");
        }
    }

    #[test]
    fn sturm_count_brackets() {
        let t = laplacian(10);
        assert_eq!(t.sturm_count(-1.0), 0);
        assert_eq!(t.sturm_count(5.0), 10);
        assert_eq!(t.sturm_count(2.0 - 1e-9), 5);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(SymTridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
    }
}
