//! The monomial potential `V(x) = |x|^(γ+1) / (γ+1)` and derived quantities.

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// Convex monomial potential with the normalizing constant fixed to `1/(γ+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    gamma: f64,
}

/// Normalization of the Gibbs density `C_ε e^{-V/ε}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionConstants {
    pub epsilon: f64,
    pub log_c_eps: f64,
    pub log_z_eps: f64,
}

impl Potential {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("must be positive and finite, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    /// Constructs `K|x|^(γ+1)`; only `K = 1/(γ+1)` is accepted.
    pub fn with_constant(gamma: f64, k: f64) -> Result<Self> {
        let p = Self::new(gamma)?;
        if k != p.k_gamma() {
            return Err(invalid("k_gamma", format!("must equal 1/(gamma+1) = {}, got {k}", p.k_gamma())));
        }
        Ok(p)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k_gamma(&self) -> f64 {
        1.0 / (self.gamma + 1.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        x.abs().powf(self.gamma + 1.0) / (self.gamma + 1.0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        x.signum() * x.abs().powf(self.gamma)
    }

    pub fn second_derivative(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return if self.gamma < 1.0 {
                Err(Error::Domain { quantity: "V''", x })
            } else if self.gamma == 1.0 {
                Ok(1.0)
            } else {
                Ok(0.0)
            };
        }
        Ok(self.gamma * x.abs().powf(self.gamma - 1.0))
    }

    /// Closed form `Z_ε = 2((γ+1)ε)^{1/(γ+1)} Γ(1 + 1/(γ+1))`, in logs.
    pub fn log_partition(&self, epsilon: f64) -> Result<PartitionConstants> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        let q = 1.0 / (self.gamma + 1.0);
        let log_z = std::f64::consts::LN_2 + q * ((self.gamma + 1.0) * epsilon).ln() + ln_gamma(1.0 + q);
        Ok(PartitionConstants {
            epsilon,
            log_c_eps: -log_z,
            log_z_eps: log_z,
        })
    }

    /// `log Z_ε` by adaptive quadrature of `e^{-V/ε}`; the oracle for [`Self::log_partition`].
    pub fn log_partition_quadrature(&self, epsilon: f64) -> f64 {
        // e^{-V/ε} < 1e-300 beyond V/ε = 700.
        let cutoff = (700.0 * epsilon * (self.gamma + 1.0)).powf(1.0 / (self.gamma + 1.0));
        let half = quadrature::integrate(|x| (-self.value(x) / epsilon).exp(), 0.0, cutoff, 1e-14);
        (2.0 * half).ln()
    }

    /// Schrödinger potential `T(x) = V'(x)^2/4 - V''(x)/2 - λ` for `x > 0`.
    pub fn schrodinger(&self, lambda: f64, x: f64) -> f64 {
        let g = self.gamma;
        0.25 * x.powf(2.0 * g) - 0.5 * g * x.powf(g - 1.0) - lambda
    }

    pub fn turning_point(&self, lambda: f64) -> Result<f64> {
        let bound = 10.0 * (4.0 * lambda + 2.0).powf(1.0 / self.gamma);
        self.turning_point_within(lambda, bound)
    }

    /// Smallest `x* > 0` with `T ≥ 0` on `[x*, ∞)`, searched below `bound`.
    pub fn turning_point_within(&self, lambda: f64, bound: f64) -> Result<f64> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid("lambda", format!("must be positive, got {lambda}")));
        }
        if self.schrodinger(lambda, bound) < 0.0 {
            return Err(Error::NoTurningPoint { lambda, bound });
        }
        // T has a single sign change on (0, ∞); scan geometrically from below for the last negative sample.
        let samples = 4000;
        let lo_start = bound * 1e-12;
        let ratio = (bound / lo_start).powf(1.0 / samples as f64);
        let mut last_negative = None;
        let mut x = lo_start;
        for _ in 0..=samples {
            if self.schrodinger(lambda, x) < 0.0 {
                last_negative = Some(x);
            }
            x *= ratio;
        }
        let Some(mut lo) = last_negative else {
            return Err(Error::NoTurningPoint { lambda, bound });
        };
        let mut hi = (lo * ratio).min(bound);
        while hi - lo > 1e-12 * hi.max(1.0) * 0.5 && hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if self.schrodinger(lambda, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}
