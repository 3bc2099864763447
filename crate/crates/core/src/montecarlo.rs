//! Euler–Maruyama paths of `dX = -V'(X) dt + √(2ε) dB` from the uniform datum on `B_δ(x₀)`,
//! and Monte Carlo estimates of the Fourier coefficients and truncated χ² distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::spectrum::EigenSystem;

/// Paths are simulated in blocks of this size; each path owns its RNG stream, so the block size
/// does not affect results.
const BLOCK: usize = 512;

/// Largest fraction of states allowed outside the interpolation domain.
pub const MAX_OUTSIDE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub gamma: f64,
    /// `0` switches the noise off.
    pub epsilon: f64,
    pub x0: f64,
    pub delta: f64,
    pub step: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        Potential::new(self.gamma)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be nonnegative, got {}", self.epsilon)));
        }
        if !self.x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("must be nonnegative, got {}", self.delta)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("step", format!("must be positive, got {}", self.step)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "must be at least 1"));
        }
        Ok(())
    }

    /// `sup_{|x| ≤ R} |V'(x)| / max(|x|, 1)` with `R = |x₀| + δ + 6√ε + 1`, a Lipschitz-type
    /// scale of the drift over the region the paths visit.
    pub fn drift_scale(&self) -> f64 {
        let reach = self.x0.abs() + self.delta + 6.0 * self.epsilon.sqrt() + 1.0;
        if self.gamma >= 1.0 {
            reach.powf(self.gamma - 1.0)
        } else {
            1.0
        }
    }

    /// `step · drift_scale`; explicit Euler is comfortably stable below 0.1.
    pub fn stability_product(&self) -> f64 {
        self.step * self.drift_scale()
    }
}

/// States at each observation time, `states[i][p]` for time `i` and path `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub config: SimConfig,
    pub observe_times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stability_product: f64,
}

fn path(cfg: &SimConfig, index: usize, observe_times: &[f64]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut x = cfg.x0 + cfg.delta * (2.0 * rng.gen::<f64>() - 1.0);
    let diffusion = (2.0 * cfg.epsilon).sqrt();
    let g = cfg.gamma;
    let mut out = Vec::with_capacity(observe_times.len());
    let mut t = 0.0;
    for &target in observe_times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / cfg.step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let noise = diffusion * h.sqrt();
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                x += -x.signum() * x.abs().powf(g) * h + noise * z;
            }
        }
        t = target;
        out.push(x);
    }
    out
}

/// Simulates `n_paths` independent paths; path `p` uses stream `p` of a ChaCha8 generator seeded
/// with `seed`, so results are bitwise reproducible for any thread count.
pub fn simulate_paths(cfg: &SimConfig, observe_times: &[f64]) -> Result<Simulation> {
    cfg.validate()?;
    if observe_times.iter().any(|&t| !(t >= 0.0 && t <= cfg.horizon)) {
        return Err(invalid("observe_times", "must lie in [0, horizon]"));
    }
    if observe_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("observe_times", "must be strictly increasing"));
    }
    let blocks: Vec<Vec<Vec<f64>>> = (0..cfg.n_paths.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            (b * BLOCK..((b + 1) * BLOCK).min(cfg.n_paths))
                .map(|p| path(cfg, p, observe_times))
                .collect()
        })
        .collect();
    let mut states = vec![Vec::with_capacity(cfg.n_paths); observe_times.len()];
    for per_path in blocks.iter().flatten() {
        for (row, &x) in states.iter_mut().zip(per_path) {
            row.push(x);
        }
    }
    Ok(Simulation {
        config: *cfg,
        observe_times: observe_times.to_vec(),
        states,
        stability_product: cfg.stability_product(),
    })
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// `ψ_{k,ε}(x)` for each state, skipping states outside the grid.
fn mode_samples(states: &[f64], es: &EigenSystem, epsilon: f64, modes: &[usize]) -> Result<Vec<Vec<f64>>> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive to rescale onto the base grid"));
    }
    let scale = (es.epsilon() / epsilon).powf(1.0 / (1.0 + es.gamma()));
    let l = es.grid().half_width();
    let inside: Vec<f64> = states.iter().map(|x| x * scale).filter(|y| y.abs() <= l).collect();
    let outside = states.len() - inside.len();
    if outside as f64 > MAX_OUTSIDE_FRACTION * states.len() as f64 {
        return Err(Error::OutOfDomain {
            x: states.iter().map(|x| x.abs()).fold(0.0, f64::max),
            half_width: l / scale,
        });
    }
    if inside.len() < 2 {
        return Err(invalid("states", "need at least two states inside the grid"));
    }
    modes
        .iter()
        .map(|&k| inside.iter().map(|&y| es.eval_eigenfunction(k, y)).collect::<Result<Vec<f64>>>())
        .collect()
}

fn mean_and_err(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        value: mean,
        std_err: (var / n).sqrt(),
    }
}

/// Mean of `ψ_{k,ε}(X_t)`; theory predicts `e^{-λ_{k,ε} t} c_k`.
pub fn empirical_coefficient(states: &[f64], es: &EigenSystem, epsilon: f64, k: usize) -> Result<Estimate> {
    let samples = mode_samples(states, es, epsilon, &[k])?;
    Ok(mean_and_err(&samples[0]))
}

/// `(Σ_{k≤n} m_k²)^{1/2}` with a delta-method error that keeps the covariance between modes.
pub fn empirical_distance(states: &[f64], es: &EigenSystem, epsilon: f64, n: usize) -> Result<Estimate> {
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    let modes: Vec<usize> = (1..=n).collect();
    let samples = mode_samples(states, es, epsilon, &modes)?;
    let means: Vec<f64> = samples.iter().map(|s| mean_and_err(s).value).collect();
    let d = means.iter().map(|m| m * m).sum::<f64>().sqrt();
    if d == 0.0 {
        return Ok(Estimate { value: 0.0, std_err: 0.0 });
    }
    // Linearization: d ≈ Σ (m_k/d) · mean(ψ_k), so its error is that of the projected samples.
    let projected: Vec<f64> = (0..samples[0].len())
        .map(|i| samples.iter().zip(&means).map(|(s, m)| m / d * s[i]).sum())
        .collect();
    Ok(Estimate {
        value: d,
        std_err: mean_and_err(&projected).std_err,
    })
}
