//! Eigenpairs of `-L_ε u = -ε u'' + V' u'` on a symmetric grid with Dirichlet ends.
//!
//! The generator is discretized in divergence form `-ε e^{V/ε}(e^{-V/ε} u')'` with
//! midpoint flux weights, so `V''` is never evaluated. Symmetrizing by `√(e^{-V/ε})`
//! gives a symmetric tridiagonal matrix on the interior nodes. Eigenvalues come from
//! Sturm bisection; eigenvectors from inverse iteration in the bulk, with both tails
//! rebuilt by the three-term recurrence run inward from the Dirichlet ends. Inverse
//! iteration alone is only accurate to `1e-16·max|v|`, which destroys the exponential
//! growth of `u` in the tails.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::quadrature;
use crate::tridiag::SymTridiagonal;

/// Bumped whenever a change alters computed eigensystems.
pub const SOLVER_VERSION: &str = "bisect-invit-tail/1";

/// Default cap on the number of modes beyond the ground state.
pub const N_MAX: usize = 8;

/// `V(L)/ε` below this leaves a boundary weight above `1e-30`.
const MIN_EDGE_EXPONENT: f64 = 69.077_552_789_821_37;

/// Absolute spacing ceiling used by the default grids.
const MAX_SPACING: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
    spacing: f64,
    nodes: Vec<f64>,
}

impl Grid {
    /// Uniform grid on `[-L, L]`; `n_points` must be odd so that `0` is a node.
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid("half_width", format!("must be positive, got {half_width}")));
        }
        if n_points < 3 || n_points % 2 == 0 {
            return Err(invalid("n_points", format!("must be odd and at least 3, got {n_points}")));
        }
        let mid = (n_points / 2) as f64;
        let spacing = half_width / mid;
        // Nodes are built symmetrically so that x_i = -x_{n-1-i} exactly.
        let nodes = (0..n_points).map(|i| (i as f64 - mid) * spacing).collect();
        Ok(Self {
            half_width,
            n_points,
            spacing,
            nodes,
        })
    }

    /// Grid on `[-L, L]` whose spacing does not exceed `max_spacing`.
    pub fn with_max_spacing(half_width: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing.is_finite() && max_spacing > 0.0) {
            return Err(invalid("max_spacing", format!("must be positive, got {max_spacing}")));
        }
        let half = (half_width / max_spacing).ceil() as usize;
        Self::new(half_width, 2 * half.max(1) + 1)
    }

    /// `L = x*(1.2 λ_n) + 10·max(1, λ_n^{1/(1+γ)})` with `λ_n` from a coarse pre-solve.
    pub fn default_for(p: &Potential, n_modes: usize) -> Result<Self> {
        let lambda_n = coarse_eigenvalue(p, n_modes)?;
        let g = p.gamma();
        let mut half_width = if lambda_n > 0.0 {
            p.turning_point(1.2 * lambda_n)? + 10.0 * lambda_n.powf(1.0 / (1.0 + g)).max(1.0)
        } else {
            10.0
        };
        half_width = half_width.max(edge_half_width(p, 1.2 * MIN_EDGE_EXPONENT));
        Self::with_max_spacing(half_width, default_spacing(half_width))
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the node `x = 0`.
    pub fn center(&self) -> usize {
        self.n_points / 2
    }
}

/// Spacing used by default grids of half-width `L`.
pub fn default_spacing(half_width: f64) -> f64 {
    (2e-3 * half_width).min(MAX_SPACING)
}

/// Half-width at which `V(L) = level`.
pub fn edge_half_width(p: &Potential, level: f64) -> f64 {
    ((p.gamma() + 1.0) * level).powf(1.0 / (p.gamma() + 1.0))
}

fn coarse_eigenvalue(p: &Potential, n_modes: usize) -> Result<f64> {
    let half_width = edge_half_width(p, 150.0);
    let grid = Grid::new(half_width, 2001)?;
    build_operator_eps(p, &grid, 1.0)?.eigenvalue(n_modes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_index(k: usize) -> Self {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Exponents `(V(x_{i±1/2}) - V(x_i))/ε` and `(V(x_{i+1/2}) - (V_i + V_{i+1})/2)/ε` on the full grid.
struct Stencil {
    /// `V(x_i)/ε` at every node.
    v: Vec<f64>,
    /// `V(x_{i+1/2})/ε` for `i = 0..n-1`.
    v_mid: Vec<f64>,
}

impl Stencil {
    fn new(p: &Potential, grid: &Grid, epsilon: f64) -> Self {
        let h = grid.spacing;
        let v = grid.nodes.iter().map(|&x| p.value(x) / epsilon).collect();
        let v_mid = grid.nodes[..grid.n_points - 1]
            .iter()
            .map(|&x| p.value(x + 0.5 * h) / epsilon)
            .collect();
        Self { v, v_mid }
    }
}

/// Symmetric interior matrix of the discretized `-L_ε`.
pub fn build_operator(p: &Potential, grid: &Grid) -> Result<SymTridiagonal> {
    build_operator_eps(p, grid, 1.0)
}

pub fn build_operator_eps(p: &Potential, grid: &Grid, epsilon: f64) -> Result<SymTridiagonal> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    let v_edge = p.value(grid.half_width) / epsilon;
    if v_edge <= MIN_EDGE_EXPONENT {
        return Err(Error::DomainTooSmall { v_edge });
    }
    let s = Stencil::new(p, grid, epsilon);
    let n = grid.n_points;
    let c = epsilon / (grid.spacing * grid.spacing);
    let diag: Vec<f64> = (1..n - 1)
        .map(|i| c * ((s.v[i] - s.v_mid[i]).exp() + (s.v[i] - s.v_mid[i - 1]).exp()))
        .collect();
    let off = (1..n - 2)
        .map(|i| -c * (0.5 * (s.v[i] + s.v[i + 1]) - s.v_mid[i]).exp())
        .collect();
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::EigenSolver(
            "stencil weights overflow; the spacing is too coarse for V' near the edge".into(),
        ));
    }
    SymTridiagonal::new(diag, off)
}

/// Applies the unsymmetrized discrete `-L_ε` to full-grid samples `u`; returns interior values.
pub fn apply_generator(p: &Potential, grid: &Grid, epsilon: f64, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != grid.n_points {
        return Err(invalid("u", format!("expected {} samples, got {}", grid.n_points, u.len())));
    }
    let s = Stencil::new(p, grid, epsilon);
    let c = epsilon / (grid.spacing * grid.spacing);
    Ok((1..grid.n_points - 1)
        .map(|i| {
            let right = (s.v[i] - s.v_mid[i]).exp() * (u[i] - u[i + 1]);
            let left = (s.v[i] - s.v_mid[i - 1]).exp() * (u[i] - u[i - 1]);
            c * (right + left)
        })
        .collect())
}

/// Grid-sampled orthonormal eigenpairs of `-L_ε` in `L²(C_ε e^{-V/ε})`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    gamma: f64,
    epsilon: f64,
    grid: Grid,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Vec<f64>>,
    parities: Vec<Parity>,
    quad_weight: Vec<f64>,
}

pub fn solve_eigensystem(p: &Potential, grid: &Grid, n_modes: usize) -> Result<EigenSystem> {
    solve_eigensystem_eps(p, grid, n_modes, 1.0)
}

/// Direct solve of the `ε`-operator; used to verify the scaling law.
pub fn solve_eigensystem_eps(p: &Potential, grid: &Grid, n_modes: usize, epsilon: f64) -> Result<EigenSystem> {
    if n_modes < 1 {
        return Err(invalid("n_modes", "must be at least 1"));
    }
    if n_modes + 1 > grid.n_points - 2 {
        return Err(invalid("n_modes", "exceeds the number of interior nodes"));
    }
    let t = build_operator_eps(p, grid, epsilon)?;
    let s = Stencil::new(p, grid, epsilon);
    let log_c = p.log_partition(epsilon)?.log_c_eps;
    let log_qw: Vec<f64> = s.v.iter().map(|v| grid.spacing.ln() + log_c - v).collect();

    let mut eigenvalues = Vec::with_capacity(n_modes + 1);
    let mut eigenfunctions = Vec::with_capacity(n_modes + 1);
    let mut previous: Vec<Vec<f64>> = Vec::new();
    for k in 0..=n_modes {
        let lambda = t.eigenvalue(k)?;
        let mut v = t.eigenvector(lambda)?;
        for w in &previous {
            let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(w).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let u = reconstruct(&s, grid, epsilon, lambda, &v, &log_qw)?;
        previous.push(v);
        eigenvalues.push(lambda);
        eigenfunctions.push(u);
    }

    if eigenvalues[0].abs() > 1e-6 {
        return Err(Error::EigenSolver(format!(
            "ground eigenvalue {} is not zero within 1e-6",
            eigenvalues[0]
        )));
    }
    if let Some(k) = (0..n_modes).find(|&k| eigenvalues[k + 1] <= eigenvalues[k]) {
        return Err(Error::EigenSolver(format!("eigenvalues {k} and {} are not separated", k + 1)));
    }
    let quad_weight: Vec<f64> = log_qw.iter().map(|l| l.exp()).collect();
    let parities = eigenfunctions.iter().map(|u| parity_of(u, &quad_weight)).collect();
    Ok(EigenSystem {
        gamma: p.gamma(),
        epsilon,
        grid: grid.clone(),
        eigenvalues,
        eigenfunctions,
        parities,
        quad_weight,
    })
}

/// Signed-log samples of `u` built by the inward recurrence from the boundary node `edge`
/// toward `stop` (exclusive of `edge`, inclusive of `stop`); `step` is `-1` from the right.
fn tail_recurrence(s: &Stencil, grid: &Grid, epsilon: f64, lambda: f64, right: bool, stop: usize) -> Vec<(f64, f64)> {
    let n = grid.n_points;
    let h2 = grid.spacing * grid.spacing;
    let mut out = vec![(0.0, f64::NEG_INFINITY); n];
    // (u_outer, u_current) normalized so that the larger magnitude is O(1); `log_scale` carries the rest.
    let (mut outer, mut current) = (0.0f64, 1.0f64);
    let mut log_scale = 0.0f64;
    let mut i = if right { n - 2 } else { 1 };
    loop {
        out[i] = (current.signum(), current.abs().ln() + log_scale);
        if i == stop {
            break;
        }
        // Midpoint between i and its outer / inner neighbours.
        let (mid_outer, mid_inner) = if right { (i, i - 1) } else { (i - 1, i) };
        let ratio = (s.v_mid[mid_inner] - s.v_mid[mid_outer]).exp();
        let leak = (s.v_mid[mid_inner] - s.v[i]).exp();
        let inner = current + ratio * (current - outer) - lambda * h2 / epsilon * leak * current;
        outer = current;
        current = inner;
        let big = current.abs().max(outer.abs());
        if big > 1e100 || (big < 1e-100 && big > 0.0) {
            outer /= big;
            current /= big;
            log_scale += big.ln();
        }
        i = if right { i - 1 } else { i + 1 };
    }
    out
}

/// Back-transforms the symmetric-gauge vector `v`, replacing both tails by the boundary recurrence,
/// normalizing in `L²(C_ε e^{-V/ε})`, and fixing the sign at the largest interior node.
fn reconstruct(s: &Stencil, grid: &Grid, epsilon: f64, lambda: f64, v: &[f64], log_qw: &[f64]) -> Result<Vec<f64>> {
    let n = grid.n_points;
    // v is indexed by interior node; full index = interior index + 1.
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let threshold = 1e-6 * vmax;
    let right_match = v.iter().rposition(|x| x.abs() >= threshold).unwrap() + 1;
    let left_match = v.iter().position(|x| x.abs() >= threshold).unwrap() + 1;

    // Signed logs of u on the full grid; boundary nodes stay at zero.
    let mut log_u = vec![(0.0, f64::NEG_INFINITY); n];
    for i in left_match..=right_match {
        let vi = v[i - 1];
        if vi != 0.0 {
            log_u[i] = (vi.signum(), vi.abs().ln() + 0.5 * s.v[i]);
        }
    }
    for (right, matched) in [(true, right_match), (false, left_match)] {
        let tail = tail_recurrence(s, grid, epsilon, lambda, right, matched);
        let (sign_fix, shift) = {
            let (sb, lb) = log_u[matched];
            let (st, lt) = tail[matched];
            (sb * st, lb - lt)
        };
        let range: Vec<usize> = if right { (matched..n - 1).collect() } else { (1..=matched).collect() };
        for i in range {
            let (st, lt) = tail[i];
            log_u[i] = if lt.is_finite() { (st * sign_fix, lt + shift) } else { (0.0, f64::NEG_INFINITY) };
        }
    }

    let log_terms: Vec<f64> = log_u.iter().zip(log_qw).map(|(&(_, lu), &lq)| 2.0 * lu + lq).collect();
    let log_norm2 = log_sum_exp(&log_terms);
    let sign = if log_u[n - 2].0 < 0.0 { -1.0 } else { 1.0 };
    let u: Vec<f64> = log_u
        .iter()
        .map(|&(sg, lu)| if sg == 0.0 { 0.0 } else { sign * sg * (lu - 0.5 * log_norm2).exp() })
        .collect();
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenSolver(
            "eigenfunction overflows double precision on this grid; reduce the half-width".into(),
        ));
    }
    Ok(u)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn parity_of(u: &[f64], qw: &[f64]) -> Parity {
    let n = u.len();
    let (mut even, mut odd) = (0.0, 0.0);
    for i in 0..n {
        let m = u[n - 1 - i];
        even += qw[i] * (u[i] + m).powi(2);
        odd += qw[i] * (u[i] - m).powi(2);
    }
    if even >= odd {
        Parity::Even
    } else {
        Parity::Odd
    }
}

impl EigenSystem {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn potential(&self) -> Potential {
        Potential::new(self.gamma).expect("gamma validated at construction")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of modes beyond the ground state.
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn eigenfunction(&self, k: usize) -> &[f64] {
        &self.eigenfunctions[k]
    }

    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }

    pub fn quad_weight(&self) -> &[f64] {
        &self.quad_weight
    }

    /// Weighted inner product `⟨ψ_j, ψ_k⟩` with the stored quadrature weights.
    pub fn inner_product(&self, j: usize, k: usize) -> f64 {
        let (a, b) = (&self.eigenfunctions[j], &self.eigenfunctions[k]);
        self.quad_weight.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k > self.n_modes() {
            return Err(invalid("k", format!("mode {k} exceeds n_modes = {}", self.n_modes())));
        }
        Ok(())
    }

    /// Piecewise-linear interpolation of `ψ_k` at `x`.
    pub fn eval_eigenfunction(&self, k: usize, x: f64) -> Result<f64> {
        self.check_mode(k)?;
        let l = self.grid.half_width;
        if !(x.abs() <= l) {
            return Err(Error::OutOfDomain { x, half_width: l });
        }
        let pos = (x + l) / self.grid.spacing;
        let i = (pos.floor() as usize).min(self.grid.n_points - 2);
        let frac = pos - i as f64;
        let row = &self.eigenfunctions[k];
        Ok(row[i] + frac * (row[i + 1] - row[i]))
    }

    /// Exact integral of the linear interpolant of `ψ_k` over `[a, b]`.
    pub fn integrate_eigenfunction(&self, k: usize, a: f64, b: f64) -> Result<f64> {
        self.check_mode(k)?;
        let l = self.grid.half_width;
        for x in [a, b] {
            if !(x.abs() <= l) {
                return Err(Error::OutOfDomain { x, half_width: l });
            }
        }
        if b < a {
            return Ok(-self.integrate_eigenfunction(k, b, a)?);
        }
        let h = self.grid.spacing;
        let row = &self.eigenfunctions[k];
        let last = self.grid.n_points - 2;
        let ia = (((a + l) / h).floor() as usize).min(last);
        let ib = (((b + l) / h).floor() as usize).min(last);
        let node = |i: usize| -l + i as f64 * h;
        let segment = |i: usize, lo: f64, hi: f64| {
            let slope = (row[i + 1] - row[i]) / h;
            let at = |x: f64| row[i] + slope * (x - node(i));
            0.5 * (at(lo) + at(hi)) * (hi - lo)
        };
        if ia == ib {
            return Ok(segment(ia, a, b));
        }
        let mut total = segment(ia, a, node(ia + 1)) + segment(ib, node(ib), b);
        for i in ia + 1..ib {
            total += 0.5 * (row[i] + row[i + 1]) * h;
        }
        Ok(total)
    }

    /// Strict sign changes of `ψ_k` across interior nodes, ignoring samples below `1e-10·max|ψ_k|`.
    pub fn zero_count(&self, k: usize) -> usize {
        let row = &self.eigenfunctions[k];
        let n = row.len();
        let floor = 1e-10 * self.bulk_sup(k);
        let mut count = 0;
        let mut last = 0.0f64;
        for &u in &row[1..n - 1] {
            if u.abs() <= floor {
                continue;
            }
            if last != 0.0 && u.signum() != last {
                count += 1;
            }
            last = u.signum();
        }
        count
    }

    /// `max |ψ_k|` over the whole grid.
    pub fn sup_norm(&self, k: usize) -> f64 {
        self.eigenfunctions[k].iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `max |ψ_k|` over `|x| ≤ x*(λ_k) + 1`, the oscillatory core of the mode.
    pub fn bulk_sup(&self, k: usize) -> f64 {
        let p = self.potential();
        let lambda = self.eigenvalues[k] / self.epsilon.powf((self.gamma - 1.0) / (self.gamma + 1.0));
        let reach = if lambda > 1e-8 {
            p.turning_point(lambda).map(|x| x + 1.0).unwrap_or(self.grid.half_width)
                * self.epsilon.powf(1.0 / (1.0 + self.gamma))
        } else {
            self.grid.half_width
        };
        self.grid
            .nodes
            .iter()
            .zip(&self.eigenfunctions[k])
            .filter(|(x, _)| x.abs() <= reach)
            .fold(0.0f64, |m, (_, u)| m.max(u.abs()))
    }

    /// `∫ C_ε e^{-V/ε} dx` by the stored weights; equals 1 up to truncation at `±L`.
    pub fn total_weight(&self) -> f64 {
        let vals: Vec<f64> = self.quad_weight.iter().map(|w| w / self.grid.spacing).collect();
        quadrature::trapezoid(&vals, self.grid.spacing)
    }

    pub fn to_record(&self) -> EigenSystemRecord {
        EigenSystemRecord {
            gamma: self.gamma,
            half_width: self.grid.half_width,
            n_points: self.grid.n_points,
            n_modes: self.n_modes(),
            eigenvalues: self.eigenvalues.clone(),
            parities: self.parities.clone(),
            eigenfunctions: self.eigenfunctions.clone(),
            solver_version: SOLVER_VERSION.to_string(),
        }
    }

    /// Rebuilds a base (`ε = 1`) eigensystem from a stored record; quadrature weights are recomputed.
    pub fn from_record(record: EigenSystemRecord) -> Result<Self> {
        if record.solver_version != SOLVER_VERSION {
            return Err(invalid("solver_version", format!("record has {}", record.solver_version)));
        }
        let p = Potential::new(record.gamma)?;
        let grid = Grid::new(record.half_width, record.n_points)?;
        let rows = record.n_modes + 1;
        if record.eigenvalues.len() != rows
            || record.parities.len() != rows
            || record.eigenfunctions.len() != rows
            || record.eigenfunctions.iter().any(|r| r.len() != grid.n_points)
        {
            return Err(invalid("record", "array lengths do not match n_modes and n_points"));
        }
        let log_c = p.log_partition(1.0)?.log_c_eps;
        let quad_weight = grid
            .nodes
            .iter()
            .map(|&x| (grid.spacing.ln() + log_c - p.value(x)).exp())
            .collect();
        Ok(Self {
            gamma: record.gamma,
            epsilon: 1.0,
            grid,
            eigenvalues: record.eigenvalues,
            eigenfunctions: record.eigenfunctions,
            parities: record.parities,
            quad_weight,
        })
    }
}

/// Serialized form of a base eigensystem, as stored in the on-disk cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystemRecord {
    pub gamma: f64,
    pub half_width: f64,
    pub n_points: usize,
    pub n_modes: usize,
    pub eigenvalues: Vec<f64>,
    pub parities: Vec<Parity>,
    pub eigenfunctions: Vec<Vec<f64>>,
    pub solver_version: String,
}
