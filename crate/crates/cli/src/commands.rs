//! One function per subcommand. Parameters are parsed and checked against the library's
//! preconditions before any numerical work, so that bad input exits with status 1.

use rayon::prelude::*;
use serde_json::json;

use cutlab::cutoff::{
    cutoff_grid, cutoff_report, mixing_bracket_check, CutoffModel, CutoffProblem, DeltaRule, Thresholds, Verdict,
};
use cutlab::montecarlo::{empirical_distance, simulate_paths, SimConfig};
use cutlab::phase::{integrate_phase, PhaseSystem, PhaseTrajectory};
use cutlab::spectrum::{default_spacing, Grid};
use cutlab::wkb::build_coeff_table;
use cutlab::{Potential, ScaledEigenview};

use crate::cache::EigenCache;
use crate::config::{ParamSpec, Resolved};
use crate::output::{num, Csv, Writer};
use crate::CliError;

fn invalid(e: cutlab::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

pub struct Context {
    pub cache: EigenCache,
    pub out: Writer,
}

pub const SPECTRUM: ParamSpec = &[
    ("gamma", None),
    ("n_modes", Some("5")),
    ("epsilon", Some("1")),
    ("half_width", Some("")),
    ("n_points", Some("")),
];

pub fn spectrum(cfg: &Resolved, ctx: &mut Context) -> Result<(), CliError> {
    let gamma: f64 = cfg.get("gamma")?;
    let n_modes: usize = cfg.get("n_modes")?;
    let epsilon: f64 = cfg.get("epsilon")?;
    let p = Potential::new(gamma).map_err(invalid)?;
    require(n_modes >= 1, || "n_modes must be at least 1".into())?;
    require(epsilon > 0.0 && epsilon.is_finite(), || format!("epsilon must be positive, got {epsilon}"))?;
    let grid = match (cfg.get_opt::<f64>("half_width")?, cfg.get_opt::<usize>("n_points")?) {
        (None, None) => Grid::default_for(&p, n_modes),
        (Some(l), None) => Grid::with_max_spacing(l, default_spacing(l)),
        (Some(l), Some(m)) => Grid::new(l, m),
        (None, Some(m)) => Grid::default_for(&p, n_modes).and_then(|g| Grid::new(g.half_width(), m)),
    }
    .map_err(invalid)?;

    let (es, _) = ctx.cache.solve(&p, &grid, n_modes)?;
    let view = ScaledEigenview::new(&es, epsilon)?;
    let mut table = Csv::new(&["k", "eigenvalue", "base_eigenvalue", "parity", "zero_count"]);
    for k in 0..=n_modes {
        table.row(&[
            k.to_string(),
            num(view.scaled_eigenvalue(k)),
            num(es.eigenvalue(k)),
            format!("{:?}", es.parities()[k]).to_lowercase(),
            es.zero_count(k).to_string(),
        ]);
    }
    ctx.out.csv("spectrum.csv", cfg, &table)?;

    let mut header = vec!["x".to_string()];
    header.extend((0..=n_modes).map(|k| format!("psi_{k}")));
    let mut modes = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    let scale = view.length_scale();
    for (i, &y) in grid.nodes().iter().enumerate() {
        let mut row = vec![num(y * scale)];
        for k in 0..=n_modes {
            let v = if epsilon == 1.0 {
                es.eigenfunction(k)[i]
            } else {
                // Rescaled nodes can round a hair past the base grid.
                let x = y * scale * (1.0 - 1e-15);
                view.scaled_eigenfunction(k, x)?
            };
            row.push(num(v));
        }
        modes.row(&row);
    }
    ctx.out.csv("eigenfunctions.csv", cfg, &modes)
}

pub const WKB_TABLE: ParamSpec = &[("n_max", Some("6"))];

pub fn wkb_table(cfg: &Resolved, ctx: &mut Context) -> Result<(), CliError> {
    let n_max: usize = cfg.get("n_max")?;
    let table = build_coeff_table(n_max).map_err(invalid)?;
    let mut csv = Csv::new(&["n", "i", "a", "b", "coeff_poly_as_rationals"]);
    for t in table.all_terms() {
        csv.row(&[
            t.level.to_string(),
            t.lambda_power.to_string(),
            t.a.to_string(),
            t.b.to_string(),
            t.coeff.to_rational_list(),
        ]);
    }
    ctx.out.csv("wkb_table.csv", cfg, &csv)
}

pub const PHASE_PORTRAIT: ParamSpec = &[
    ("gamma", None),
    ("k", Some("1")),
    ("theta0", Some("-1.2,-0.3,0,0.3,1.2")),
    ("horizon", Some("")),
    ("step", Some("1e-3")),
    ("rows", Some("2000")),
];

/// Evenly spaced subsample keeping both endpoints.
fn thin(tr: &PhaseTrajectory, rows: usize) -> Vec<usize> {
    let n = tr.times.len();
    if n <= rows {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..rows).map(|j| j * (n - 1) / (rows - 1)).collect();
    idx.dedup();
    idx
}

pub fn phase_portrait(cfg: &Resolved, ctx: &mut Context) -> Result<(), CliError> {
    let gamma: f64 = cfg.get("gamma")?;
    let k: usize = cfg.get("k")?;
    let starts = cfg.list("theta0")?;
    let horizon: Option<f64> = cfg.get_opt("horizon")?;
    let step: f64 = cfg.get("step")?;
    let rows: usize = cfg.get("rows")?;
    let p = Potential::new(gamma).map_err(invalid)?;
    require(k >= 1, || "k must be at least 1".into())?;
    require(step > 0.0 && step.is_finite(), || format!("step must be positive, got {step}"))?;
    require(rows >= 2, || "rows must be at least 2".into())?;
    require(starts.iter().all(|t| t.is_finite()), || "theta0 entries must be finite".into())?;
    let grid = Grid::default_for(&p, k).map_err(invalid)?;

    let (es, _) = ctx.cache.solve(&p, &grid, k)?;
    let sys = PhaseSystem::eigen_equation(&p, es.eigenvalue(k))?;
    let horizon = horizon.unwrap_or_else(|| sys.default_horizon());
    require(horizon > sys.t_start(), || {
        format!("horizon {horizon} must exceed the turning point {}", sys.t_start())
    })?;
    let trajectories: Vec<PhaseTrajectory> = starts
        .par_iter()
        .map(|&th| integrate_phase(&sys, th, horizon, step))
        .collect::<cutlab::Result<_>>()?;
    for (j, tr) in trajectories.iter().enumerate() {
        let mut csv = Csv::new(&["t", "theta", "log_r"]);
        for i in thin(tr, rows) {
            csv.row(&[num(tr.times[i]), num(tr.theta[i]), num(tr.log_r[i])]);
        }
        ctx.out.csv(&format!("phase_portrait_{j}.csv"), cfg, &csv)?;
    }
    Ok(())
}

pub const CUTOFF_PROFILE: ParamSpec = &[
    ("gamma", None),
    ("x0", None),
    ("n", None),
    ("epsilons", Some("")),
    ("delta_rule", Some("auto")),
    ("r_min", Some("-2")),
    ("r_max", Some("2")),
    ("r_points", Some("41")),
];

pub const MIXING_TIME: ParamSpec = &[
    ("gamma", None),
    ("x0", None),
    ("n", None),
    ("epsilons", Some("")),
    ("delta_rule", Some("auto")),
    ("etas", Some("0.5,0.1,0.01")),
];

pub const REGIME: ParamSpec = &[
    ("gamma", None),
    ("x0", None),
    ("n", None),
    ("epsilons", Some("")),
    ("delta_rule", Some("auto")),
    ("etas", Some("0.5,0.1,0.01")),
    ("r_min", Some("-2")),
    ("r_max", Some("2")),
    ("r_points", Some("41")),
];

fn delta_rule(cfg: &Resolved, gamma: f64) -> Result<DeltaRule, CliError> {
    match cfg.raw("delta_rule").unwrap_or("auto") {
        "auto" if gamma < 1.0 => Ok(DeltaRule::ScalingRule),
        "auto" | "unit" => Ok(DeltaRule::Unit),
        "scaling" => Ok(DeltaRule::ScalingRule),
        other => Err(CliError::Config(format!("delta_rule must be auto, scaling or unit, got `{other}`"))),
    }
}

fn cutoff_problem(cfg: &Resolved) -> Result<CutoffProblem, CliError> {
    let gamma: f64 = cfg.get("gamma")?;
    let grid = cfg
        .list_opt("epsilons")?
        .unwrap_or_else(cutlab::cutoff::default_epsilon_grid);
    CutoffProblem::new(gamma, cfg.get("x0")?, cfg.get("n")?, delta_rule(cfg, gamma)?, grid).map_err(invalid)
}

fn cutoff_model(problem: CutoffProblem, ctx: &Context) -> Result<CutoffModel, CliError> {
    let grid = cutoff_grid(&problem)?;
    let (es, _) = ctx.cache.solve(&problem.potential(), &grid, problem.n)?;
    Ok(CutoffModel::new(es, problem)?)
}

fn r_grid(cfg: &Resolved) -> Result<Vec<f64>, CliError> {
    let (lo, hi): (f64, f64) = (cfg.get("r_min")?, cfg.get("r_max")?);
    let m: usize = cfg.get("r_points")?;
    require(lo.is_finite() && hi.is_finite() && lo < hi, || format!("need r_min < r_max, got {lo}, {hi}"))?;
    require(m >= 2, || "r_points must be at least 2".into())?;
    Ok((0..m).map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64).collect())
}

fn etas(cfg: &Resolved) -> Result<Vec<f64>, CliError> {
    let etas = cfg.list("etas")?;
    require(etas.iter().all(|&e| e > 0.0 && e.is_finite()), || "etas must be positive".into())?;
    Ok(etas)
}

pub fn cutoff_profile(cfg: &Resolved, ctx: &mut Context) -> Result<(), CliError> {
    let problem = cutoff_problem(cfg)?;
    let rs = r_grid(cfg)?;
    let model = cutoff_model(problem, ctx)?;
    let curves: Vec<_> = model
        .problem()
        .epsilon_grid
        .par_iter()
        .map(|&e| model.profile_curve(e, &rs))
        .collect::<cutlab::Result<_>>()?;
    let mut csv = Csv::new(&["epsilon", "r", "distance_log"]);
    for (&e, curve) in model.problem().epsilon_grid.iter().zip(&curves) {
        for (r, d) in rs.iter().zip(curve) {
            csv.row(&[num(e), num(*r), num(d.log_abs())]);
        }
    }
    ctx.out.csv("cutoff_profile.csv", cfg, &csv)
}

pub fn mixing_time(cfg: &Resolved, ctx: &mut Context) -> Result<(), CliError> {
    let problem = cutoff_problem(cfg)?;
    let etas = etas(cfg)?;
    let model = cutoff_model(problem, ctx)?;
    let rows: Vec<Vec<[f64; 5]>> = model
        .problem()
        .epsilon_grid
        .par_iter()
        .map(|&e| {
            let slice = model.slice(e)?;
            let t_eps = model.cutoff_time(e)?.t;
            let w = model.problem().window(e);
            Ok(etas.iter().map(|&eta| [e, eta, slice.mixing_time(eta), t_eps, w]).collect())
        })
        .collect::<cutlab::Result<_>>()?;
    let mut csv = Csv::new(&["epsilon", "eta", "tau", "t_eps", "w_eps"]);
    for row in rows.iter().flatten() {
        csv.row(&row.map(num));
    }
    ctx.out.csv("mixing_time.csv", cfg, &csv)
}

pub fn regime(cfg: &Resolved, ctx: &mut Context) -> Result<(), CliError> {
    let problem = cutoff_problem(cfg)?;
    require(problem.gamma != 1.0, || "regime verdicts need γ ≠ 1".into())?;
    let etas = etas(cfg)?;
    let rs = r_grid(cfg)?;
    let model = cutoff_model(problem, ctx)?;
    let thresholds = Thresholds::default();
    let report = cutoff_report(&model, &rs, &etas, thresholds)?;
    let bracket = if model.problem().gamma < 1.0 && report.verdict != Verdict::DegenerateZero {
        match mixing_bracket_check(&model, &model.problem().epsilon_grid) {
            Ok(b) => json!(b),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        serde_json::Value::Null
    };
    let last = report.records.last();
    let doc = json!({
        "verdict": report.verdict.as_str(),
        "problem": report.problem,
        "thresholds": report.thresholds,
        "centered_mode": report.centered_mode,
        "sup_bound": report.sup_bound,
        "backend_switch": report.backend_switch,
        "smallest_epsilon": last.map(|r| r.epsilon),
        "cutoff_time_at_smallest_epsilon": last.and_then(|r| r.cutoff_time),
        "final_profile_gap": last.and_then(|r| r.profile_gap),
        "bracket": bracket,
    });
    let text = ctx.out.json("regime.json", cfg, doc)?;
    println!("{text}");
    Ok(())
}

pub const MC_VALIDATE: ParamSpec = &[
    ("gamma", Some("0.5")),
    ("epsilon", Some("0.5")),
    ("x0", Some("2")),
    ("n", Some("2")),
    ("n_paths", Some("100000")),
    ("step", Some("1e-3")),
    ("seed", Some("1")),
    ("times", Some("0.5,1,2")),
];

/// Monte Carlo cannot resolve the astronomically large distances of smaller noise levels.
const MC_MIN_EPSILON: f64 = 0.1;

pub fn mc_validate(cfg: &Resolved, ctx: &mut Context) -> Result<(), CliError> {
    let gamma: f64 = cfg.get("gamma")?;
    let epsilon: f64 = cfg.get("epsilon")?;
    let times = cfg.list("times")?;
    require((MC_MIN_EPSILON..=1.0).contains(&epsilon), || {
        format!("epsilon must lie in [{MC_MIN_EPSILON}, 1], got {epsilon}")
    })?;
    require(!times.is_empty() && times[0] >= 0.0 && times.windows(2).all(|w| w[1] > w[0]), || {
        "times must be nonnegative and strictly increasing".into()
    })?;
    let rule = if gamma < 1.0 { DeltaRule::ScalingRule } else { DeltaRule::Unit };
    let problem = CutoffProblem::new(gamma, cfg.get("x0")?, cfg.get("n")?, rule, vec![epsilon]).map_err(invalid)?;
    let sim_cfg = SimConfig {
        gamma,
        epsilon,
        x0: problem.x0,
        delta: problem.delta(epsilon),
        step: cfg.get("step")?,
        horizon: *times.last().unwrap_or(&0.0),
        n_paths: cfg.get("n_paths")?,
        seed: cfg.get("seed")?,
    };
    sim_cfg.validate().map_err(invalid)?;
    if sim_cfg.stability_product() >= 0.1 {
        eprintln!(
            "warning: step · drift scale = {:.3} ≥ 0.1; Euler–Maruyama may be inaccurate",
            sim_cfg.stability_product()
        );
    }
    let n = problem.n;
    let model = cutoff_model(problem, ctx)?;
    let sim = simulate_paths(&sim_cfg, &times)?;
    let mut csv = Csv::new(&["t", "empirical", "spectral", "std_err", "z_score"]);
    for (row, &t) in sim.states.iter().zip(&times) {
        let est = empirical_distance(row, model.eigensystem(), epsilon, n)?;
        let spectral = model.distance(epsilon, t)?.to_f64();
        let z = (est.value - spectral) / est.std_err;
        csv.row(&[num(t), num(est.value), num(spectral), num(est.std_err), num(z)]);
    }
    ctx.out.csv("mc_validate.csv", cfg, &csv)
}
