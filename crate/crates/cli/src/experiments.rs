//! Experiment dispatch: builds core calls from a validated configuration and
//! flattens the results into [`ExperimentReport`]s.
//!
//! Replications run concurrently but are collected into a vector indexed by
//! replication number and reduced in that order, so thread count never
//! changes a single output byte.

use rayon::prelude::*;

use hurst_sense_core::{
    compare_across_h, default_continuity_functionals, ergodic_average, estimate_hitting_laplace,
    estimate_law_lipschitz, fbm_covariance, fit_loglog_slope, law_continuity_check,
    levy_area_convergence, mean_and_se, mixed_area_divergence, sample_driver, seed_stream,
    sensitivity_exponential_scalar, simulate_fou_with, solve_doss_sussmann, solve_young,
    stationary_fou_variance, wiener_integral, wiener_variance_curve, AreaPartner,
    DissipativeProblem, ExperimentReport, FbmCholesky, FbmSynth, FouSpec, GridSpec,
    Result as CoreResult, SdeProblem, StepFunction,
};

use crate::config::{ExperimentConfig, FouCase, ProblemConfig};
use crate::error::CliError;

/// Every experiment the harness knows, in CLI order.
pub const EXPERIMENTS: &[&str] = &[
    "fbm-cov",
    "fbm-sensitivity",
    "sde-solve",
    "sde-sensitivity",
    "law-lipschitz",
    "fou-stationary",
    "h-compare",
    "ergodic-avg",
    "hitting-laplace",
    "levy-converge",
    "levy-diverge",
    "law-continuity",
    "wiener-norm",
];

/// Runs `experiment` under `config` with the effective seed root.
pub fn run(
    experiment: &str,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentReport<f64>, CliError> {
    match experiment {
        "fbm-cov" => fbm_cov(config, seed),
        "fbm-sensitivity" => fbm_sensitivity(config, seed),
        "sde-solve" => sde_solve(config, seed),
        "sde-sensitivity" => sde_sensitivity(config, seed),
        "law-lipschitz" => law_lipschitz(config, seed),
        "fou-stationary" => fou_stationary(config, seed),
        "h-compare" => h_compare(config, seed),
        "ergodic-avg" => ergodic_avg(config, seed),
        "hitting-laplace" => hitting_laplace(config, seed),
        "levy-converge" => levy_converge(config, seed),
        "levy-diverge" => levy_diverge(config, seed),
        "law-continuity" => law_continuity(config, seed),
        "wiener-norm" => wiener_norm(config, seed),
        other => Err(CliError::Usage(format!(
            "unknown experiment '{other}' (known: {})",
            EXPERIMENTS.join(", ")
        ))),
    }
}

fn require_h(config: &ExperimentConfig) -> Result<f64, CliError> {
    config
        .h
        .ok_or_else(|| CliError::Usage("this experiment needs the 'h' field".into()))
}

fn h_list(config: &ExperimentConfig, default: &[f64]) -> Vec<f64> {
    match (&config.h_values, config.h) {
        (Some(values), _) => values.clone(),
        (None, Some(h)) => vec![h],
        (None, None) => default.to_vec(),
    }
}

fn problem_or_default(
    config: &ExperimentConfig,
    default: &ProblemConfig,
) -> Result<(SdeProblem<f64>, ProblemConfig), CliError> {
    let pc = config.problem.clone().unwrap_or_else(|| default.clone());
    let problem = pc.build()?;
    Ok((problem, pc))
}

fn phi_by_name(name: &str) -> Result<fn(f64) -> f64, CliError> {
    match name {
        "identity" => Ok(|x| x),
        "square" => Ok(|x| x * x),
        "cos" => Ok(f64::cos),
        "tanh" => Ok(f64::tanh),
        other => Err(CliError::Usage(format!(
            "unknown observable '{other}' (known: identity, square, cos, tanh)"
        ))),
    }
}

/// Runs `n_mc` replications concurrently, collecting per-replication values
/// in replication order.
fn replicate<V: Send>(
    n_mc: usize,
    f: impl Fn(usize) -> CoreResult<V> + Sync,
) -> Result<Vec<V>, CliError> {
    let out = (0..n_mc)
        .into_par_iter()
        .map(|r| f(r))
        .collect::<CoreResult<Vec<V>>>()?;
    Ok(out)
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// --- fbm-cov ---------------------------------------------------------------

/// Empirical covariance of synthesized paths on a node subset against the
/// closed form, per Hurst value; `sampler` picks kernel synthesis (default)
/// or the dense Cholesky oracle.
fn fbm_cov(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let hs = h_list(config, &[]);
    if hs.is_empty() {
        return Err(CliError::Usage("fbm-cov needs 'h' or 'h_values'".into()));
    }
    let nodes: Vec<usize> = match &config.nodes {
        Some(nodes) => nodes.clone(),
        None => {
            let n = grid.n_steps;
            let mut nodes: Vec<usize> =
                [n / 8, n / 4, n / 2, 3 * n / 4, n].iter().copied().filter(|&k| k > 0).collect();
            nodes.dedup();
            nodes
        }
    };
    if nodes.is_empty() || nodes.iter().any(|&k| k > grid.n_steps) {
        return Err(CliError::Usage(format!(
            "covariance nodes must be nonempty indices within 1..={}",
            grid.n_steps
        )));
    }
    let sampler = config.sampler.as_deref().unwrap_or("mvn");
    let n_mc = config.n_mc;

    let mut report = ExperimentReport::new("fbm-cov");
    report.push_metadata("sampler", sampler);
    report.push_metadata("n_mc", n_mc.to_string());
    for (ih, &h) in hs.iter().enumerate() {
        // Per replication: B at the selected nodes.
        let samples: Vec<Vec<f64>> = match sampler {
            "mvn" => {
                let synth = FbmSynth::new(h, &grid)?;
                replicate(n_mc, |r| {
                    let driver =
                        sample_driver::<f64>(seed_stream(seed, (ih * n_mc + r) as u64), &grid);
                    let path = synth.synthesize_path(&driver)?;
                    Ok(nodes.iter().map(|&k| path[k]).collect())
                })?
            }
            "cholesky" => {
                let oracle = FbmCholesky::new(h, &grid)?;
                replicate(n_mc, |r| {
                    let bundle = oracle.sample(seed_stream(seed, (ih * n_mc + r) as u64));
                    Ok(nodes.iter().map(|&k| bundle.path[k]).collect())
                })?
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown sampler '{other}' (known: mvn, cholesky)"
                )))
            }
        };
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate().skip(a) {
                let products: Vec<f64> =
                    samples.iter().map(|row| row[a] * row[b]).collect();
                let (mean, se) = mean_and_se(&products);
                report.push_estimate(format!("cov_{i}_{j}"), Some(h), None, mean, se, n_mc);
                let exact = fbm_covariance(h, grid.node(i), grid.node(j));
                report.push_value(format!("cov_exact_{i}_{j}"), Some(h), exact);
            }
        }
        if sampler == "mvn" {
            let synth = FbmSynth::new(h, &grid)?;
            let budget = nodes
                .iter()
                .flat_map(|&i| nodes.iter().map(move |&j| (i, j)))
                .map(|(i, j)| synth.truncation_budget(i, j))
                .fold(0.0, f64::max);
            report.push_value("truncation_budget", Some(h), budget);
        }
    }
    Ok(report)
}

// --- fbm-sensitivity -------------------------------------------------------

/// Shared-driver central finite differences of `B^H` in `H` against the
/// synthesized sensitivity; reports per-step sup errors and their log-log
/// slope in the step size.
fn fbm_sensitivity(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let h = require_h(config)?;
    let deltas = config
        .deltas
        .clone()
        .unwrap_or_else(|| vec![1e-2, 5e-3, 2.5e-3]);
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(CliError::Usage("finite-difference steps must be positive".into()));
    }
    let n_mc = config.n_mc;
    let base = FbmSynth::new(h, &grid)?;
    let shifted = deltas
        .iter()
        .map(|&d| Ok((FbmSynth::new(h + d, &grid)?, FbmSynth::new(h - d, &grid)?)))
        .collect::<CoreResult<Vec<_>>>()?;

    // Per replication: sup-norm FD error per step size.
    let errors: Vec<Vec<f64>> = replicate(n_mc, |r| {
        let driver = sample_driver::<f64>(seed_stream(seed, r as u64), &grid);
        let bundle = base.synthesize(&driver)?;
        let mut row = Vec::with_capacity(deltas.len());
        for (&delta, (up, down)) in deltas.iter().zip(&shifted) {
            let plus = up.synthesize_path(&driver)?;
            let minus = down.synthesize_path(&driver)?;
            let err = plus
                .iter()
                .zip(&minus)
                .zip(&bundle.sensitivity)
                .map(|((p, m), s)| ((p - m) / (2.0 * delta) - s).abs())
                .fold(0.0, f64::max);
            row.push(err);
        }
        Ok(row)
    })?;

    let mut report = ExperimentReport::new("fbm-sensitivity");
    report.push_metadata("n_mc", n_mc.to_string());
    let mut points = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        let per_rep: Vec<f64> = errors.iter().map(|row| row[k]).collect();
        let (mean, se) = mean_and_se(&per_rep);
        report.push_value(format!("delta_{k}"), Some(h), delta);
        report.push_estimate(format!("fd_error_{k}"), Some(h), None, mean, se, n_mc);
        if mean > 0.0 {
            points.push((delta, mean));
        }
    }
    if let Ok(fit) = fit_loglog_slope(&points) {
        report.push_slope("fd_error", &fit);
    }
    Ok(report)
}

// --- sde-solve -------------------------------------------------------------

fn linear_coefficients(pc: &ProblemConfig) -> Result<(f64, f64, f64), CliError> {
    if pc.name != "linear" {
        return Err(CliError::Usage(format!(
            "this experiment benchmarks against the linear closed form; got problem '{}'",
            pc.name
        )));
    }
    Ok((pc.param("alpha", -0.5), pc.param("beta", 0.3), pc.param("x0", 1.0)))
}

fn rung_grid(config: &ExperimentConfig, n_steps: usize) -> Result<GridSpec<f64>, CliError> {
    let mut gc = config.grid.clone();
    gc.n_steps = n_steps;
    Ok(gc.build()?)
}

/// Doss–Sussmann and Young–Euler solutions of the linear equation against
/// `x0·exp(αt + βB^H_t)` on a step-count ladder.
fn sde_solve(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let default = ProblemConfig { name: "linear".into(), params: Default::default() };
    let (problem, pc) = problem_or_default(config, &default)?;
    let (alpha, beta, x0) = linear_coefficients(&pc)?;
    let h = config.h.unwrap_or(0.7);
    let ladder = config.ladder.clone().unwrap_or_else(|| vec![4, 8, 16, 32]);
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("ladder must be strictly increasing step counts".into()));
    }
    let n_mc = config.n_mc;

    let mut report = ExperimentReport::new("sde-solve");
    report.push_metadata("alpha", alpha.to_string());
    report.push_metadata("beta", beta.to_string());
    report.push_metadata("x0", x0.to_string());
    report.push_metadata("n_mc", n_mc.to_string());
    for (k, &n) in ladder.iter().enumerate() {
        let grid = rung_grid(config, n)?;
        let synth = FbmSynth::new(h, &grid)?;
        let sups: Vec<(f64, f64)> = replicate(n_mc, |r| {
            let driver =
                sample_driver::<f64>(seed_stream(seed, (k * n_mc + r) as u64), &grid);
            let bundle = synth.synthesize(&driver)?;
            let exact: Vec<f64> = (0..=grid.n_steps)
                .map(|i| x0 * (alpha * grid.node(i) + beta * bundle.path[i]).exp())
                .collect();
            let ds = solve_doss_sussmann(&problem, &bundle)?;
            let young = solve_young(&problem, &bundle)?;
            Ok((
                sup_gap(ds.scalar_path()?, &exact),
                sup_gap(young.scalar_path()?, &exact),
            ))
        })?;
        let ds: Vec<f64> = sups.iter().map(|s| s.0).collect();
        let yg: Vec<f64> = sups.iter().map(|s| s.1).collect();
        let (m_ds, se_ds) = mean_and_se(&ds);
        let (m_yg, se_yg) = mean_and_se(&yg);
        report.push_estimate(format!("ds_sup_error_n{n}"), Some(h), None, m_ds, se_ds, n_mc);
        report.push_estimate(format!("young_sup_error_n{n}"), Some(h), None, m_yg, se_yg, n_mc);
    }
    Ok(report)
}

// --- sde-sensitivity -------------------------------------------------------

/// Computed Hurst sensitivity of the linear equation against the closed form
/// `βX_t·∂_H B_t` on a step-count ladder.
fn sde_sensitivity(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let default = ProblemConfig { name: "linear".into(), params: Default::default() };
    let (problem, pc) = problem_or_default(config, &default)?;
    let (alpha, beta, x0) = linear_coefficients(&pc)?;
    let h = config.h.unwrap_or(0.7);
    let ladder = config.ladder.clone().unwrap_or_else(|| vec![4, 8, 16, 32]);
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("ladder must be strictly increasing step counts".into()));
    }
    let n_mc = config.n_mc;

    let mut report = ExperimentReport::new("sde-sensitivity");
    report.push_metadata("n_mc", n_mc.to_string());
    for (k, &n) in ladder.iter().enumerate() {
        let grid = rung_grid(config, n)?;
        let synth = FbmSynth::new(h, &grid)?;
        let sups: Vec<f64> = replicate(n_mc, |r| {
            let driver =
                sample_driver::<f64>(seed_stream(seed, (k * n_mc + r) as u64), &grid);
            let bundle = synth.synthesize(&driver)?;
            let xs = solve_doss_sussmann(&problem, &bundle)?;
            let sens = sensitivity_exponential_scalar(&problem, &xs, &bundle)?;
            let err = (0..=grid.n_steps)
                .map(|i| {
                    let x_exact = x0 * (alpha * grid.node(i) + beta * bundle.path[i]).exp();
                    (sens.values[i] - beta * x_exact * bundle.sensitivity[i]).abs()
                })
                .fold(0.0, f64::max);
            Ok(err)
        })?;
        let (mean, se) = mean_and_se(&sups);
        report.push_estimate(format!("sens_sup_error_n{n}"), Some(h), None, mean, se, n_mc);
    }
    Ok(report)
}

// --- law-lipschitz ---------------------------------------------------------

/// Law-level Lipschitz quotients `|E[φ(X^H_t)] − E[φ(X^{H'}_t)]| / |H − H'|`
/// on common drivers.
fn law_lipschitz(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let default = ProblemConfig { name: "linear".into(), params: Default::default() };
    let (problem, _) = problem_or_default(config, &default)?;
    let pairs = config
        .h_pairs
        .clone()
        .unwrap_or_else(|| vec![(0.5, 0.6), (0.55, 0.6), (0.575, 0.6)]);
    let phi = phi_by_name(config.phi.as_deref().unwrap_or("identity"))?;
    let t = config.t_eval.unwrap_or(grid.t_max);
    let mut report = estimate_law_lipschitz(&problem, phi, &pairs, &grid, t, config.n_mc, seed)?;
    report.push_metadata("phi", config.phi.as_deref().unwrap_or("identity"));
    Ok(report)
}

// --- fou-stationary --------------------------------------------------------

/// Empirical stationary variance of the fOU process per `(κ, H)` case
/// against `Γ(2H+1)/(2κ^{2H})`.
fn fou_stationary(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let cases = config.fou.clone().unwrap_or_else(|| {
        vec![
            FouCase { kappa: 1.0, h: 0.5 },
            FouCase { kappa: 1.0, h: 0.75 },
            FouCase { kappa: 2.0, h: 0.6 },
        ]
    });
    if cases.is_empty() {
        return Err(CliError::Usage("fou-stationary needs at least one (kappa, h) case".into()));
    }
    let n_mc = config.n_mc;
    let mut report = ExperimentReport::new("fou-stationary");
    report.push_metadata("n_mc", n_mc.to_string());
    for (ic, case) in cases.iter().enumerate() {
        let spec = FouSpec::new(
            case.kappa,
            case.h,
            config.grid.t_max,
            config.grid.n_steps,
            config.grid.truncation,
            config.grid.n_past,
        )?;
        let synth = FbmSynth::new(case.h, spec.grid())?;
        let squares: Vec<f64> = replicate(n_mc, |r| {
            let driver =
                sample_driver::<f64>(seed_stream(seed, (ic * n_mc + r) as u64), spec.grid());
            let bundle = synth.synthesize(&driver)?;
            let path = simulate_fou_with(&spec, &bundle)?;
            let terminal = path.terminal()[0];
            Ok(terminal * terminal)
        })?;
        let (var, se) = mean_and_se(&squares);
        let k = case.kappa;
        report.push_estimate(format!("terminal_var_k{k}"), Some(case.h), None, var, se, n_mc);
        report.push_value(
            format!("terminal_var_exact_k{k}"),
            Some(case.h),
            stationary_fou_variance(case.kappa, case.h)?,
        );
        report.push_metadata(format!("burn_steps_k{k}_h{}", case.h), spec.burn_steps().to_string());
    }
    Ok(report)
}

// --- h-compare -------------------------------------------------------------

/// Long-time distance statistics between solutions at different Hurst values
/// for a dissipative additive-noise problem.
fn h_compare(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let default = ProblemConfig { name: "ou".into(), params: Default::default() };
    let pc = config.problem.clone().unwrap_or(default);
    // Dissipativity constants: derived for the OU drift, explicit otherwise.
    let (problem, k_mu, kappa_mu) = match pc.name.as_str() {
        "ou" => {
            let kappa = pc.param("kappa", 1.0);
            let problem = SdeProblem::ou(kappa, pc.param("x0", 0.0));
            (problem, pc.param("k_mu", kappa), pc.param("kappa_mu", kappa))
        }
        "sine" => {
            let Some(&kappa_mu) = pc.params.get("kappa_mu") else {
                return Err(CliError::Usage(
                    "problem 'sine' needs an explicit 'kappa_mu' dissipativity rate".into(),
                ));
            };
            (SdeProblem::sine_drift(pc.param("x0", 0.0)), pc.param("k_mu", 2.0), kappa_mu)
        }
        other => {
            return Err(CliError::Usage(format!(
                "h-compare supports the additive-noise problems 'ou' and 'sine', got '{other}'"
            )))
        }
    };
    let dissipative = DissipativeProblem::new(problem, k_mu, kappa_mu)?;
    let pairs = config
        .h_pairs
        .clone()
        .unwrap_or_else(|| vec![(0.5, 0.6), (0.5, 0.55), (0.5, 0.525)]);
    let eps = config.eps.unwrap_or(0.1);
    let t = grid.t_max;
    let checkpoints = config
        .checkpoints
        .clone()
        .unwrap_or_else(|| vec![0.25 * t, 0.5 * t, 0.75 * t, t]);
    let comparison =
        compare_across_h(&dissipative, &pairs, &grid, eps, &checkpoints, config.n_mc, seed)?;
    Ok(comparison.to_report())
}

// --- ergodic-avg -----------------------------------------------------------

/// Single-path time averages of an observable along the fOU path against the
/// stationary expectation (exact for `φ(x) = x²`).
fn ergodic_avg(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let hs = h_list(config, &[0.5, 0.7]);
    let default = ProblemConfig { name: "ou".into(), params: Default::default() };
    let pc = config.problem.clone().unwrap_or(default);
    if pc.name != "ou" {
        return Err(CliError::Usage(format!(
            "ergodic-avg runs on the fOU process ('ou'), got '{}'",
            pc.name
        )));
    }
    let kappa = pc.param("kappa", 1.0);
    let phi_name = config.phi.as_deref().unwrap_or("square");
    let phi = phi_by_name(phi_name)?;
    let n_mc = config.n_mc;

    let mut report = ExperimentReport::new("ergodic-avg");
    report.push_metadata("kappa", kappa.to_string());
    report.push_metadata("phi", phi_name);
    report.push_metadata("n_mc", n_mc.to_string());
    for (ih, &h) in hs.iter().enumerate() {
        let spec = FouSpec::new(
            kappa,
            h,
            config.grid.t_max,
            config.grid.n_steps,
            config.grid.truncation,
            config.grid.n_past,
        )?;
        let synth = FbmSynth::new(h, spec.grid())?;
        let averages: Vec<f64> = replicate(n_mc, |r| {
            let driver =
                sample_driver::<f64>(seed_stream(seed, (ih * n_mc + r) as u64), spec.grid());
            let bundle = synth.synthesize(&driver)?;
            let path = simulate_fou_with(&spec, &bundle)?;
            ergodic_average(&path, |x| phi(x[0]))
        })?;
        let (mean, se) = mean_and_se(&averages);
        report.push_estimate("time_avg", Some(h), None, mean, se, n_mc);
        if phi_name == "square" {
            let exact = stationary_fou_variance(kappa, h)?;
            report.push_value("stationary_exact", Some(h), exact);
            report.push_value("rel_gap", Some(h), (mean - exact).abs() / exact);
        }
    }
    Ok(report)
}

// --- hitting-laplace -------------------------------------------------------

/// Laplace transforms of barrier hitting times across Hurst values on common
/// drivers, with difference quotients between consecutive values.
fn hitting_laplace(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let default = ProblemConfig { name: "ou".into(), params: Default::default() };
    let (problem, _) = problem_or_default(config, &default)?;
    let hs = h_list(config, &[0.45, 0.5, 0.55]);
    let lambda = config.lambda.unwrap_or(1.0);
    let barrier = config.barrier.unwrap_or(1.0);
    Ok(estimate_hitting_laplace(&problem, lambda, barrier, &hs, &grid, config.n_mc, seed)?)
}

// --- rough-path experiments ------------------------------------------------

/// Refinement convergence of rough-path distances for two independent fBm
/// components.
fn levy_converge(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let h = require_h(config)?;
    let rho = config
        .rho
        .ok_or_else(|| CliError::Usage("levy-converge needs the 'rho' field".into()))?;
    let levels = config.levels.clone().unwrap_or_else(|| vec![3, 4, 5]);
    Ok(levy_area_convergence(h, rho, &grid, &levels, config.n_mc, seed)?)
}

/// Mixed-area refinement contrasts with exact second moments; the partner is
/// the Hurst sensitivity or an independent path.
fn levy_diverge(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let h = config.h.unwrap_or(0.5);
    let levels = config
        .levels
        .clone()
        .unwrap_or_else(|| (6..=12).collect());
    let partner = match config.partner.as_deref().unwrap_or("sensitivity") {
        "sensitivity" => AreaPartner::Sensitivity,
        "independent" | "independent-path" => AreaPartner::Independent,
        other => {
            return Err(CliError::Usage(format!(
                "unknown partner '{other}' (known: sensitivity, independent)"
            )))
        }
    };
    Ok(mixed_area_divergence(h, &grid, &levels, partner, config.n_mc, seed)?)
}

/// Law continuity of bounded functionals in the Hurst parameter below 1/2;
/// the first entry of `h_values` is the reference value.
fn law_continuity(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let default = ProblemConfig { name: "ou".into(), params: Default::default() };
    let (problem, _) = problem_or_default(config, &default)?;
    let hs = h_list(config, &[]);
    let [h0, rest @ ..] = hs.as_slice() else {
        return Err(CliError::Usage(
            "law-continuity needs 'h_values' with the reference value first".into(),
        ));
    };
    if rest.is_empty() {
        return Err(CliError::Usage(
            "law-continuity needs at least one comparison value after the reference".into(),
        ));
    }
    let functionals = default_continuity_functionals::<f64>();
    Ok(law_continuity_check(&problem, *h0, rest, &grid, &functionals, config.n_mc, seed)?)
}

// --- wiener-norm -----------------------------------------------------------

/// Closed-form Wiener-integral variances `‖f‖_H²` per Hurst value, plus a
/// Monte Carlo check against the exact Cholesky sampler.
fn wiener_norm(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport<f64>, CliError> {
    let grid = config.grid.build()?;
    let hs = h_list(config, &[]);
    if hs.is_empty() {
        return Err(CliError::Usage("wiener-norm needs 'h' or 'h_values'".into()));
    }
    let pieces = config
        .step_function
        .clone()
        .unwrap_or_else(|| vec![(0.0, 1.0, 1.0)]);
    let f = StepFunction::new(pieces)?;
    let n_mc = config.n_mc;

    let mut report = ExperimentReport::new("wiener-norm");
    report.push_metadata("n_mc", n_mc.to_string());
    report.push_metadata("pieces", f.pieces().len().to_string());
    for (h, var) in wiener_variance_curve(&f, &hs, grid.t_max)? {
        report.push_value("variance_exact", Some(h), var);
    }
    for (ih, &h) in hs.iter().enumerate() {
        let oracle = FbmCholesky::new(h, &grid)?;
        let squares: Vec<f64> = replicate(n_mc, |r| {
            let bundle = oracle.sample(seed_stream(seed, (ih * n_mc + r) as u64));
            let value = wiener_integral(&f, &bundle)?;
            Ok(value * value)
        })?;
        let (var, se) = mean_and_se(&squares);
        report.push_estimate("variance_mc", Some(h), None, var, se, n_mc);
    }
    Ok(report)
}
