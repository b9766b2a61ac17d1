//! Long-time behaviour: the stationary fractional Ornstein–Uhlenbeck process,
//! ergodic averages, Hurst-comparison statistics for dissipative additive
//! equations, and the hitting-time Laplace-transform experiment.
//!
//! The stationary fOU path `Ū_t = ∫_{−∞}^t e^{−κ(t−s)} dB^H_s` is simulated
//! by truncating the lower limit at a burn-in horizon `S` with
//! `e^{−κS} ≤ 10⁻⁸` and restarting `B^H` at the burn-in edge (legitimate
//! because fBm has stationary increments).  The truncated integral is
//! discretized with cell-averaged exponential weights against the fBm
//! increments,
//!
//! `Ū_{t_k} = Σ_{j≤k} w̄_j ΔB^H_j`,  `w̄_j = (1/Δ)∫_cell e^{−κ(t_k−s)} ds`,
//!
//! which is the exact convolution of the kernel with the piecewise-linear
//! interpolant of `B^H` (equivalently, summation by parts against
//! `κ∫e^{−κ(t−s)}B_s ds` with that interpolant).  Because successive weights
//! differ by the factor `e^{−κΔ}`, the whole path is one `O(n)` recursion,
//! and the weights stay exact even when `κΔ` is of order one.

use rayon::prelude::*;

use crate::driver::{sample_driver, seed_stream, DriverPath, SampleScalar};
use crate::error::{CoreError, Result};
use crate::fbm::{synthesize_fbm, FbmBundle, FbmSynth};
use crate::grid::GridSpec;
use crate::report::{fit_loglog_slope, mean_and_se, ExperimentReport, SlopeFit};
use crate::scalar::{gamma, Scalar};
use crate::sde::{
    check_state, choose_scheme, solve_additive_multi, solve_with_scheme, PathSolution, Scheme,
    SdeProblem,
};

/// Largest admissible value of `e^{−κS}` for the fOU burn-in horizon `S`.
pub const FOU_BURN_IN_BOUND: f64 = 1e-8;

/// Default exponent for the `(1+t)^ε` weight in cross-Hurst comparisons.
pub const DEFAULT_WEIGHT_EPS: f64 = 0.1;

/// Discretisation of the stationary fractional Ornstein–Uhlenbeck process
/// `dU = −κU dt + dB^H` on an observation window `[0, horizon]`.
///
/// The simulation clock covers `[0, S + horizon]` where `S` is the burn-in
/// span; node `burn_steps` of the full grid is time `0` of the observation
/// window.  Constructors guarantee `e^{−κS} ≤` [`FOU_BURN_IN_BOUND`].
#[derive(Debug, Clone)]
pub struct FouSpec<T> {
    kappa: T,
    h: T,
    grid: GridSpec<T>,
    horizon_grid: GridSpec<T>,
    burn_steps: usize,
}

impl<T: Scalar> FouSpec<T> {
    /// Builds a spec with the shortest whole-step burn-in satisfying the
    /// bound; `n_steps` covers the observation window `[0, horizon]` and the
    /// past block `[-s_trunc, 0)` of the full grid keeps `n_past` cells.
    pub fn new(
        kappa: T,
        h: T,
        horizon: T,
        n_steps: usize,
        s_trunc: T,
        n_past: usize,
    ) -> Result<Self> {
        let dt = check_fou_inputs(kappa, h, horizon, n_steps)?;
        let s_req = -T::from_f64_c(FOU_BURN_IN_BOUND.ln()) / kappa;
        let burn_steps = (s_req / dt).ceil().as_f64() as usize;
        Self::build(kappa, h, horizon, n_steps, s_trunc, n_past, burn_steps.max(1))
    }

    /// Builds a spec with an explicit burn-in step count, so that several
    /// mean-reversion rates can share one grid (and one driver per
    /// replication); rejects burn-ins violating the bound.
    pub fn with_burn_steps(
        kappa: T,
        h: T,
        horizon: T,
        n_steps: usize,
        s_trunc: T,
        n_past: usize,
        burn_steps: usize,
    ) -> Result<Self> {
        let dt = check_fou_inputs(kappa, h, horizon, n_steps)?;
        let decay = (-kappa * dt * T::from_usize_c(burn_steps)).exp().as_f64();
        if decay > FOU_BURN_IN_BOUND * (1.0 + 1e-12) {
            return Err(CoreError::InvalidInput {
                reason: format!(
                    "burn-in of {burn_steps} steps leaves e^(-kappa S) = {decay:.3e} \
                     above the bound {FOU_BURN_IN_BOUND:.0e}"
                ),
            });
        }
        Self::build(kappa, h, horizon, n_steps, s_trunc, n_past, burn_steps)
    }

    fn build(
        kappa: T,
        h: T,
        horizon: T,
        n_steps: usize,
        s_trunc: T,
        n_past: usize,
        burn_steps: usize,
    ) -> Result<Self> {
        let dt = horizon / T::from_usize_c(n_steps);
        let n_total = n_steps + burn_steps;
        let grid = GridSpec::new(dt * T::from_usize_c(n_total), s_trunc, n_total, n_past)?;
        let horizon_grid = GridSpec::without_past(grid.dt() * T::from_usize_c(n_steps), n_steps)?;
        Ok(Self { kappa, h, grid, horizon_grid, burn_steps })
    }

    /// Mean-reversion rate `κ`.
    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Hurst parameter.
    pub fn h(&self) -> T {
        self.h
    }

    /// Full simulation grid over `[0, S + horizon]` (this is the grid drivers
    /// and synthesizers must live on).
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Steps of the full grid consumed by the burn-in span `S`.
    pub fn burn_steps(&self) -> usize {
        self.burn_steps
    }

    /// Steps of the observation window.
    pub fn horizon_steps(&self) -> usize {
        self.grid.n_steps - self.burn_steps
    }

    /// Grid of the observation window `[0, horizon]` (no past block).
    pub fn horizon_grid(&self) -> &GridSpec<T> {
        &self.horizon_grid
    }
}

fn check_fou_inputs<T: Scalar>(kappa: T, h: T, horizon: T, n_steps: usize) -> Result<T> {
    if !(kappa > T::zero()) || !kappa.is_finite() {
        return Err(CoreError::InvalidInput {
            reason: format!("mean-reversion rate must be positive, got {}", kappa.as_f64()),
        });
    }
    if !(h > T::zero()) || !(h < T::one()) {
        return Err(CoreError::InvalidHurst { h: h.as_f64(), lo: 0.0, hi: 1.0 });
    }
    if !(horizon > T::zero()) || !horizon.is_finite() || n_steps == 0 {
        return Err(CoreError::InvalidInput {
            reason: "observation window needs a positive horizon and at least one step".into(),
        });
    }
    Ok(horizon / T::from_usize_c(n_steps))
}

/// Simulates the stationary fOU path from a pre-synthesized fBm bundle on the
/// spec's full grid; only the bundle's `path` values are read, so bundles
/// built from [`FbmSynth::synthesize_path`] (empty sensitivity) are accepted.
///
/// The returned solution lives on [`FouSpec::horizon_grid`], i.e. the burn-in
/// span is dropped.
pub fn simulate_fou_with<T: Scalar>(
    spec: &FouSpec<T>,
    bundle: &FbmBundle<T>,
) -> Result<PathSolution<T>> {
    if bundle.grid != spec.grid {
        return Err(CoreError::GridMismatch {
            reason: "fOU driver bundle lives on a different grid than the spec".into(),
        });
    }
    if bundle.h != spec.h {
        return Err(CoreError::GridMismatch {
            reason: format!(
                "fOU driver bundle has Hurst {} but the spec has {}",
                bundle.h.as_f64(),
                spec.h.as_f64()
            ),
        });
    }
    if bundle.path.len() != spec.grid.n_nodes() {
        return Err(CoreError::GridMismatch {
            reason: "fOU driver bundle path length does not match its grid".into(),
        });
    }
    let dt = spec.grid.dt();
    let x = spec.kappa * dt;
    let decay = (-x).exp();
    // Cell-averaged kernel weight (1 − e^{−κΔ})/(κΔ), evaluated
    // cancellation-free for small κΔ.
    let weight = -(-x).exp_m1() / x;
    let b = &bundle.path;
    let mut u = T::zero();
    let mut states = Vec::with_capacity(spec.horizon_steps() + 1);
    if spec.burn_steps == 0 {
        states.push(T::zero());
    }
    for k in 1..=spec.grid.n_steps {
        u = decay * u + weight * (b[k] - b[k - 1]);
        if k >= spec.burn_steps {
            check_state(&[u], spec.grid.node(k))?;
            states.push(u);
        }
    }
    Ok(PathSolution {
        h: spec.h,
        scheme: Scheme::AdditiveReduction,
        grid: spec.horizon_grid,
        d: 1,
        states,
    })
}

/// Samples one stationary fOU path from a driver on the spec's full grid.
///
/// This synthesizes the fBm bundle internally; Monte-Carlo loops should build
/// one [`FbmSynth`] per Hurst value and call [`simulate_fou_with`] instead.
pub fn simulate_fou<T: Scalar>(
    spec: &FouSpec<T>,
    driver: &DriverPath<T>,
) -> Result<PathSolution<T>> {
    if driver.grid != spec.grid {
        return Err(CoreError::GridMismatch {
            reason: "fOU driver lives on a different grid than the spec".into(),
        });
    }
    let bundle = synthesize_fbm(driver, spec.h)?;
    simulate_fou_with(spec, &bundle)
}

/// Variance of the stationary fOU law: `Γ(2H+1) / (2 κ^{2H})`.
pub fn stationary_fou_variance<T: Scalar>(kappa: T, h: T) -> Result<T> {
    if !(kappa > T::zero()) || !kappa.is_finite() {
        return Err(CoreError::InvalidInput {
            reason: format!("mean-reversion rate must be positive, got {}", kappa.as_f64()),
        });
    }
    if !(h > T::zero()) || !(h < T::one()) {
        return Err(CoreError::InvalidHurst { h: h.as_f64(), lo: 0.0, hi: 1.0 });
    }
    let two = T::from_f64_c(2.0);
    let num = T::from_f64_c(gamma(2.0 * h.as_f64() + 1.0));
    Ok(num / (two * kappa.powf(two * h)))
}

/// Trapezoid time average `(1/T) ∫_0^T φ(X_t) dt` of an observable along a
/// solved path.
pub fn ergodic_average<T: Scalar>(
    path: &PathSolution<T>,
    phi: impl Fn(&[T]) -> T,
) -> Result<T> {
    let n_nodes = path.grid.n_nodes();
    if path.d == 0 || path.states.len() != n_nodes * path.d {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "path has {} state entries but the grid expects {} nodes of dimension {}",
                path.states.len(),
                n_nodes,
                path.d
            ),
        });
    }
    let half = T::from_f64_c(0.5);
    let mut sum = T::zero();
    for k in 0..n_nodes {
        let w = if k == 0 || k == n_nodes - 1 { half } else { T::one() };
        sum += w * phi(path.state(k));
    }
    Ok(sum * path.grid.dt() / path.grid.t_max)
}

/// An additive-noise problem whose drift the caller asserts to be globally
/// Lipschitz (constant `k_mu`) and uniformly dissipative (rate `kappa_mu`):
/// `⟨x−y, μ(x)−μ(y)⟩ ≤ −κ_μ ‖x−y‖²`.
///
/// The assertion is the user's; [`DissipativeProblem::check_pair`] spot-checks
/// it at runtime and long-time comparisons run that monitor on the states they
/// visit.
#[derive(Clone)]
pub struct DissipativeProblem<T> {
    problem: SdeProblem<T>,
    k_mu: T,
    kappa_mu: T,
}

impl<T: Scalar> std::fmt::Debug for DissipativeProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DissipativeProblem")
            .field("problem", &self.problem)
            .field("k_mu", &self.k_mu)
            .field("kappa_mu", &self.kappa_mu)
            .finish()
    }
}

impl<T: Scalar> DissipativeProblem<T> {
    /// Wraps an additive-noise problem with its asserted drift constants.
    pub fn new(problem: SdeProblem<T>, k_mu: T, kappa_mu: T) -> Result<Self> {
        if !problem.is_sigma_constant() {
            return Err(CoreError::Unsupported {
                reason: "long-time comparison theory covers additive noise; declare σ constant"
                    .into(),
            });
        }
        for (name, v) in [("k_mu", k_mu), ("kappa_mu", kappa_mu)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(CoreError::InvalidInput {
                    reason: format!("{name} must be positive, got {}", v.as_f64()),
                });
            }
        }
        Ok(Self { problem, k_mu, kappa_mu })
    }

    /// The wrapped problem.
    pub fn problem(&self) -> &SdeProblem<T> {
        &self.problem
    }

    /// Asserted global Lipschitz constant of the drift.
    pub fn lipschitz_constant(&self) -> T {
        self.k_mu
    }

    /// Asserted uniform dissipativity rate of the drift.
    pub fn dissipativity_rate(&self) -> T {
        self.kappa_mu
    }

    /// Monitors the dissipativity assertion on one pair of states, with a
    /// rounding-level slack; a violation means the asserted `kappa_mu` is
    /// wrong for this drift.
    pub fn check_pair(&self, x: &[T], y: &[T]) -> Result<()> {
        let d = self.problem.dim();
        if x.len() != d || y.len() != d {
            return Err(CoreError::InvalidInput {
                reason: format!("monitored states must have dimension {d}"),
            });
        }
        let mut mu_x = vec![T::zero(); d];
        let mut mu_y = vec![T::zero(); d];
        self.problem.mu_into(x, &mut mu_x);
        self.problem.mu_into(y, &mut mu_y);
        let mut inner = T::zero();
        let mut nrm2 = T::zero();
        for i in 0..d {
            let dx = x[i] - y[i];
            inner += dx * (mu_x[i] - mu_y[i]);
            nrm2 += dx * dx;
        }
        let bound = -self.kappa_mu * nrm2;
        let slack = T::epsilon()
            * T::from_f64_c(64.0)
            * (T::one() + inner.abs() + self.k_mu * nrm2);
        if inner > bound + slack {
            return Err(CoreError::Numerical {
                context: "dissipativity monitor",
                reason: format!(
                    "<x-y, mu(x)-mu(y)> = {} exceeds -kappa_mu*|x-y|^2 = {}",
                    inner.as_f64(),
                    bound.as_f64()
                ),
            });
        }
        Ok(())
    }
}

/// Distance statistics between the solutions at one Hurst pair, averaged over
/// replications on common drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison<T> {
    /// First Hurst value.
    pub h: T,
    /// Second Hurst value.
    pub h_prime: T,
    /// `|h − h'|`.
    pub gap: T,
    /// Mean of `sup_{t ≤ T} ‖X^H_t − X^{H'}_t‖ / (1+t)^ε` over replications.
    pub weighted_sup: T,
    /// Standard error of [`PairComparison::weighted_sup`].
    pub weighted_sup_se: Option<T>,
    /// Mean squared distance at each checkpoint time, with standard errors
    /// (aligned with [`ComparisonReport::checkpoints`]).
    pub checkpoint_sq: Vec<(T, Option<T>)>,
    /// Mean of `(1+T)^{-1} ∫_0^T ‖X^H_s − X^{H'}_s‖² ds` over replications.
    pub time_avg_sq: T,
    /// Standard error of [`PairComparison::time_avg_sq`].
    pub time_avg_sq_se: Option<T>,
}

/// Outcome of a cross-Hurst long-time comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport<T> {
    /// Weight exponent used in the pathwise statistic.
    pub eps: T,
    /// Replications behind every statistic.
    pub n_mc: usize,
    /// Checkpoint times for the second-moment statistics.
    pub checkpoints: Vec<T>,
    /// Per-pair distance statistics.
    pub pairs: Vec<PairComparison<T>>,
    /// Log-log slope of the mean weighted sup against the Hurst gap (needs at
    /// least three pairs with distinct positive gaps and statistics).
    pub weighted_sup_slope: Option<SlopeFit<T>>,
    /// Log-log slope of the mean time-averaged squared distance against the
    /// Hurst gap.
    pub time_avg_slope: Option<SlopeFit<T>>,
}

impl<T: Scalar> ComparisonReport<T> {
    /// Flattens the comparison into report rows (statistics `weighted_sup`,
    /// `moment_sq_t<checkpoint>`, `time_avg_sq`, and the slope fits).
    pub fn to_report(&self) -> ExperimentReport<T> {
        let mut report = ExperimentReport::new("h-compare");
        report.push_metadata("eps", format!("{}", self.eps.as_f64()));
        report.push_metadata("n_mc", format!("{}", self.n_mc));
        for pair in &self.pairs {
            report.push_estimate(
                "weighted_sup",
                Some(pair.h),
                Some(pair.h_prime),
                pair.weighted_sup,
                pair.weighted_sup_se,
                self.n_mc,
            );
            for (t, &(value, se)) in self.checkpoints.iter().zip(&pair.checkpoint_sq) {
                report.push_estimate(
                    format!("moment_sq_t{}", t.as_f64()),
                    Some(pair.h),
                    Some(pair.h_prime),
                    value,
                    se,
                    self.n_mc,
                );
            }
            report.push_estimate(
                "time_avg_sq",
                Some(pair.h),
                Some(pair.h_prime),
                pair.time_avg_sq,
                pair.time_avg_sq_se,
                self.n_mc,
            );
        }
        if let Some(fit) = &self.weighted_sup_slope {
            report.push_slope("weighted_sup", fit);
        }
        if let Some(fit) = &self.time_avg_slope {
            report.push_slope("time_avg_sq", fit);
        }
        report
    }
}

/// Compares solutions of one dissipative additive problem across Hurst pairs
/// on common drivers.
///
/// Each replication draws one driver per noise channel, solves the problem for
/// every distinct Hurst value on those drivers, and records for every pair the
/// weighted sup distance `sup_{t≤T} ‖ΔX_t‖/(1+t)^ε`, the squared distance at
/// the checkpoint times, and the time-averaged squared distance
/// `(1+T)^{-1}∫‖ΔX‖²`.  The dissipativity monitor runs on the paired states
/// at every checkpoint.  Pairs with `h = h'` are allowed (all their distances
/// are zero) but do not enter the slope fits.
pub fn compare_across_h<T: Scalar + SampleScalar>(
    problem: &DissipativeProblem<T>,
    h_pairs: &[(T, T)],
    grid: &GridSpec<T>,
    eps: T,
    checkpoints: &[T],
    n_mc: usize,
    seed_root: u64,
) -> Result<ComparisonReport<T>> {
    if h_pairs.is_empty() || n_mc == 0 {
        return Err(CoreError::InvalidInput {
            reason: "comparison needs at least one Hurst pair and one replication".into(),
        });
    }
    if !(eps > T::zero()) || !(eps < T::one()) {
        return Err(CoreError::InvalidInput {
            reason: format!("weight exponent must lie in (0, 1), got {}", eps.as_f64()),
        });
    }
    let cp_index = checkpoints
        .iter()
        .map(|&t| grid.index_of(t))
        .collect::<Result<Vec<_>>>()?;
    let mut h_values: Vec<T> = Vec::new();
    for &(h1, h2) in h_pairs {
        for h in [h1, h2] {
            if !h_values.contains(&h) {
                h_values.push(h);
            }
        }
    }
    let synths = h_values
        .iter()
        .map(|&h| FbmSynth::new(h, grid))
        .collect::<Result<Vec<_>>>()?;
    let pair_index: Vec<(usize, usize)> = h_pairs
        .iter()
        .map(|&(h1, h2)| {
            let j1 = h_values.iter().position(|&h| h == h1).expect("collected");
            let j2 = h_values.iter().position(|&h| h == h2).expect("collected");
            (j1, j2)
        })
        .collect();

    let d = problem.problem.dim();
    let m = problem.problem.noise_dim();
    let n_nodes = grid.n_nodes();
    let dt = grid.dt();
    let one = T::one();

    // Per replication and pair: (weighted sup, squared distances at
    // checkpoints, time-averaged squared distance).
    let samples: Vec<Vec<(T, Vec<T>, T)>> = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let drivers: Vec<DriverPath<T>> = (0..m)
                .map(|l| sample_driver(seed_stream(seed_root, (r * m + l) as u64), grid))
                .collect();
            let solutions = synths
                .iter()
                .map(|synth| {
                    let bundles = drivers
                        .iter()
                        .map(|driver| {
                            Ok(FbmBundle {
                                h: synth.h(),
                                grid: *grid,
                                path: synth.synthesize_path(driver)?,
                                sensitivity: Vec::new(),
                                driver_seed: driver.seed,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let refs: Vec<&FbmBundle<T>> = bundles.iter().collect();
                    solve_additive_multi(&problem.problem, &refs)
                })
                .collect::<Result<Vec<_>>>()?;
            pair_index
                .iter()
                .map(|&(j1, j2)| {
                    let (x1, x2) = (&solutions[j1], &solutions[j2]);
                    let mut sup = T::zero();
                    let mut trapz = T::zero();
                    let mut prev_sq = T::zero();
                    let mut cp_sq = vec![T::zero(); cp_index.len()];
                    for k in 0..n_nodes {
                        let (a, b) = (x1.state(k), x2.state(k));
                        let mut sq = T::zero();
                        for i in 0..d {
                            let diff = a[i] - b[i];
                            sq += diff * diff;
                        }
                        let t = grid.node(k);
                        let weighted = sq.sqrt() / (one + t).powf(eps);
                        if weighted > sup {
                            sup = weighted;
                        }
                        if k > 0 {
                            trapz += (prev_sq + sq) * dt / T::from_f64_c(2.0);
                        }
                        prev_sq = sq;
                        for (slot, &cp) in cp_sq.iter_mut().zip(&cp_index) {
                            if cp == k {
                                *slot = sq;
                            }
                        }
                    }
                    for &cp in &cp_index {
                        problem.check_pair(x1.state(cp), x2.state(cp))?;
                    }
                    Ok((sup, cp_sq, trapz / (one + grid.t_max)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::with_capacity(h_pairs.len());
    for (p, &(h1, h2)) in h_pairs.iter().enumerate() {
        let sups: Vec<T> = samples.iter().map(|rep| rep[p].0).collect();
        let (sup_mean, sup_se) = mean_and_se(&sups);
        let checkpoint_sq = (0..cp_index.len())
            .map(|c| {
                let vals: Vec<T> = samples.iter().map(|rep| rep[p].1[c]).collect();
                let (mean, se) = mean_and_se(&vals);
                (mean, se)
            })
            .collect();
        let avgs: Vec<T> = samples.iter().map(|rep| rep[p].2).collect();
        let (avg_mean, avg_se) = mean_and_se(&avgs);
        pairs.push(PairComparison {
            h: h1,
            h_prime: h2,
            gap: (h1 - h2).abs(),
            weighted_sup: sup_mean,
            weighted_sup_se: sup_se,
            checkpoint_sq,
            time_avg_sq: avg_mean,
            time_avg_sq_se: avg_se,
        });
    }

    let sup_points: Vec<(T, T)> = pairs
        .iter()
        .filter(|p| p.gap > T::zero() && p.weighted_sup > T::zero())
        .map(|p| (p.gap, p.weighted_sup))
        .collect();
    let avg_points: Vec<(T, T)> = pairs
        .iter()
        .filter(|p| p.gap > T::zero() && p.time_avg_sq > T::zero())
        .map(|p| (p.gap, p.time_avg_sq))
        .collect();
    let weighted_sup_slope = fit_loglog_slope(&sup_points).ok();
    let time_avg_slope = fit_loglog_slope(&avg_points).ok();

    Ok(ComparisonReport {
        eps,
        n_mc,
        checkpoints: checkpoints.to_vec(),
        pairs,
        weighted_sup_slope,
        time_avg_slope,
    })
}

/// Monte-Carlo estimate of the hitting-time Laplace transform `E[e^{−λτ}]`,
/// where `τ` is the first grid node at which the scalar solution reaches the
/// barrier, across Hurst values on common drivers.
///
/// Paths that have not hit by `t_max` contribute zero; their exact
/// contribution lies below `e^{−λ t_max}`, which the report carries as the
/// `truncation_bound` metadata entry together with an `unhit_fraction` row per
/// Hurst value.  When `1/2` is among the Hurst values, a `laplace_quotient`
/// row per other value reports `|estimate(h) − estimate(1/2)| / |h − 1/2|`
/// from paired per-path differences.
pub fn estimate_hitting_laplace<T: Scalar + SampleScalar>(
    problem: &SdeProblem<T>,
    lambda: T,
    barrier: T,
    h_list: &[T],
    grid: &GridSpec<T>,
    n_mc: usize,
    seed_root: u64,
) -> Result<ExperimentReport<T>> {
    problem.expect_scalar()?;
    if !(lambda > T::zero()) || !lambda.is_finite() || !barrier.is_finite() {
        return Err(CoreError::InvalidInput {
            reason: "Laplace rate must be positive and the barrier finite".into(),
        });
    }
    if h_list.is_empty() || n_mc == 0 {
        return Err(CoreError::InvalidInput {
            reason: "hitting experiment needs at least one Hurst value and one replication".into(),
        });
    }
    let x0 = problem.x0()[0];
    if x0 > barrier {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "initial state {} already lies above the barrier {}",
                x0.as_f64(),
                barrier.as_f64()
            ),
        });
    }
    let mut h_values: Vec<T> = Vec::new();
    for &h in h_list {
        if !h_values.contains(&h) {
            h_values.push(h);
        }
    }
    let scheme = choose_scheme(problem, &h_values)?;
    let synths = h_values
        .iter()
        .map(|&h| FbmSynth::new(h, grid))
        .collect::<Result<Vec<_>>>()?;

    // Per replication and Hurst value: (e^{−λτ} or 0, 1 if unhit).
    let samples: Vec<Vec<(T, T)>> = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let driver = sample_driver(seed_stream(seed_root, r as u64), grid);
            synths
                .iter()
                .map(|synth| {
                    let bundle = FbmBundle {
                        h: synth.h(),
                        grid: *grid,
                        path: synth.synthesize_path(&driver)?,
                        sensitivity: Vec::new(),
                        driver_seed: driver.seed,
                    };
                    let sol = solve_with_scheme(problem, scheme, &bundle)?;
                    let hit = sol.states.iter().position(|&x| x >= barrier);
                    Ok(match hit {
                        Some(k) => ((-lambda * grid.node(k)).exp(), T::zero()),
                        None => (T::zero(), T::one()),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport::new("hitting-laplace");
    report.push_metadata("scheme", scheme.label());
    report.push_metadata("lambda", format!("{}", lambda.as_f64()));
    report.push_metadata("barrier", format!("{}", barrier.as_f64()));
    report.push_metadata("n_mc", format!("{n_mc}"));
    report.push_metadata(
        "truncation_bound",
        format!("{:e}", (-lambda * grid.t_max).exp().as_f64()),
    );
    for (j, &h) in h_values.iter().enumerate() {
        let vals: Vec<T> = samples.iter().map(|row| row[j].0).collect();
        let (mean, se) = mean_and_se(&vals);
        report.push_estimate("laplace_transform", Some(h), None, mean, se, n_mc);
        let unhit: Vec<T> = samples.iter().map(|row| row[j].1).collect();
        let (umean, use_) = mean_and_se(&unhit);
        report.push_estimate("unhit_fraction", Some(h), None, umean, use_, n_mc);
    }
    let half = T::from_f64_c(0.5);
    if let Some(j_half) = h_values.iter().position(|&h| h == half) {
        for (j, &h) in h_values.iter().enumerate() {
            if j == j_half {
                continue;
            }
            let diffs: Vec<T> = samples.iter().map(|row| row[j].0 - row[j_half].0).collect();
            let (mean, se) = mean_and_se(&diffs);
            let gap = (h - half).abs();
            report.push_estimate(
                "laplace_quotient",
                Some(h),
                Some(half),
                (mean / gap).abs(),
                se.map(|s| s / gap),
                n_mc,
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::sample_driver;
    use crate::sde::solve_additive;
    use approx::assert_abs_diff_eq;

    /// Bundle from a path-only synthesis (the fOU simulator and the
    /// comparison loops never read sensitivities).
    fn path_bundle(synth: &FbmSynth<f64>, driver: &DriverPath<f64>) -> FbmBundle<f64> {
        FbmBundle {
            h: synth.h(),
            grid: *synth.grid(),
            path: synth.synthesize_path(driver).unwrap(),
            sensitivity: Vec::new(),
            driver_seed: driver.seed,
        }
    }

    #[test]
    fn burn_in_respects_the_decay_bound() {
        let spec = FouSpec::new(1.0f64, 0.6, 1.0, 16, 4.0, 64).unwrap();
        assert_eq!(spec.horizon_steps(), 16);
        let s_burn = spec.grid().dt() * spec.burn_steps() as f64;
        assert!(
            (-spec.kappa() * s_burn).exp() <= FOU_BURN_IN_BOUND,
            "auto burn-in violates the decay bound"
        );
        let shorter = s_burn - spec.grid().dt();
        assert!(
            (-spec.kappa() * shorter).exp() > FOU_BURN_IN_BOUND,
            "auto burn-in is not minimal"
        );
        assert_abs_diff_eq!(spec.horizon_grid().t_max, 1.0, epsilon = 1e-12);
        assert_eq!(spec.grid().n_steps, spec.burn_steps() + 16);

        assert!(FouSpec::with_burn_steps(1.0f64, 0.6, 1.0, 16, 4.0, 64, 100).is_err());
        assert!(FouSpec::with_burn_steps(1.0f64, 0.6, 1.0, 16, 4.0, 64, 320).is_ok());
        assert!(FouSpec::new(0.0f64, 0.6, 1.0, 16, 4.0, 64).is_err());
        assert!(FouSpec::new(1.0f64, 1.2, 1.0, 16, 4.0, 64).is_err());
        assert!(FouSpec::new(1.0f64, 0.6, -1.0, 16, 4.0, 64).is_err());
    }

    #[test]
    fn simulator_validates_bundles() {
        let spec = FouSpec::new(1.0f64, 0.6, 1.0, 16, 4.0, 64).unwrap();
        let other = GridSpec::new(1.0f64, 4.0, 16, 64).unwrap();
        let d = sample_driver(1u64, &other);
        assert!(simulate_fou(&spec, &d).is_err(), "wrong grid must be rejected");
        let d = sample_driver(1u64, spec.grid());
        let wrong_h = synthesize_fbm(&d, 0.7).unwrap();
        assert!(simulate_fou_with(&spec, &wrong_h).is_err(), "wrong h must be rejected");
        assert!(simulate_fou(&spec, &d).is_ok());
    }

    #[test]
    fn stationary_variance_matches_frozen_values() {
        // Γ(2H+1)/(2κ^{2H}) at pinned parameter points.
        let cases = [
            (1.0, 0.5, 0.5),
            (2.0, 0.5, 0.25),
            (1.0, 0.7, 0.621_084_672_252_152_7),
            (1.0, 0.75, 0.664_670_194_089_568_5),
            (2.0, 0.6, 0.239_793_694_769_101_6),
        ];
        for (kappa, h, want) in cases {
            let got = stationary_fou_variance(kappa, h).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        assert!(stationary_fou_variance(0.0, 0.5).is_err());
        assert!(stationary_fou_variance(1.0, 1.0).is_err());
    }

    #[test]
    fn fou_matches_the_stationary_law_at_half() {
        // At H = 1/2 the synthesis is exact, so the only bias is the
        // piecewise-linear interpolation of B inside the convolution cells
        // (≈3e−4 on the variance here, far below the Monte-Carlo
        // resolution).
        let spec = FouSpec::new(1.0f64, 0.5, 0.25, 4, 4.0, 32).unwrap();
        let synth = FbmSynth::new(0.5, spec.grid()).unwrap();
        let n_mc = 4000;
        let ends: Vec<(f64, f64)> = (0..n_mc)
            .into_par_iter()
            .map(|r| {
                let driver = sample_driver(seed_stream(901, r as u64), spec.grid());
                let sol = simulate_fou_with(&spec, &path_bundle(&synth, &driver)).unwrap();
                let n = sol.states.len();
                (sol.states[n - 2], sol.states[n - 1])
            })
            .collect();
        let last: Vec<f64> = ends.iter().map(|e| e.1).collect();
        let (mean, mean_se) = mean_and_se(&last);
        assert!(
            mean.abs() <= 4.0 * mean_se.unwrap(),
            "stationary mean {mean} not within 4 SE of 0"
        );
        let sq: Vec<f64> = last.iter().map(|v| v * v).collect();
        let (var, var_se) = mean_and_se(&sq);
        assert!(
            (var - 0.5).abs() <= 4.0 * var_se.unwrap() + 2e-3,
            "stationary variance {var} not within 4 SE of 1/2"
        );

        // Gaussianity: standardized third and fourth moments.
        let m2 = var;
        let m3 = last.iter().map(|v| v.powi(3)).sum::<f64>() / n_mc as f64;
        let m4 = last.iter().map(|v| v.powi(4)).sum::<f64>() / n_mc as f64;
        let skew = m3 / m2.powf(1.5);
        let exkurt = m4 / (m2 * m2) - 3.0;
        let nf = n_mc as f64;
        assert!(skew.abs() <= 4.0 * (6.0 / nf).sqrt(), "skewness {skew} too large");
        assert!(exkurt.abs() <= 4.0 * (24.0 / nf).sqrt(), "excess kurtosis {exkurt} too large");

        // One-step shift invariance on the same replications (paired).
        let dv: Vec<f64> = ends.iter().map(|e| e.1 - e.0).collect();
        let (dmean, dse) = mean_and_se(&dv);
        assert!(dmean.abs() <= 4.0 * dse.unwrap(), "shifted mean moved by {dmean}");
        let dsq: Vec<f64> = ends.iter().map(|e| e.1 * e.1 - e.0 * e.0).collect();
        let (dqmean, dqse) = mean_and_se(&dsq);
        assert!(
            dqmean.abs() <= 4.0 * dqse.unwrap(),
            "shifted second moment moved by {dqmean}"
        );
    }

    #[test]
    fn autocorrelation_decays_faster_for_larger_kappa() {
        // Shared grid (burn-in sized for the slowest rate) so one driver per
        // replication feeds all three rates.
        let (h, horizon, n_steps, s_trunc, n_past, burn) = (0.6f64, 0.5, 8, 4.0, 64, 300);
        let specs: Vec<FouSpec<f64>> = [1.0, 4.0, 16.0]
            .iter()
            .map(|&kappa| {
                FouSpec::with_burn_steps(kappa, h, horizon, n_steps, s_trunc, n_past, burn)
                    .unwrap()
            })
            .collect();
        let synth = FbmSynth::new(h, specs[0].grid()).unwrap();
        let n_mc = 1500;
        let lags: Vec<Vec<(f64, f64)>> = (0..n_mc)
            .into_par_iter()
            .map(|r| {
                let driver = sample_driver(seed_stream(907, r as u64), specs[0].grid());
                let bundle = path_bundle(&synth, &driver);
                specs
                    .iter()
                    .map(|spec| {
                        let sol = simulate_fou_with(spec, &bundle).unwrap();
                        (sol.states[4], sol.states[5])
                    })
                    .collect()
            })
            .collect();
        let corr = |j: usize| -> f64 {
            let xs: Vec<f64> = lags.iter().map(|row| row[j].0).collect();
            let ys: Vec<f64> = lags.iter().map(|row| row[j].1).collect();
            let n = n_mc as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
            sxy / (sxx * syy).sqrt()
        };
        let (c1, c4, c16) = (corr(0), corr(1), corr(2));
        assert!(
            c1 > c4 && c4 > c16,
            "lag-1 autocorrelation not decreasing in kappa: {c1} {c4} {c16}"
        );
        assert!(c1 > 0.85, "slow rate decorrelated too fast: {c1}");
        assert!(c16 < 0.6, "fast rate still correlated: {c16}");
    }

    #[test]
    fn ergodic_average_is_exact_on_constants_and_ramps() {
        let grid = GridSpec::without_past(2.0f64, 8).unwrap();
        let path = PathSolution {
            h: 0.5,
            scheme: Scheme::AdditiveReduction,
            grid,
            d: 1,
            states: grid.nodes(),
        };
        let c = ergodic_average(&path, |_| 2.5).unwrap();
        assert_abs_diff_eq!(c, 2.5, epsilon = 1e-15);
        // Trapezoid integrates affine functions of t exactly:
        // (1/T)∫ t dt = T/2.
        let ramp = ergodic_average(&path, |x| x[0]).unwrap();
        assert_abs_diff_eq!(ramp, 1.0, epsilon = 1e-14);

        let broken = PathSolution { states: vec![0.0; 3], ..path };
        assert!(ergodic_average(&broken, |x| x[0]).is_err());
    }

    #[test]
    fn ergodic_averages_match_the_stationary_moments() {
        let spec = FouSpec::new(1.0f64, 0.6, 200.0, 3200, 64.0, 512).unwrap();
        let synth = FbmSynth::new(0.6, spec.grid()).unwrap();
        let n_mc = 32;
        let avgs: Vec<(f64, f64)> = (0..n_mc)
            .into_par_iter()
            .map(|r| {
                let driver = sample_driver(seed_stream(911, r as u64), spec.grid());
                let sol = simulate_fou_with(&spec, &path_bundle(&synth, &driver)).unwrap();
                let a1 = ergodic_average(&sol, |x| x[0]).unwrap();
                let a2 = ergodic_average(&sol, |x| x[0] * x[0]).unwrap();
                (a1, a2)
            })
            .collect();
        let firsts: Vec<f64> = avgs.iter().map(|a| a.0).collect();
        let (m1, se1) = mean_and_se(&firsts);
        assert!(
            m1.abs() <= 4.0 * se1.unwrap() + 0.01,
            "time-averaged mean {m1} too far from 0"
        );
        let seconds: Vec<f64> = avgs.iter().map(|a| a.1).collect();
        let (m2, se2) = mean_and_se(&seconds);
        let target = stationary_fou_variance(1.0, 0.6).unwrap();
        // The 0.04 covers the kernel-truncation bias of the synthesis at this
        // `s_trunc`, which does not shrink with more replications.
        assert!(
            (m2 - target).abs() <= 4.0 * se2.unwrap() + 0.04,
            "time-averaged second moment {m2} too far from {target}"
        );
    }

    #[test]
    fn dissipative_wrapper_validates_and_monitors() {
        let ou = SdeProblem::ou(1.0f64, 0.0);
        assert!(DissipativeProblem::new(ou.clone(), 1.0, 1.0).is_ok());
        assert!(DissipativeProblem::new(ou.clone(), 0.0, 1.0).is_err());
        assert!(DissipativeProblem::new(ou.clone(), 1.0, -1.0).is_err());
        // Multiplicative noise is outside the comparison theory.
        assert!(DissipativeProblem::new(SdeProblem::linear(1.0f64, 1.0, 1.0), 1.0, 1.0).is_err());

        let diss = DissipativeProblem::new(ou, 1.0, 1.0).unwrap();
        diss.check_pair(&[1.5], &[-0.25]).unwrap();
        assert!(diss.check_pair(&[1.0], &[1.0, 2.0]).is_err());

        // An expanding drift must trip the monitor.
        let expanding = SdeProblem::new(
            1,
            1,
            vec![0.0f64],
            |x, out| out[0] = x[0],
            |_x, out| out[0] = 1.0,
        )
        .unwrap()
        .with_constant_sigma();
        let bad = DissipativeProblem::new(expanding, 1.0, 1.0).unwrap();
        assert!(bad.check_pair(&[1.0], &[0.0]).is_err(), "monitor missed a violation");
    }

    #[test]
    fn equal_hurst_pairs_compare_to_zero() {
        let diss = DissipativeProblem::new(SdeProblem::ou(1.0f64, 0.0), 1.0, 1.0).unwrap();
        let grid = GridSpec::new(4.0f64, 8.0, 64, 64).unwrap();
        let report =
            compare_across_h(&diss, &[(0.6, 0.6)], &grid, 0.1, &[2.0], 3, 931).unwrap();
        let pair = &report.pairs[0];
        assert_eq!(pair.gap, 0.0);
        assert_eq!(pair.weighted_sup, 0.0);
        assert_eq!(pair.checkpoint_sq[0].0, 0.0);
        assert_eq!(pair.time_avg_sq, 0.0);
        assert!(report.weighted_sup_slope.is_none());
        let flat = report.to_report();
        assert_eq!(flat.find("weighted_sup").unwrap().value, 0.0);
        assert!(flat.find("moment_sq_t2").is_some());
    }

    #[test]
    fn comparison_rates_match_the_lipschitz_theory_for_ou() {
        // Gaps {0.2, 0.1, 0.05} anchored at 1/2: the weighted sup should be
        // ~linear in the gap and the squared statistics ~quadratic, with the
        // checkpoint ratios E|ΔX|²/gap² flat across checkpoints.
        let diss = DissipativeProblem::new(SdeProblem::ou(1.0f64, 0.0), 1.0, 1.0).unwrap();
        let grid = GridSpec::new(100.0f64, 100.0, 1600, 512).unwrap();
        let checkpoints = [10.0, 50.0, 100.0];
        let pairs = [(0.5, 0.7), (0.5, 0.6), (0.5, 0.55)];
        let report =
            compare_across_h(&diss, &pairs, &grid, 0.1, &checkpoints, 24, 915).unwrap();

        let sup_slope = report.weighted_sup_slope.as_ref().expect("three positive gaps");
        assert!(
            (0.8..=1.05).contains(&sup_slope.slope),
            "weighted-sup slope {} outside [0.8, 1.05]",
            sup_slope.slope
        );
        let avg_slope = report.time_avg_slope.as_ref().expect("three positive gaps");
        assert!(
            (1.6..=2.4).contains(&avg_slope.slope),
            "time-averaged-square slope {} outside [1.6, 2.4]",
            avg_slope.slope
        );
        let mut ratios: Vec<f64> = Vec::new();
        for pair in &report.pairs {
            for &(value, _) in &pair.checkpoint_sq {
                ratios.push(value / (pair.gap * pair.gap));
            }
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        assert!(
            hi / lo <= 5.0,
            "checkpoint moment ratios spread too wide: [{lo}, {hi}]"
        );
    }

    #[test]
    fn additive_dissipative_flows_contract_pathwise() {
        // μ(x) = −x − x³ is uniformly dissipative with rate 1; two solutions
        // on one driver must approach each other at least as fast as e^{−t}.
        let drift = |x: &[f64], out: &mut [f64]| out[0] = -x[0] - x[0].powi(3);
        let unit = |_x: &[f64], out: &mut [f64]| out[0] = 1.0;
        let make = |x0: f64| {
            SdeProblem::new(1, 1, vec![x0], drift, unit)
                .unwrap()
                .with_mu_jacobian(|x, out| out[0] = -1.0 - 3.0 * x[0] * x[0])
                .with_constant_sigma()
        };
        let grid = GridSpec::new(5.0f64, 8.0, 640, 128).unwrap();
        let bundle = synthesize_fbm(&sample_driver(917, &grid), 0.7).unwrap();
        let hi = solve_additive(&make(2.0), &bundle).unwrap();
        let lo = solve_additive(&make(-1.0), &bundle).unwrap();
        for k in 0..grid.n_nodes() {
            let gap = (hi.states[k] - lo.states[k]).abs();
            let envelope = 3.0 * (-grid.node(k)).exp();
            assert!(
                gap <= envelope * (1.0 + 1e-6) + 1e-12,
                "contraction violated at node {k}: {gap} > {envelope}"
            );
        }
    }

    #[test]
    fn stationary_law_quotients_stay_bounded_across_gaps() {
        // |E φ(X̄^H) − E φ(X̄^{H'})| / |H−H'| for φ = x², estimated through
        // long-run ergodic averages on common drivers, should be stable as
        // the gap shrinks (the law is Lipschitz in H).
        let horizon = 200.0f64;
        let hs = [0.6, 0.65, 0.7];
        let specs: Vec<FouSpec<f64>> = hs
            .iter()
            .map(|&h| FouSpec::new(1.0, h, horizon, 3200, 64.0, 512).unwrap())
            .collect();
        let synths: Vec<FbmSynth<f64>> =
            hs.iter().map(|&h| FbmSynth::new(h, specs[0].grid()).unwrap()).collect();
        let n_mc = 12;
        let rows: Vec<Vec<f64>> = (0..n_mc)
            .into_par_iter()
            .map(|r| {
                let driver = sample_driver(seed_stream(929, r as u64), specs[0].grid());
                specs
                    .iter()
                    .zip(&synths)
                    .map(|(spec, synth)| {
                        let sol = simulate_fou_with(spec, &path_bundle(synth, &driver)).unwrap();
                        ergodic_average(&sol, |x| x[0] * x[0]).unwrap()
                    })
                    .collect()
            })
            .collect();
        let quotient = |j: usize, gap: f64| -> f64 {
            let diffs: Vec<f64> = rows.iter().map(|row| row[j] - row[0]).collect();
            let (mean, _) = mean_and_se(&diffs);
            (mean / gap).abs()
        };
        let q_wide = quotient(2, 0.1);
        let q_narrow = quotient(1, 0.05);
        let ratio = (q_wide / q_narrow).max(q_narrow / q_wide);
        assert!(
            ratio <= 2.0,
            "law quotients unstable across gaps: {q_wide} vs {q_narrow}"
        );
        for q in [q_wide, q_narrow] {
            assert!((0.2..=2.0).contains(&q), "law quotient {q} implausible");
        }
    }

    #[test]
    fn second_moments_stay_under_twice_the_stationary_bound() {
        let grid = GridSpec::new(200.0f64, 64.0, 3200, 512).unwrap();
        let problem = SdeProblem::ou(1.0f64, 0.0);
        let n_mc = 32;
        for h in [0.4, 0.5, 0.7] {
            let synth = FbmSynth::new(h, &grid).unwrap();
            let sums: Vec<Vec<f64>> = (0..n_mc)
                .into_par_iter()
                .map(|r| {
                    let driver = sample_driver(seed_stream(925, r as u64), &grid);
                    let sol = solve_additive(&problem, &path_bundle(&synth, &driver)).unwrap();
                    (1..=8)
                        .map(|c| {
                            let x = sol.states[c * 400];
                            x * x
                        })
                        .collect()
                })
                .collect();
            let bound = 2.0 * stationary_fou_variance(1.0, h).unwrap();
            for c in 0..8 {
                let vals: Vec<f64> = sums.iter().map(|row| row[c]).collect();
                let (mean, _) = mean_and_se(&vals);
                assert!(
                    mean <= bound,
                    "second moment {mean} at checkpoint {c} exceeds the bound {bound} (h={h})"
                );
            }
        }
    }

    #[test]
    fn hitting_laplace_handles_trivial_and_ordered_cases() {
        // Start on the barrier: τ = 0 and the transform is exactly 1.
        let grid = GridSpec::new(1.0f64, 2.0, 16, 8).unwrap();
        let at_barrier = SdeProblem::ou(1.0f64, 1.0);
        let report =
            estimate_hitting_laplace(&at_barrier, 2.0, 1.0, &[0.5], &grid, 5, 919).unwrap();
        let row = report.find("laplace_transform").unwrap();
        assert_eq!(row.value, 1.0);
        assert_eq!(row.std_err, Some(0.0));
        assert_eq!(report.find("unhit_fraction").unwrap().value, 0.0);

        // Pathwise monotone in λ on common drivers.
        let grid = GridSpec::new(10.0f64, 8.0, 320, 128).unwrap();
        let ou = SdeProblem::ou(1.0f64, 0.0);
        let slow = estimate_hitting_laplace(&ou, 1.0, 1.0, &[0.6], &grid, 300, 919).unwrap();
        let fast = estimate_hitting_laplace(&ou, 4.0, 1.0, &[0.6], &grid, 300, 919).unwrap();
        let (v_slow, v_fast) = (
            slow.find("laplace_transform").unwrap().value,
            fast.find("laplace_transform").unwrap().value,
        );
        assert!(v_fast < v_slow, "larger λ must shrink the transform: {v_fast} vs {v_slow}");

        let above = SdeProblem::ou(1.0f64, 2.0);
        assert!(estimate_hitting_laplace(&above, 1.0, 1.0, &[0.5], &grid, 5, 1).is_err());
        assert!(estimate_hitting_laplace(&ou, -1.0, 1.0, &[0.5], &grid, 5, 1).is_err());
    }

    #[test]
    fn hitting_laplace_quotients_are_stable_near_half() {
        let grid = GridSpec::new(20.0f64, 8.0, 640, 256).unwrap();
        let ou = SdeProblem::ou(1.0f64, 0.0);
        let report =
            estimate_hitting_laplace(&ou, 1.0, 1.0, &[0.45, 0.5, 0.55], &grid, 1000, 921)
                .unwrap();
        let quotients: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.statistic == "laplace_quotient")
            .map(|r| r.value)
            .collect();
        assert_eq!(quotients.len(), 2, "expected one quotient per non-half Hurst value");
        let (lo, hi) = (
            quotients.iter().cloned().fold(f64::INFINITY, f64::min),
            quotients.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        assert!(
            hi / lo <= 2.0,
            "Laplace quotients vary by more than a factor 2: [{lo}, {hi}]"
        );
        assert!(lo > 0.0, "quotients must be positive");
    }
}
