//! Dyadic rough-path levels: piecewise-linear Lévy areas, ρ-Hölder distances,
//! refinement convergence, and the divergent mixed-area statistic.
//!
//! [`DyadicPath`] samples a path at the `2^n + 1` dyadic nodes of `[0, T]` and
//! stands for its piecewise-linear interpolant.  [`RoughLevel`] carries the
//! first level (increments) and second level (Lévy areas) of a vector of such
//! paths with O(1) interval queries that satisfy the Chen identity to
//! rounding; [`holder_distance`] measures ρ-Hölder distances between two
//! levels over all dyadic node pairs.
//!
//! Three experiments build on these:
//! - [`levy_area_convergence`]: for two *independent* fBm components the
//!   refinement distances `d_ρ(B[n], B[n+1])` are Cauchy and shrink level by
//!   level;
//! - [`mixed_area_divergence`]: the off-diagonal trapezoid sum
//!   `S_n = ½ Σ_k (x_{t_k} + x_{t_{k−1}})(y_{t_k} − y_{t_{k−1}})` coupling a
//!   path `y = B^H` with its Hurst sensitivity `x = ∂_H B^H` does *not*
//!   refine to a limit: the contrasts `S_{n+1} − S_n` keep a constant mean
//!   (`−T·ln 2 / 2` at `H = 1/2`).  Both Monte Carlo estimates and *exact*
//!   Gaussian quadratic-form moments of the contrasts are reported; swapping
//!   the sensitivity for an independent copy of the path restores convergence
//!   and serves as the control;
//! - [`law_continuity_check`]: bounded continuous path functionals of
//!   additive-noise solutions vary continuously in `H` on `(1/3, 1/2]`, where
//!   Young integration is unavailable.

use std::sync::Arc;

use rayon::prelude::*;

use crate::driver::{sample_driver, seed_stream, SampleScalar};
use crate::error::{CoreError, Result};
use crate::fbm::{FbmBundle, FbmSynth};
use crate::grid::GridSpec;
use crate::kernel::{
    cell_dweight, cell_weight, dg_anti, g_anti, mvn_constant, mvn_constant_derivative, H_MAX,
};
use crate::report::{fit_loglog_slope, mean_and_se, ExperimentReport};
use crate::scalar::Scalar;
use crate::sde::{choose_scheme, solve_with_scheme, SdeProblem};

/// Deepest supported dyadic level (`2^30` cells is far beyond any sane grid).
const MAX_LEVEL: usize = 30;

fn cells_of_level(level: usize) -> Result<usize> {
    if level > MAX_LEVEL {
        return Err(CoreError::InvalidInput {
            reason: format!("dyadic level {level} exceeds the supported maximum {MAX_LEVEL}"),
        });
    }
    Ok(1usize << level)
}

/// A path sampled at the dyadic nodes `t_k = k·T/2^n`, standing for its
/// piecewise-linear interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPath<T> {
    level: usize,
    t_max: T,
    values: Vec<T>,
}

impl<T: Scalar> DyadicPath<T> {
    /// Dyadic level `n`.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Horizon `T`.
    pub fn t_max(&self) -> T {
        self.t_max
    }

    /// Number of cells `2^n`.
    pub fn n_cells(&self) -> usize {
        1usize << self.level
    }

    /// Number of nodes `2^n + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_cells() + 1
    }

    /// Node spacing `T/2^n`.
    pub fn dt(&self) -> T {
        self.t_max / T::from_usize_c(self.n_cells())
    }

    /// Node time `t_k = k·T/2^n`.
    pub fn node(&self, k: usize) -> T {
        debug_assert!(k < self.n_nodes(), "node index {k} out of range");
        self.t_max * T::from_usize_c(k) / T::from_usize_c(self.n_cells())
    }

    /// Sampled node values.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Index `k` with `node(k) = t`, or an error if `t` is not a node.
    fn node_index(&self, t: T) -> Result<usize> {
        let ratio = (t / self.dt()).as_f64();
        let k = ratio.round();
        if k < 0.0 || k > self.n_cells() as f64 || (ratio - k).abs() > 1e-9 * ratio.abs().max(1.0)
        {
            return Err(CoreError::NotANode { t: t.as_f64(), dt: self.dt().as_f64() });
        }
        Ok(k as usize)
    }

    /// Piecewise-linear interpolant at `t ∈ [0, T]`.
    pub fn eval(&self, t: T) -> Result<T> {
        if t < T::zero() || t > self.t_max {
            return Err(CoreError::InvalidInput {
                reason: format!("time {t} outside [0, {}]", self.t_max),
            });
        }
        let dt = self.dt();
        let k = ((t / dt).as_f64().floor() as usize).min(self.n_cells() - 1);
        let frac = (t - self.node(k)) / dt;
        Ok(self.values[k] + frac * (self.values[k + 1] - self.values[k]))
    }

    /// Exact resampling of the interpolant at a finer dyadic level: shared
    /// nodes keep their values, new nodes are the cell midpoint averages.
    pub fn refine(&self, to_level: usize) -> Result<Self> {
        cells_of_level(to_level)?;
        if to_level < self.level {
            return Err(CoreError::InvalidInput {
                reason: format!("cannot refine level {} down to {to_level}", self.level),
            });
        }
        let half = T::from_f64_c(0.5);
        let mut values = self.values.clone();
        for _ in self.level..to_level {
            let mut next = Vec::with_capacity(2 * values.len() - 1);
            for w in values.windows(2) {
                next.push(w[0]);
                next.push((w[0] + w[1]) * half);
            }
            next.push(*values.last().expect("dyadic path holds at least two values"));
            values = next;
        }
        Ok(Self { level: to_level, t_max: self.t_max, values })
    }
}

/// Restricts node values on `grid` to the dyadic nodes of `level`.
///
/// The grid must resolve the level exactly (`2^level` divides `n_steps`);
/// shared nodes are copied, never interpolated.
pub fn dyadic_sample<T: Scalar>(
    grid: &GridSpec<T>,
    values: &[T],
    level: usize,
) -> Result<DyadicPath<T>> {
    let cells = cells_of_level(level)?;
    if values.len() != grid.n_nodes() {
        return Err(CoreError::GridMismatch {
            reason: format!(
                "{} node values do not fit a grid with {} nodes",
                values.len(),
                grid.n_nodes()
            ),
        });
    }
    if cells > grid.n_steps || grid.n_steps % cells != 0 {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "grid with {} steps cannot resolve dyadic level {level}",
                grid.n_steps
            ),
        });
    }
    let stride = grid.n_steps / cells;
    let values = (0..=cells).map(|k| values[k * stride]).collect();
    Ok(DyadicPath { level, t_max: grid.t_max, values })
}

fn check_compatible<T: Scalar>(x: &DyadicPath<T>, y: &DyadicPath<T>) -> Result<()> {
    if x.level != y.level || x.t_max != y.t_max {
        return Err(CoreError::GridMismatch {
            reason: format!(
                "dyadic paths differ: level {} on [0, {}] vs level {} on [0, {}]",
                x.level, x.t_max, y.level, y.t_max
            ),
        });
    }
    Ok(())
}

/// Lévy area `∫_s^t (x_u − x_s) dy_u` of two piecewise-linear paths, exact via
/// the per-cell trapezoid closed form.
///
/// `s` and `t` must be nodes of the (shared) level with `s ≤ t`.
pub fn levy_area<T: Scalar>(x: &DyadicPath<T>, y: &DyadicPath<T>, s: T, t: T) -> Result<T> {
    check_compatible(x, y)?;
    let i = x.node_index(s)?;
    let j = x.node_index(t)?;
    if i > j {
        return Err(CoreError::InvalidInput {
            reason: format!("integration bounds out of order: s = {s} > t = {t}"),
        });
    }
    let half = T::from_f64_c(0.5);
    let xs = x.values[i];
    let mut acc = T::zero();
    for k in i..j {
        let mid = half * (x.values[k] + x.values[k + 1]) - xs;
        acc += (y.values[k + 1] - y.values[k]) * mid;
    }
    Ok(acc)
}

/// First and second rough-path level of `m` dyadic paths on one node set.
///
/// Interval queries run in O(1) off prefix areas; by construction they satisfy
/// the Chen identity
/// `B²_{s,u} = B²_{s,t} + B²_{t,u} + B¹_{s,t} ⊗ B¹_{t,u}` exactly to rounding
/// on every dyadic triple.
#[derive(Debug, Clone)]
pub struct RoughLevel<T> {
    level: usize,
    t_max: T,
    m: usize,
    values: Vec<Vec<T>>,
    /// Prefix areas `∫_0^{t_k} (x^a − x^a_0) dx^b`, indexed `(a·m + b)·nodes + k`.
    prefix: Vec<T>,
}

impl<T: Scalar> RoughLevel<T> {
    /// Builds both levels from paths sharing one dyadic node set.
    pub fn new(paths: &[DyadicPath<T>]) -> Result<Self> {
        let first = paths.first().ok_or_else(|| CoreError::InvalidInput {
            reason: "rough level needs at least one path".into(),
        })?;
        for p in paths {
            check_compatible(first, p)?;
        }
        let m = paths.len();
        let n_nodes = first.n_nodes();
        let half = T::from_f64_c(0.5);
        let values: Vec<Vec<T>> = paths.iter().map(|p| p.values.clone()).collect();
        let mut prefix = vec![T::zero(); m * m * n_nodes];
        for a in 0..m {
            for b in 0..m {
                let base = (a * m + b) * n_nodes;
                let mut acc = T::zero();
                for k in 0..n_nodes - 1 {
                    let mid = half * (values[a][k] + values[a][k + 1]) - values[a][0];
                    acc += (values[b][k + 1] - values[b][k]) * mid;
                    prefix[base + k + 1] = acc;
                }
            }
        }
        Ok(Self { level: first.level, t_max: first.t_max, m, values, prefix })
    }

    /// Dyadic level.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of component paths.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of nodes `2^level + 1`.
    pub fn n_nodes(&self) -> usize {
        (1usize << self.level) + 1
    }

    /// Horizon `T`.
    pub fn t_max(&self) -> T {
        self.t_max
    }

    /// Node time `t_k`.
    pub fn node(&self, k: usize) -> T {
        self.t_max * T::from_usize_c(k) / T::from_usize_c(1usize << self.level)
    }

    fn check_query(&self, a: usize, i: usize, j: usize) -> Result<()> {
        if a >= self.m {
            return Err(CoreError::InvalidInput {
                reason: format!("component {a} out of range (m = {})", self.m),
            });
        }
        if i > j || j >= self.n_nodes() {
            return Err(CoreError::InvalidInput {
                reason: format!("node pair ({i}, {j}) invalid for {} nodes", self.n_nodes()),
            });
        }
        Ok(())
    }

    /// First-level increment `x^a_{t_j} − x^a_{t_i}`.
    pub fn increment(&self, a: usize, i: usize, j: usize) -> Result<T> {
        self.check_query(a, i, j)?;
        Ok(self.values[a][j] - self.values[a][i])
    }

    /// Second-level entry `∫_{t_i}^{t_j} (x^a_u − x^a_{t_i}) dx^b_u`.
    pub fn area(&self, a: usize, b: usize, i: usize, j: usize) -> Result<T> {
        self.check_query(a, i, j)?;
        self.check_query(b, i, j)?;
        let base = (a * self.m + b) * self.n_nodes();
        Ok(self.prefix[base + j]
            - self.prefix[base + i]
            - (self.values[a][i] - self.values[a][0]) * (self.values[b][j] - self.values[b][i]))
    }
}

/// ρ-Hölder distances between two rough levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderDistance<T> {
    /// Hölder exponent of the first level (`2ρ` weighs the second).
    pub rho: T,
    /// `max |ΔB¹ − ΔB̃¹| / (t−s)^ρ` over dyadic pairs and components.
    pub d1: T,
    /// `max |ΔB² − ΔB̃²| / (t−s)^{2ρ}` over dyadic pairs and component pairs.
    pub d2: T,
}

/// ρ-Hölder distance between two rough levels over all dyadic node pairs.
///
/// Both levels must live on the *same* node set; to compare different dyadic
/// resolutions of one path, [`DyadicPath::refine`] the coarser one first (the
/// refinement is exact for the piecewise-linear interpolant).  The pair count
/// is quadratic in the node count.
pub fn holder_distance<T: Scalar>(
    x: &RoughLevel<T>,
    y: &RoughLevel<T>,
    rho: T,
) -> Result<HolderDistance<T>> {
    if !(rho > T::zero() && rho < T::one()) {
        return Err(CoreError::InvalidInput {
            reason: format!("holder exponent must lie in (0, 1), got {rho}"),
        });
    }
    if x.level != y.level || x.t_max != y.t_max || x.m != y.m {
        return Err(CoreError::GridMismatch {
            reason: "rough levels must share node set and dimension; refine the coarser first"
                .into(),
        });
    }
    let n = x.n_nodes();
    let m = x.m;
    let dt = x.t_max / T::from_usize_c(n - 1);
    let two = T::from_f64_c(2.0);
    let inv_pow1: Vec<T> =
        (0..n).map(|l| (dt * T::from_usize_c(l)).powf(rho).recip()).collect();
    let inv_pow2: Vec<T> =
        (0..n).map(|l| (dt * T::from_usize_c(l)).powf(two * rho).recip()).collect();
    let mut d1 = T::zero();
    let mut d2 = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let lag = j - i;
            for a in 0..m {
                let gap = ((x.values[a][j] - x.values[a][i])
                    - (y.values[a][j] - y.values[a][i]))
                    .abs();
                d1 = d1.max(gap * inv_pow1[lag]);
                for b in 0..m {
                    let gap = (x.area(a, b, i, j)? - y.area(a, b, i, j)?).abs();
                    d2 = d2.max(gap * inv_pow2[lag]);
                }
            }
        }
    }
    Ok(HolderDistance { rho, d1, d2 })
}

fn check_levels_ascending(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(CoreError::InvalidInput { reason: "need at least one dyadic level".into() });
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidInput {
            reason: format!("dyadic levels must be strictly increasing, got {levels:?}"),
        });
    }
    Ok(())
}

fn median<T: Scalar>(mut values: Vec<T>) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        Some(values[n / 2])
    } else {
        Some((values[n / 2 - 1] + values[n / 2]) * T::from_f64_c(0.5))
    }
}

/// Refinement convergence of the rough levels of two independent fBm
/// components.
///
/// For each listed level `n` the distance `d_ρ(B[n], B[n+1])` between the
/// dyadic approximations is computed per replication (the coarser level is
/// exactly refined so both live on the level-`n+1` nodes).  Reports per-level
/// means of `d1` and `d2`, the median ratio of successive `d2` values across
/// replications (< 1 certifies Cauchy decay), and a log-log slope fit of the
/// mean `d2` against the node spacing.
///
/// Requires `h > 1/3` and `0 < rho < h`.
pub fn levy_area_convergence<T: Scalar + SampleScalar>(
    h: T,
    rho: T,
    grid: &GridSpec<T>,
    levels: &[usize],
    n_mc: usize,
    seed_root: u64,
) -> Result<ExperimentReport<T>> {
    if !(h.as_f64() > 1.0 / 3.0) {
        return Err(CoreError::InvalidHurst { h: h.as_f64(), lo: 1.0 / 3.0, hi: H_MAX });
    }
    if !(rho > T::zero() && rho < h) {
        return Err(CoreError::InvalidInput {
            reason: format!("holder exponent must satisfy 0 < rho < h, got rho = {rho}, h = {h}"),
        });
    }
    check_levels_ascending(levels)?;
    let finest = levels.last().expect("levels checked nonempty") + 1;
    let fine_cells = cells_of_level(finest)?;
    if fine_cells > grid.n_steps || grid.n_steps % fine_cells != 0 {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "grid with {} steps cannot resolve level {finest} (finest comparison level)",
                grid.n_steps
            ),
        });
    }
    if n_mc == 0 {
        return Err(CoreError::InvalidInput { reason: "n_mc must be at least 1".into() });
    }
    let synth = FbmSynth::new(h, grid)?;

    // Per replication and level: (d1, d2).
    let per_rep: Vec<Vec<(T, T)>> = (0..n_mc)
        .into_par_iter()
        .map(|r| -> Result<Vec<(T, T)>> {
            let da = sample_driver::<T>(seed_stream(seed_root, 2 * r as u64), grid);
            let db = sample_driver::<T>(seed_stream(seed_root, 2 * r as u64 + 1), grid);
            let pa = synth.synthesize_path(&da)?;
            let pb = synth.synthesize_path(&db)?;
            let mut out = Vec::with_capacity(levels.len());
            for &n in levels {
                let fine = RoughLevel::new(&[
                    dyadic_sample(grid, &pa, n + 1)?,
                    dyadic_sample(grid, &pb, n + 1)?,
                ])?;
                let coarse = RoughLevel::new(&[
                    dyadic_sample(grid, &pa, n)?.refine(n + 1)?,
                    dyadic_sample(grid, &pb, n)?.refine(n + 1)?,
                ])?;
                let dist = holder_distance(&coarse, &fine, rho)?;
                out.push((dist.d1, dist.d2));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport::new("levy-converge");
    let mut slope_points = Vec::with_capacity(levels.len());
    for (i, &n) in levels.iter().enumerate() {
        let d1s: Vec<T> = per_rep.iter().map(|r| r[i].0).collect();
        let d2s: Vec<T> = per_rep.iter().map(|r| r[i].1).collect();
        let (m1, se1) = mean_and_se(&d1s);
        let (m2, se2) = mean_and_se(&d2s);
        report.push_estimate(format!("d1_n{n}"), Some(h), None, m1, se1, n_mc);
        report.push_estimate(format!("d2_n{n}"), Some(h), None, m2, se2, n_mc);
        let spacing = grid.t_max / T::from_usize_c(1usize << n);
        if m2 > T::zero() {
            slope_points.push((spacing, m2));
        }
    }
    let ratios: Vec<T> = per_rep
        .iter()
        .flat_map(|r| {
            r.windows(2)
                .filter(|w| w[0].1 > T::zero())
                .map(|w| w[1].1 / w[0].1)
                .collect::<Vec<T>>()
        })
        .collect();
    let n_ratios = ratios.len();
    if let Some(med) = median(ratios) {
        report.push_estimate("median_d2_ratio", Some(h), None, med, None, n_ratios);
    }
    if let Ok(fit) = fit_loglog_slope(&slope_points) {
        report.push_slope("d2", &fit);
    }
    report.push_metadata("rho", format!("{}", rho.as_f64()));
    report.push_metadata("n_mc", n_mc.to_string());
    report.push_metadata("levels", format_levels(levels));
    Ok(report)
}

fn format_levels(levels: &[usize]) -> String {
    levels.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

/// Second component paired with the path in [`mixed_area_divergence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaPartner {
    /// The Hurst sensitivity `∂_H B^H` of the same driver (divergent case).
    Sensitivity,
    /// An independent copy of `B^H` from a second driver (convergent control).
    Independent,
}

impl AreaPartner {
    /// Stable lowercase label (used in CSV metadata).
    pub fn label(self) -> &'static str {
        match self {
            AreaPartner::Sensitivity => "sensitivity",
            AreaPartner::Independent => "independent-path",
        }
    }
}

/// Exact Gaussian moments of the off-diagonal sums: per level `(mean, second
/// moment)` of `S_n`, per consecutive pair `(mean, variance, second moment)`
/// of `D_n = S_{n+1} − S_n`.
struct ExactMoments<T> {
    s: Vec<(T, T)>,
    d: Vec<(T, T, T)>,
}

/// Off-diagonal trapezoid sums of one co-sampled pair across dyadic levels,
/// with exact second moments.
///
/// Per level `n` the statistic `S_n = ½ Σ_k (x_{t_k} + x_{t_{k−1}})·(y_{t_k} −
/// y_{t_{k−1}})` is formed over the `2^n` dyadic cells, where `y = B^H` and
/// `x` is chosen by `partner`.  `levels` must be consecutive (`n, n+1, ...`)
/// so the refinement contrasts `D_n = S_{n+1} − S_n` are defined.
///
/// Reports, per level: Monte Carlo `s_mean_n*`/`s_second_moment_n*`, the
/// worst diagonal-identity residue `diag_identity_gap_n*` (the `(y, y)` area
/// must equal `½(Δy)²` at every level), and exact `s_mean_exact_n*` /
/// `s_second_moment_exact_n*`; per contrast: Monte Carlo `d_mean_n*` /
/// `d_second_moment_n*` and exact `d_mean_exact_n*`, `d_var_exact_n*`,
/// `d_second_moment_exact_n*`.  Exact values come from the Gaussian
/// quadratic-form identity over the synthesized kernel weights: a lag-table
/// route at `h = 1/2` (any resolution) and a dense Gram route otherwise
/// (bounded resolution).
pub fn mixed_area_divergence<T: Scalar + SampleScalar>(
    h: T,
    grid: &GridSpec<T>,
    levels: &[usize],
    partner: AreaPartner,
    n_mc: usize,
    seed_root: u64,
) -> Result<ExperimentReport<T>> {
    check_levels_ascending(levels)?;
    if levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "refinement contrasts need consecutive dyadic levels, got {levels:?}"
            ),
        });
    }
    let last = *levels.last().expect("levels checked nonempty");
    let last_cells = cells_of_level(last)?;
    if last_cells > grid.n_steps || grid.n_steps % last_cells != 0 {
        return Err(CoreError::InvalidInput {
            reason: format!("grid with {} steps cannot resolve level {last}", grid.n_steps),
        });
    }
    if n_mc == 0 {
        return Err(CoreError::InvalidInput { reason: "n_mc must be at least 1".into() });
    }
    let synth = FbmSynth::new(h, grid)?;
    let exact = exact_moments(grid, h, partner, levels)?;

    // Per replication: S_n per level, then the per-level diagonal residue.
    let per_rep: Vec<(Vec<T>, Vec<T>)> = (0..n_mc)
        .into_par_iter()
        .map(|r| -> Result<(Vec<T>, Vec<T>)> {
            let da = sample_driver::<T>(seed_stream(seed_root, 2 * r as u64), grid);
            let (x, y) = match partner {
                AreaPartner::Sensitivity => {
                    let bundle = synth.synthesize(&da)?;
                    (bundle.sensitivity, bundle.path)
                }
                AreaPartner::Independent => {
                    let db = sample_driver::<T>(seed_stream(seed_root, 2 * r as u64 + 1), grid);
                    (synth.synthesize_path(&db)?, synth.synthesize_path(&da)?)
                }
            };
            let half = T::from_f64_c(0.5);
            let mut sums = Vec::with_capacity(levels.len());
            let mut diags = Vec::with_capacity(levels.len());
            for &n in levels {
                let stride = grid.n_steps / (1usize << n);
                let mut s = T::zero();
                for k in 1..=(1usize << n) {
                    let (i0, i1) = ((k - 1) * stride, k * stride);
                    s += half * (x[i1] + x[i0]) * (y[i1] - y[i0]);
                }
                sums.push(s);
                let yd = dyadic_sample(grid, &y, n)?;
                let total = levy_area(&yd, &yd, T::zero(), grid.t_max)?;
                let inc = y[grid.n_steps] - y[0];
                diags.push((total - half * inc * inc).abs());
            }
            Ok((sums, diags))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport::new("levy-diverge");
    for (i, &n) in levels.iter().enumerate() {
        let sums: Vec<T> = per_rep.iter().map(|r| r.0[i]).collect();
        let sq: Vec<T> = sums.iter().map(|&s| s * s).collect();
        let (ms, ses) = mean_and_se(&sums);
        let (mq, seq) = mean_and_se(&sq);
        report.push_estimate(format!("s_mean_n{n}"), Some(h), None, ms, ses, n_mc);
        report.push_estimate(format!("s_second_moment_n{n}"), Some(h), None, mq, seq, n_mc);
        let worst_diag = per_rep
            .iter()
            .map(|r| r.1[i])
            .fold(T::zero(), |acc, v| acc.max(v));
        report.push_estimate(format!("diag_identity_gap_n{n}"), Some(h), None, worst_diag, None, n_mc);
    }
    for (i, &n) in levels[..levels.len() - 1].iter().enumerate() {
        let ds: Vec<T> = per_rep.iter().map(|r| r.0[i + 1] - r.0[i]).collect();
        let sq: Vec<T> = ds.iter().map(|&d| d * d).collect();
        let (md, sed) = mean_and_se(&ds);
        let (mq, seq) = mean_and_se(&sq);
        report.push_estimate(format!("d_mean_n{n}"), Some(h), None, md, sed, n_mc);
        report.push_estimate(format!("d_second_moment_n{n}"), Some(h), None, mq, seq, n_mc);
    }
    for (i, &n) in levels.iter().enumerate() {
        let (mean, second) = exact.s[i];
        report.push_value(format!("s_mean_exact_n{n}"), Some(h), mean);
        report.push_value(format!("s_second_moment_exact_n{n}"), Some(h), second);
    }
    for (i, &n) in levels[..levels.len() - 1].iter().enumerate() {
        let (mean, var, second) = exact.d[i];
        report.push_value(format!("d_mean_exact_n{n}"), Some(h), mean);
        report.push_value(format!("d_var_exact_n{n}"), Some(h), var);
        report.push_value(format!("d_second_moment_exact_n{n}"), Some(h), second);
    }
    report.push_metadata("partner", partner.label());
    report.push_metadata(
        "exact_route",
        if is_half(h) { "half-lag" } else { "dense-gram" },
    );
    report.push_metadata("n_mc", n_mc.to_string());
    report.push_metadata("levels", format_levels(levels));
    Ok(report)
}

fn is_half<T: Scalar>(h: T) -> bool {
    (h.as_f64() - 0.5).abs() <= 1e-12
}

/// Dispatches the exact-moment computation to the fast lag-table route at
/// `h = 1/2` or the dense Gram route otherwise (with a work cap).
fn exact_moments<T: Scalar>(
    grid: &GridSpec<T>,
    h: T,
    partner: AreaPartner,
    levels: &[usize],
) -> Result<ExactMoments<T>> {
    if is_half(h) {
        return exact_moments_half(grid, h, partner, levels);
    }
    let last = *levels.last().expect("levels checked nonempty");
    let cells = match partner {
        AreaPartner::Sensitivity => grid.n_cells(),
        AreaPartner::Independent => 2 * grid.n_cells(),
    };
    let work = (1u128 << (2 * last)) * cells as u128;
    if work > 250_000_000 {
        return Err(CoreError::Unsupported {
            reason: format!(
                "exact second moments at h = {} use dense Gram matrices; \
                 4^level·cells = {work} exceeds the budget — coarsen the grid or use h = 1/2",
                h.as_f64()
            ),
        });
    }
    exact_moments_dense(grid, h, partner, levels)
}

/// Mean and variance of the Gaussian bilinear form `Σ_α s_α (f_α·z)(g_α·z)`
/// where `z` has independent `N(0, width_c)` entries.
///
/// With `M = Σ_α s_α f_α g_αᵀ` and `D = diag(widths)`: the mean is `tr(MD)`
/// and the variance `tr(MDMD) + tr(MDMᵀD)`, expanded over the Gram matrices
/// of the row vectors.
fn bilinear_moments<T: Scalar>(
    signs: &[T],
    f_rows: &[Vec<T>],
    g_rows: &[Vec<T>],
    widths: &[T],
) -> (T, T) {
    let n = signs.len();
    debug_assert!(f_rows.len() == n && g_rows.len() == n);
    let inner = |a: &[T], b: &[T]| -> T {
        a.iter()
            .zip(b)
            .zip(widths)
            .map(|((&x, &y), &w)| x * y * w)
            .sum()
    };
    let mut cross = vec![T::zero(); n * n];
    let mut ff = vec![T::zero(); n * n];
    let mut gg = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            cross[i * n + j] = inner(&f_rows[i], &g_rows[j]);
        }
        for j in i..n {
            let vf = inner(&f_rows[i], &f_rows[j]);
            let vg = inner(&g_rows[i], &g_rows[j]);
            ff[i * n + j] = vf;
            ff[j * n + i] = vf;
            gg[i * n + j] = vg;
            gg[j * n + i] = vg;
        }
    }
    let mut mean = T::zero();
    for i in 0..n {
        mean += signs[i] * cross[i * n + i];
    }
    let mut var = T::zero();
    for i in 0..n {
        for j in 0..n {
            var += signs[i]
                * signs[j]
                * (cross[i * n + j] * cross[j * n + i] + ff[i * n + j] * gg[i * n + j]);
        }
    }
    (mean, var)
}

/// Dense exact route: node weight rows from the kernel closed forms, segment
/// rows per level, and the bilinear-form moment identity.
fn exact_moments_dense<T: Scalar>(
    grid: &GridSpec<T>,
    h: T,
    partner: AreaPartner,
    levels: &[usize],
) -> Result<ExactMoments<T>> {
    let c = mvn_constant(h)?;
    let dc = mvn_constant_derivative(h)?;
    let last = *levels.last().expect("levels checked nonempty");
    let fine_cells = 1usize << last;
    let stride = grid.n_steps / fine_cells;
    let base_cells = grid.n_cells();

    let path_row = |node: usize| -> Vec<T> {
        let t = grid.node(node);
        (0..base_cells)
            .map(|k| {
                let (u, v) = grid.cell(k);
                c * cell_weight(h, t, u, v)
            })
            .collect()
    };
    let sens_row = |node: usize| -> Vec<T> {
        let t = grid.node(node);
        (0..base_cells)
            .map(|k| {
                let (u, v) = grid.cell(k);
                dc * cell_weight(h, t, u, v) + c * cell_dweight(h, t, u, v)
            })
            .collect()
    };
    // x and y rows per fine dyadic node; for the independent partner the cell
    // space is doubled so the two drivers stay uncorrelated.
    let mut widths: Vec<T> = (0..base_cells).map(|k| grid.cell_width(k)).collect();
    let mut x_rows = Vec::with_capacity(fine_cells + 1);
    let mut y_rows = Vec::with_capacity(fine_cells + 1);
    match partner {
        AreaPartner::Sensitivity => {
            for j in 0..=fine_cells {
                x_rows.push(sens_row(j * stride));
                y_rows.push(path_row(j * stride));
            }
        }
        AreaPartner::Independent => {
            widths.extend(widths.clone());
            for j in 0..=fine_cells {
                let p = path_row(j * stride);
                let mut y = p.clone();
                y.extend(std::iter::repeat(T::zero()).take(base_cells));
                let mut x = vec![T::zero(); base_cells];
                x.extend(p);
                x_rows.push(x);
                y_rows.push(y);
            }
        }
    }

    let half = T::from_f64_c(0.5);
    // Segment terms of S_n: averages of x against increments of y.
    let segment_terms = |n: usize| -> (Vec<T>, Vec<Vec<T>>, Vec<Vec<T>>) {
        let step = 1usize << (last - n);
        let m = 1usize << n;
        let mut signs = Vec::with_capacity(m);
        let mut fs = Vec::with_capacity(m);
        let mut gs = Vec::with_capacity(m);
        for k in 1..=m {
            let (i0, i1) = ((k - 1) * step, k * step);
            fs.push(
                x_rows[i1]
                    .iter()
                    .zip(&x_rows[i0])
                    .map(|(&a, &b)| half * (a + b))
                    .collect(),
            );
            gs.push(y_rows[i1].iter().zip(&y_rows[i0]).map(|(&a, &b)| a - b).collect());
            signs.push(T::one());
        }
        (signs, fs, gs)
    };

    let mut s = Vec::with_capacity(levels.len());
    let mut per_level = Vec::with_capacity(levels.len());
    for &n in levels {
        let (signs, fs, gs) = segment_terms(n);
        let (mean, var) = bilinear_moments(&signs, &fs, &gs, &widths);
        s.push((mean, var + mean * mean));
        per_level.push((signs, fs, gs));
    }
    let mut d = Vec::with_capacity(levels.len().saturating_sub(1));
    for i in 0..levels.len() - 1 {
        let (s1, f1, g1) = &per_level[i + 1];
        let (s0, f0, g0) = &per_level[i];
        let signs: Vec<T> = s1.iter().copied().chain(s0.iter().map(|&v| -v)).collect();
        let fs: Vec<Vec<T>> = f1.iter().chain(f0.iter()).cloned().collect();
        let gs: Vec<Vec<T>> = g1.iter().chain(g0.iter()).cloned().collect();
        let (mean, var) = bilinear_moments(&signs, &fs, &gs, &widths);
        d.push((mean, var, var + mean * mean));
    }
    Ok(ExactMoments { s, d })
}

/// Fast exact route at `h = 1/2`.
///
/// There the path weights are exact cell indicators, so all cross inner
/// products between sensitivity rows and path increments depend only on the
/// node lag; means and `tr(MDMD)` collapse to 1-D lag sums and only the
/// `tr(MDMᵀD)` term needs per-node self-products.  Validated against the
/// dense route to rounding (see tests).
fn exact_moments_half<T: Scalar>(
    grid: &GridSpec<T>,
    h: T,
    partner: AreaPartner,
    levels: &[usize],
) -> Result<ExactMoments<T>> {
    let c = mvn_constant(h)?;
    let dc = mvn_constant_derivative(h)?;
    let n_steps = grid.n_steps;
    let dt = grid.dt();
    let pdt = grid.past_dt();
    let quarter = T::from_f64_c(0.25);
    let half = T::from_f64_c(0.5);

    // Sensitivity node-row value at recent lag l ≥ 1 and its prefix sums.
    let mut glag = vec![T::zero(); n_steps + 1];
    let mut gp = vec![T::zero(); n_steps + 1];
    for l in 1..=n_steps {
        let x1 = grid.node(l);
        let x0 = grid.node(l - 1);
        let wr = (g_anti(h, x1) - g_anti(h, x0)) / dt;
        let dwr = (dg_anti(h, x1) - dg_anti(h, x0)) / dt;
        glag[l] = dc * wr + c * dwr;
        gp[l] = gp[l - 1] + glag[l];
    }
    let gp_at = |x: isize| -> T {
        if x <= 0 {
            T::zero()
        } else {
            debug_assert!(x as usize <= n_steps, "lag prefix query {x} out of range");
            gp[x as usize]
        }
    };

    // Sensitivity rows over the past cells at every needed node.
    let last = *levels.last().expect("levels checked nonempty");
    let fine_cells = 1usize << last;
    let stride_last = n_steps / fine_cells;
    let need_past = matches!(partner, AreaPartner::Sensitivity) && grid.n_past > 0;
    let past_rows: Vec<Vec<T>> = if need_past {
        (0..=fine_cells)
            .map(|j| {
                let t = grid.node(j * stride_last);
                (0..grid.n_past)
                    .map(|k| {
                        let (u, v) = grid.cell(k);
                        dc * cell_weight(h, t, u, v) + c * cell_dweight(h, t, u, v)
                    })
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    let past_row = |node: usize| -> &[T] { &past_rows[node / stride_last] };

    // ⟨row_J ± row_{J−sig}, same⟩_D over all cells, for the sensitivity side.
    let self_product = |node: usize, sig: usize, sum: bool| -> T {
        let mut rec = T::zero();
        for q in 0..node {
            let l1 = glag[node - q];
            let l0 = if node - q > sig { glag[node - q - sig] } else { T::zero() };
            let v = if sum { l1 + l0 } else { l1 - l0 };
            rec += v * v;
        }
        let mut acc = rec * dt;
        if need_past {
            let rp = past_row(node);
            let r0 = past_row(node - sig);
            let mut p = T::zero();
            for (a, b) in rp.iter().zip(r0) {
                let v = if sum { *a + *b } else { *a - *b };
                p += v * v;
            }
            acc += p * pdt;
        }
        acc
    };

    let mut s = Vec::with_capacity(levels.len());
    for &n in levels {
        let m = 1usize << n;
        let sig = n_steps / m;
        let spacing = grid.t_max / T::from_usize_c(m);
        match partner {
            AreaPartner::Sensitivity => {
                // pa(L) = ⟨e_k, a_{k+L}⟩_D, Toeplitz in the lag L.
                let pa = |l: isize| -> T {
                    let sig = sig as isize;
                    half * dt * (gp_at(sig * (l + 1)) - gp_at(sig * (l - 1)))
                };
                let mf = T::from_usize_c(m);
                let mean = mf * pa(0);
                let mut t1 = T::zero();
                for lag in -(m as isize - 1)..=(m as isize - 1) {
                    let count = T::from_usize_c(m - lag.unsigned_abs());
                    t1 += count * pa(lag) * pa(-lag);
                }
                let mut t2 = T::zero();
                for k in 1..=m {
                    t2 += quarter * self_product(k * sig, sig, true);
                }
                t2 *= spacing;
                let var = t1 + t2;
                s.push((mean, var + mean * mean));
            }
            AreaPartner::Independent => {
                // Independent x: mean 0 and only the x-variance term survives,
                // with Var(½(W_{t_k} + W_{t_{k−1}})) = (t_k + 3t_{k−1})/4.
                let mut t2 = T::zero();
                for k in 1..=m {
                    let t1k = grid.node(k * sig);
                    let t0k = grid.node((k - 1) * sig);
                    t2 += quarter * (t1k + T::from_f64_c(3.0) * t0k);
                }
                t2 *= spacing;
                s.push((T::zero(), t2));
            }
        }
    }

    let mut d = Vec::with_capacity(levels.len().saturating_sub(1));
    for &n in &levels[..levels.len() - 1] {
        let m = 1usize << n;
        let fine = 2 * m;
        let sigf = n_steps / fine;
        let spacing_f = grid.t_max / T::from_usize_c(fine);
        match partner {
            AreaPartner::Sensitivity => {
                let pt = |l: isize| -> T {
                    let sig = sigf as isize;
                    dt * (gp_at(sig * (l + 1)) - (gp_at(sig * l) + gp_at(sig * l))
                        + gp_at(sig * (l - 1)))
                };
                let mf = T::from_usize_c(m);
                let mean = half * mf * (pt(-1) - pt(1));
                let mut t1 = T::zero();
                for lag in -(m as isize - 1)..=(m as isize - 1) {
                    let count = T::from_usize_c(m - lag.unsigned_abs());
                    let l2 = 2 * lag;
                    t1 += count
                        * (pt(l2 - 1) * pt(-l2 - 1) - (pt(l2) + pt(l2)) * pt(-l2)
                            + pt(l2 + 1) * pt(-l2 + 1));
                }
                t1 *= quarter;
                let mut t2 = T::zero();
                for j in 1..=fine {
                    t2 += self_product(j * sigf, sigf, false);
                }
                t2 *= quarter * spacing_f;
                let var = t1 + t2;
                d.push((mean, var, var + mean * mean));
            }
            AreaPartner::Independent => {
                // ⟨dx_j, dx_j⟩ = Δ_f per fine cell: variance T²·2^{−n−3}.
                let var = quarter * spacing_f * spacing_f * T::from_usize_c(fine);
                d.push((T::zero(), var, var));
            }
        }
    }
    Ok(ExactMoments { s, d })
}

/// A bounded functional of the solved state path (row-major `nodes × d`).
pub type PathFunctional<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// The default bounded continuous functionals: `tanh` of the sup norm and
/// `tanh` of the (first component of the) terminal state.
pub fn default_continuity_functionals<T: Scalar>() -> Vec<(String, PathFunctional<T>)> {
    let sup: PathFunctional<T> = Arc::new(|states: &[T]| {
        states
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
            .tanh()
    });
    let terminal: PathFunctional<T> =
        Arc::new(|states: &[T]| states.last().copied().unwrap_or_else(T::zero).tanh());
    vec![("tanh_sup_norm".to_string(), sup), ("tanh_terminal".to_string(), terminal)]
}

fn check_h_third_half<T: Scalar>(h: T) -> Result<()> {
    let hf = h.as_f64();
    if hf > 1.0 / 3.0 && hf <= 0.5 {
        Ok(())
    } else {
        Err(CoreError::InvalidHurst { h: hf, lo: 1.0 / 3.0, hi: 0.5 })
    }
}

/// Law continuity in the Hurst parameter below the Young threshold.
///
/// All Hurst values (the reference `h0` and every entry of `h_list`) must lie
/// in `(1/3, 1/2]`, where pathwise solving requires an additive-noise (or
/// Doss–Sussmann) problem.  Per replication one shared driver feeds every `h`;
/// for each listed `h` and each bounded functional `φ` the paired discrepancy
/// `|φ(X^h) − φ(X^{h0})|` is reported as `<name>_gap` with `h_prime = h0` —
/// an upper bound on the corresponding law distance that vanishes as
/// `h → h0`.
pub fn law_continuity_check<T: Scalar + SampleScalar>(
    problem: &SdeProblem<T>,
    h0: T,
    h_list: &[T],
    grid: &GridSpec<T>,
    functionals: &[(String, PathFunctional<T>)],
    n_mc: usize,
    seed_root: u64,
) -> Result<ExperimentReport<T>> {
    if functionals.is_empty() {
        return Err(CoreError::InvalidInput { reason: "need at least one functional".into() });
    }
    if h_list.is_empty() {
        return Err(CoreError::InvalidInput { reason: "need at least one Hurst value".into() });
    }
    if n_mc == 0 {
        return Err(CoreError::InvalidInput { reason: "n_mc must be at least 1".into() });
    }
    if problem.noise_dim() != 1 {
        return Err(CoreError::Unsupported {
            reason: format!(
                "law continuity check drives one noise channel, got m = {}",
                problem.noise_dim()
            ),
        });
    }
    check_h_third_half(h0)?;
    for &h in h_list {
        check_h_third_half(h)?;
    }
    let mut all_h: Vec<T> = vec![h0];
    all_h.extend_from_slice(h_list);
    let scheme = choose_scheme(problem, &all_h)?;

    let mut distinct: Vec<T> = Vec::new();
    for &h in &all_h {
        if !distinct.contains(&h) {
            distinct.push(h);
        }
    }
    let synths = distinct
        .iter()
        .map(|&h| FbmSynth::new(h, grid))
        .collect::<Result<Vec<_>>>()?;
    let index_of = |h: T| distinct.iter().position(|&v| v == h).expect("h collected above");

    // Per replication: functional values per distinct h (row-major).
    let n_fun = functionals.len();
    let per_rep: Vec<Vec<T>> = (0..n_mc)
        .into_par_iter()
        .map(|r| -> Result<Vec<T>> {
            let driver = sample_driver::<T>(seed_stream(seed_root, r as u64), grid);
            let mut vals = Vec::with_capacity(distinct.len() * n_fun);
            for (&h, synth) in distinct.iter().zip(&synths) {
                let path = synth.synthesize_path(&driver)?;
                let bundle = FbmBundle {
                    h,
                    grid: *grid,
                    path,
                    sensitivity: Vec::new(),
                    driver_seed: driver.seed,
                };
                let solution = solve_with_scheme(problem, scheme, &bundle)?;
                for (_, phi) in functionals {
                    vals.push(phi(&solution.states));
                }
            }
            Ok(vals)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport::new("law-continuity");
    let i0 = index_of(h0);
    for &h in h_list {
        let ih = index_of(h);
        for (f, (name, _)) in functionals.iter().enumerate() {
            let gaps: Vec<T> = per_rep
                .iter()
                .map(|vals| (vals[ih * n_fun + f] - vals[i0 * n_fun + f]).abs())
                .collect();
            let (mean, se) = mean_and_se(&gaps);
            report.push_estimate(format!("{name}_gap"), Some(h), Some(h0), mean, se, n_mc);
        }
    }
    report.push_metadata("scheme", scheme.label());
    report.push_metadata("h0", format!("{}", h0.as_f64()));
    report.push_metadata("n_mc", n_mc.to_string());
    Ok(report)
}
