//! Hurst-sensitivity solvers: the explicit representations of `Y = ∂_H X^H`
//! and the Monte-Carlo Lipschitz estimate for `H ↦ E[φ(X^H_t)]`.
//!
//! All representation routes share one left-point exponential-factor step,
//!
//! `Y_{k+1} = exp(Jμ(X_k)Δ + Σ_l Jσ_l(X_k)ΔB^l_k) · (Y_k + σ(X_k)·Δ∂_HB_k)`,
//!
//! so that routes whose continuum forms coincide (constant `σ`, or vanishing
//! diffusion Jacobian) agree to rounding rather than merely to scheme order.

use rayon::prelude::*;

use super::solvers::{solve_additive_multi, solve_young_multi};
use super::{check_channels, check_state, Method, PathSolution, SdeProblem, SensitivitySolution};
use crate::driver::{sample_driver, seed_stream, DriverPath, SampleScalar};
use crate::error::{CoreError, Result};
use crate::fbm::{FbmBundle, FbmSynth};
use crate::grid::GridSpec;
use crate::linalg::{expm, mat_vec};
use crate::report::{mean_and_se, ExperimentReport};
use crate::scalar::Scalar;

/// Validates the solved path and driving bundles against each other and
/// requires sensitivity values on every channel.
fn check_sensitivity_inputs<'a, T: Scalar>(
    problem: &SdeProblem<T>,
    xs: &PathSolution<T>,
    bundles: &[&'a FbmBundle<T>],
) -> Result<(&'a GridSpec<T>, T)> {
    let (grid, h) = check_channels(problem, bundles)?;
    if xs.grid != *grid {
        return Err(CoreError::GridMismatch {
            reason: "solved path and driving bundles live on different grids".into(),
        });
    }
    if xs.d != problem.dim() {
        return Err(CoreError::GridMismatch {
            reason: format!(
                "solved path has dimension {} but the problem has {}",
                xs.d,
                problem.dim()
            ),
        });
    }
    for b in bundles {
        if b.sensitivity.len() != grid.n_nodes() {
            return Err(CoreError::InvalidInput {
                reason: "driving bundle lacks Hurst-sensitivity values".into(),
            });
        }
    }
    Ok((grid, h))
}

/// The shared exponential-factor march (general `d`, `m`).
fn exponential_march<T: Scalar>(
    problem: &SdeProblem<T>,
    xs: &PathSolution<T>,
    bundles: &[&FbmBundle<T>],
    with_sigma_jacobian: bool,
    method: Method,
) -> Result<SensitivitySolution<T>> {
    let (grid, h) = check_sensitivity_inputs(problem, xs, bundles)?;
    if !problem.has_mu_jacobian() {
        return Err(CoreError::Unsupported {
            reason: "sensitivity solvers require the drift Jacobian".into(),
        });
    }
    if with_sigma_jacobian && !problem.has_sigma_jacobian() {
        return Err(CoreError::Unsupported {
            reason: "variational sensitivity requires the diffusion Jacobian".into(),
        });
    }
    let (d, m) = (problem.dim(), problem.noise_dim());
    let n = grid.n_steps;
    let dt = grid.dt();
    let mut values = vec![T::zero(); (n + 1) * d];
    let mut y = vec![T::zero(); d];
    let mut a = vec![T::zero(); d * d];
    let mut jmu = vec![T::zero(); d * d];
    let mut jsigma = vec![T::zero(); d * m * d];
    let mut sigma = vec![T::zero(); d * m];
    let mut rhs = vec![T::zero(); d];
    for k in 0..n {
        let x = xs.state(k);
        problem.mu_jacobian_into(x, &mut jmu)?;
        for (ai, &ji) in a.iter_mut().zip(jmu.iter()) {
            *ai = ji * dt;
        }
        if with_sigma_jacobian {
            problem.sigma_jacobian_into(x, &mut jsigma)?;
            for (l, b) in bundles.iter().enumerate() {
                let db = b.path[k + 1] - b.path[k];
                for i in 0..d {
                    for j in 0..d {
                        a[i * d + j] += jsigma[(i * m + l) * d + j] * db;
                    }
                }
            }
        }
        problem.sigma_into(x, &mut sigma);
        for i in 0..d {
            let mut inj = T::zero();
            for (l, b) in bundles.iter().enumerate() {
                inj += sigma[i * m + l] * (b.sensitivity[k + 1] - b.sensitivity[k]);
            }
            rhs[i] = y[i] + inj;
        }
        y = mat_vec(&expm(&a, d), &rhs, d);
        check_state(&y, grid.node(k + 1))?;
        values[(k + 1) * d..(k + 2) * d].copy_from_slice(&y);
    }
    Ok(SensitivitySolution {
        h,
        grid: *grid,
        d,
        values,
        method,
    })
}

/// Exact additive-noise sensitivity
/// `Y_t = ∫_0^t exp(∫_s^t Jμ(X_τ)dτ)·Σ d(∂_H B_s)`, valid for every Hurst
/// value.  Requires constant `σ` and the drift Jacobian.
pub fn sensitivity_additive_multi<T: Scalar>(
    problem: &SdeProblem<T>,
    xs: &PathSolution<T>,
    bundles: &[&FbmBundle<T>],
) -> Result<SensitivitySolution<T>> {
    if !problem.is_sigma_constant() {
        return Err(CoreError::Unsupported {
            reason: "additive sensitivity requires constant diffusion".into(),
        });
    }
    exponential_march(problem, xs, bundles, false, Method::AdditiveExact)
}

/// Single-channel convenience wrapper for [`sensitivity_additive_multi`].
pub fn sensitivity_additive<T: Scalar>(
    problem: &SdeProblem<T>,
    xs: &PathSolution<T>,
    bundle: &FbmBundle<T>,
) -> Result<SensitivitySolution<T>> {
    sensitivity_additive_multi(problem, xs, &[bundle])
}

/// Scalar exponential representation
/// `Y_t = ∫_0^t exp(∫_s^t μ'(X)dτ + ∫_s^t σ'(X)dB)·σ(X_s) d(∂_H B_s)`.
///
/// Valid above `h = 1/2` only: combining the path with its own
/// Hurst derivative below that threshold requires second-level rough-path
/// data that dyadic approximations provably fail to deliver.
pub fn sensitivity_exponential_scalar<T: Scalar>(
    problem: &SdeProblem<T>,
    xs: &PathSolution<T>,
    bundle: &FbmBundle<T>,
) -> Result<SensitivitySolution<T>> {
    problem.expect_scalar()?;
    let (grid, h) = check_sensitivity_inputs(problem, xs, &[bundle])?;
    if h.as_f64() <= 0.5 {
        return Err(CoreError::Unsupported {
            reason: format!(
                "exponential sensitivity requires h > 1/2, got h = {}",
                h.as_f64()
            ),
        });
    }
    let n = grid.n_steps;
    let dt = grid.dt();
    let mut values = vec![T::zero(); n + 1];
    let mut y = T::zero();
    for k in 0..n {
        let x = xs.states[k];
        let db = bundle.path[k + 1] - bundle.path[k];
        let dg = bundle.sensitivity[k + 1] - bundle.sensitivity[k];
        let a = problem.mu1_deriv(x)? * dt + problem.sigma1_deriv(x)? * db;
        y = a.exp() * (y + problem.sigma1(x) * dg);
        check_state(&[y], grid.node(k + 1))?;
        values[k + 1] = y;
    }
    Ok(SensitivitySolution {
        h,
        grid: *grid,
        d: 1,
        values,
        method: Method::ExponentialRepresentation,
    })
}

/// Forward variational sensitivity (general `d`, `m`, `h > 1/2`):
/// `dY = Jμ(X)Y dt + Σ_l Jσ_l(X)Y dB^l + σ(X) d(∂_H B)`, marched with the
/// shared exponential-factor step.
pub fn sensitivity_variational_multi<T: Scalar>(
    problem: &SdeProblem<T>,
    xs: &PathSolution<T>,
    bundles: &[&FbmBundle<T>],
) -> Result<SensitivitySolution<T>> {
    let (_, h) = check_sensitivity_inputs(problem, xs, bundles)?;
    if h.as_f64() <= 0.5 {
        return Err(CoreError::Unsupported {
            reason: format!(
                "variational sensitivity requires h > 1/2, got h = {}",
                h.as_f64()
            ),
        });
    }
    exponential_march(problem, xs, bundles, true, Method::VariationalPhi)
}

/// Single-channel convenience wrapper for [`sensitivity_variational_multi`].
pub fn sensitivity_variational<T: Scalar>(
    problem: &SdeProblem<T>,
    xs: &PathSolution<T>,
    bundle: &FbmBundle<T>,
) -> Result<SensitivitySolution<T>> {
    sensitivity_variational_multi(problem, xs, &[bundle])
}

/// Central finite differences of the solved path in the Hurst parameter on a
/// shared driver: `Y ≈ (X^{h+δ} − X^{h−δ})/(2δ)`.
///
/// Constant-`σ` problems are solved by the additive reduction (any `h`);
/// state-dependent ones by the Young scheme, which needs `h − δ > 1/2`.
pub fn sensitivity_finite_difference<T: Scalar + SampleScalar>(
    problem: &SdeProblem<T>,
    drivers: &[&DriverPath<T>],
    h: T,
    delta: T,
) -> Result<SensitivitySolution<T>> {
    if drivers.len() != problem.noise_dim() {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "problem has {} noise channels but {} drivers were supplied",
                problem.noise_dim(),
                drivers.len()
            ),
        });
    }
    if !(delta > T::zero()) {
        return Err(CoreError::InvalidInput {
            reason: format!("finite-difference step must be positive, got {}", delta.as_f64()),
        });
    }
    let grid = &drivers[0].grid;
    for dr in &drivers[1..] {
        if dr.grid != *grid {
            return Err(CoreError::GridMismatch {
                reason: "drivers live on different grids".into(),
            });
        }
    }
    let additive = problem.is_sigma_constant();
    if !additive && (h - delta).as_f64() <= 0.5 {
        return Err(CoreError::Unsupported {
            reason: "state-dependent finite differences need h - delta > 1/2".into(),
        });
    }
    let solve_at = |hh: T| -> Result<PathSolution<T>> {
        let synth = FbmSynth::new(hh, grid)?;
        let bundles: Vec<FbmBundle<T>> = drivers
            .iter()
            .map(|dr| {
                Ok(FbmBundle {
                    h: hh,
                    grid: *grid,
                    path: synth.synthesize_path(dr)?,
                    sensitivity: Vec::new(),
                    driver_seed: dr.seed,
                })
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&FbmBundle<T>> = bundles.iter().collect();
        if additive {
            solve_additive_multi(problem, &refs)
        } else {
            solve_young_multi(problem, &refs)
        }
    };
    let plus = solve_at(h + delta)?;
    let minus = solve_at(h - delta)?;
    let scale = (delta + delta).recip();
    let values = plus
        .states
        .iter()
        .zip(&minus.states)
        .map(|(&p, &q)| (p - q) * scale)
        .collect();
    Ok(SensitivitySolution {
        h,
        grid: *grid,
        d: problem.dim(),
        values,
        method: Method::FiniteDifference,
    })
}

/// Monte-Carlo estimate of the Lipschitz quotients
/// `|E[φ(X^{H1}_t)] − E[φ(X^{H2}_t)]| / |H1 − H2|` on common drivers.
///
/// One driver per replication feeds every Hurst value, so each quotient is a
/// mean of per-path differences and its standard error reflects the coupled
/// variance.  The report carries one `mean_phi` row per distinct Hurst value
/// and one `lipschitz_ratio` row per pair.
pub fn estimate_law_lipschitz<T: Scalar + SampleScalar>(
    problem: &SdeProblem<T>,
    phi: impl Fn(T) -> T + Sync,
    h_pairs: &[(T, T)],
    grid: &GridSpec<T>,
    t: T,
    n_mc: usize,
    seed_root: u64,
) -> Result<ExperimentReport<T>> {
    problem.expect_scalar()?;
    if h_pairs.is_empty() || n_mc == 0 {
        return Err(CoreError::InvalidInput {
            reason: "law comparison needs at least one Hurst pair and one replication".into(),
        });
    }
    let node = grid.index_of(t)?;
    let mut h_values: Vec<T> = Vec::new();
    for &(h1, h2) in h_pairs {
        if h1 == h2 {
            return Err(CoreError::InvalidInput {
                reason: format!("degenerate Hurst pair ({}, {})", h1.as_f64(), h2.as_f64()),
            });
        }
        for h in [h1, h2] {
            if !h_values.contains(&h) {
                h_values.push(h);
            }
        }
    }
    let scheme = super::choose_scheme(problem, &h_values)?;
    let synths = h_values
        .iter()
        .map(|&h| FbmSynth::new(h, grid))
        .collect::<Result<Vec<_>>>()?;

    // φ(X^h_t) per replication and Hurst value, on one driver per replication.
    let samples: Vec<Vec<T>> = (0..n_mc)
        .into_par_iter()
        .map(|k| {
            let driver = sample_driver(seed_stream(seed_root, k as u64), grid);
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
                    let sol = super::solve_with_scheme(problem, scheme, &bundle)?;
                    Ok(phi(sol.states[node]))
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport::new("law-lipschitz");
    report.push_metadata("scheme", scheme.label());
    report.push_metadata("n_mc", format!("{n_mc}"));
    report.push_metadata("t", format!("{}", t.as_f64()));
    for (j, &h) in h_values.iter().enumerate() {
        let phis: Vec<T> = samples.iter().map(|row| row[j]).collect();
        let (mean, se) = mean_and_se(&phis);
        report.push_estimate("mean_phi", Some(h), None, mean, se, n_mc);
    }
    for &(h1, h2) in h_pairs {
        let j1 = h_values.iter().position(|&h| h == h1).expect("collected");
        let j2 = h_values.iter().position(|&h| h == h2).expect("collected");
        let diffs: Vec<T> = samples.iter().map(|row| row[j1] - row[j2]).collect();
        let (mean, se) = mean_and_se(&diffs);
        let gap = (h1 - h2).abs();
        report.push_estimate(
            "lipschitz_ratio",
            Some(h1),
            Some(h2),
            (mean / gap).abs(),
            se.map(|s| s / gap),
            n_mc,
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::flow::solve_doss_sussmann;
    use super::super::solvers::{solve_additive, solve_young};
    use super::*;
    use crate::fbm::synthesize_fbm;
    use crate::report::fit_loglog_slope;
    use approx::assert_abs_diff_eq;

    fn driftless_additive(x0: f64) -> SdeProblem<f64> {
        SdeProblem::new(
            1,
            1,
            vec![x0],
            |_x, out| out[0] = 0.0,
            |_x, out| out[0] = 1.0,
        )
        .unwrap()
        .with_mu_jacobian(|_x, out| out[0] = 0.0)
        .with_sigma_jacobian(|_x, out| out[0] = 0.0)
        .with_constant_sigma()
    }

    #[test]
    fn driftless_sensitivity_is_the_sensitivity_path_exactly() {
        let grid = GridSpec::new(1.0f64, 4.0, 64, 64).unwrap();
        let b = synthesize_fbm(&sample_driver(51, &grid), 0.6).unwrap();
        let p = driftless_additive(1.0);
        let xs = solve_additive(&p, &b).unwrap();
        let y = sensitivity_additive(&p, &xs, &b).unwrap();
        assert_eq!(y.method, Method::AdditiveExact);
        assert_abs_diff_eq!(y.values[0], 0.0, epsilon = 0.0);
        for k in 0..grid.n_nodes() {
            assert_abs_diff_eq!(y.values[k], b.sensitivity[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn additive_and_variational_routes_agree_on_ou() {
        let grid = GridSpec::new(1.0f64, 4.0, 128, 128).unwrap();
        let b = synthesize_fbm(&sample_driver(52, &grid), 0.7).unwrap();
        let p = SdeProblem::ou(1.0f64, 0.5);
        let xs = solve_additive(&p, &b).unwrap();
        let ya = sensitivity_additive(&p, &xs, &b).unwrap();
        let yv = sensitivity_variational(&p, &xs, &b).unwrap();
        for k in 0..grid.n_nodes() {
            assert!(
                (ya.values[k] - yv.values[k]).abs() < 1e-10,
                "routes disagree at node {k}: {} vs {}",
                ya.values[k],
                yv.values[k]
            );
        }
    }

    #[test]
    fn exponential_scalar_with_unit_sigma_matches_additive() {
        let grid = GridSpec::new(1.0f64, 4.0, 128, 128).unwrap();
        let b = synthesize_fbm(&sample_driver(53, &grid), 0.75).unwrap();
        let p = SdeProblem::sine_drift(0.2f64);
        let xs = solve_additive(&p, &b).unwrap();
        let ya = sensitivity_additive(&p, &xs, &b).unwrap();
        let ye = sensitivity_exponential_scalar(&p, &xs, &b).unwrap();
        for k in 0..grid.n_nodes() {
            assert_abs_diff_eq!(ye.values[k], ya.values[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn exponential_and_variational_agree_for_scalar_multiplicative() {
        let grid = GridSpec::new(1.0f64, 4.0, 256, 256).unwrap();
        let b = synthesize_fbm(&sample_driver(54, &grid), 0.8).unwrap();
        let p = SdeProblem::bounded_multiplicative(0.3f64);
        let xs = solve_young(&p, &b).unwrap();
        let ye = sensitivity_exponential_scalar(&p, &xs, &b).unwrap();
        let yv = sensitivity_variational(&p, &xs, &b).unwrap();
        for k in 0..grid.n_nodes() {
            assert!(
                (ye.values[k] - yv.values[k]).abs() < 1e-8,
                "node {k}: {} vs {}",
                ye.values[k],
                yv.values[k]
            );
        }
    }

    #[test]
    fn linear_sensitivity_approaches_beta_x_times_sensitivity() {
        // For dX = αXdt + βXdB the representation collapses to
        // Y_t = βX_t·∂_HB_t; the discrete march approaches it under
        // refinement.
        let grid = GridSpec::new(1.0f64, 8.0, 256, 256).unwrap();
        let b = synthesize_fbm(&sample_driver(55, &grid), 0.8).unwrap();
        let p = SdeProblem::linear(0.4f64, 0.5, 1.0);
        let mut errs = Vec::new();
        for factor in [4usize, 2, 1] {
            let rb = b.restrict(factor).unwrap();
            let xs = solve_young(&p, &rb).unwrap();
            let y = sensitivity_exponential_scalar(&p, &xs, &rb).unwrap();
            let err = (0..rb.grid.n_nodes())
                .map(|k| {
                    let x_exact = (0.4 * rb.grid.node(k) + 0.5 * rb.path[k]).exp();
                    (y.values[k] - 0.5 * x_exact * rb.sensitivity[k]).abs()
                })
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        assert!(
            errs.windows(2).all(|w| w[1] < w[0]),
            "sensitivity error must shrink under refinement: {errs:?}"
        );
    }

    #[test]
    fn variational_matches_additive_for_constant_sigma_system() {
        let grid = GridSpec::new(1.0f64, 4.0, 128, 128).unwrap();
        let b1 = synthesize_fbm(&sample_driver(61, &grid), 0.7).unwrap();
        let b2 = synthesize_fbm(&sample_driver(62, &grid), 0.7).unwrap();
        let p = SdeProblem::<f64>::new(
            2,
            2,
            vec![1.0, -0.5],
            |x, out| {
                out[0] = -x[0] + 0.3 * x[1];
                out[1] = 0.2 * x[0] - 0.8 * x[1];
            },
            |_x, out| {
                out.copy_from_slice(&[1.0, 0.5, 0.0, 2.0]);
            },
        )
        .unwrap()
        .with_mu_jacobian(|_x, out| out.copy_from_slice(&[-1.0, 0.3, 0.2, -0.8]))
        .with_sigma_jacobian(|_x, out| out.fill(0.0))
        .with_constant_sigma();
        let xs = solve_additive_multi(&p, &[&b1, &b2]).unwrap();
        let ya = sensitivity_additive_multi(&p, &xs, &[&b1, &b2]).unwrap();
        let yv = sensitivity_variational_multi(&p, &xs, &[&b1, &b2]).unwrap();
        for (u, v) in ya.values.iter().zip(&yv.values) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn finite_differences_converge_to_the_additive_representation() {
        let grid = GridSpec::new(1.0f64, 4.0, 512, 512).unwrap();
        let driver = sample_driver(63, &grid);
        let b = synthesize_fbm(&driver, 0.65).unwrap();
        let p = SdeProblem::ou(1.0f64, 0.5);
        let xs = solve_additive(&p, &b).unwrap();
        let y = sensitivity_additive(&p, &xs, &b).unwrap();
        let mut points = Vec::new();
        for &delta in &[0.08f64, 0.04, 0.02] {
            let fd = sensitivity_finite_difference(&p, &[&driver], 0.65, delta).unwrap();
            assert_eq!(fd.method, Method::FiniteDifference);
            let err = y
                .values
                .iter()
                .zip(&fd.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            points.push((delta, err));
        }
        let errs: Vec<f64> = points.iter().map(|p| p.1).collect();
        assert!(
            errs.windows(2).all(|w| w[1] < w[0]),
            "FD error must shrink with delta: {errs:?}"
        );
        let fit = fit_loglog_slope(&points).unwrap();
        assert!(
            (1.5..=2.6).contains(&fit.slope),
            "central differences should be near second order, slope {}",
            fit.slope
        );
    }

    #[test]
    fn finite_differences_validate_scalar_multiplicative_representation() {
        let grid = GridSpec::new(1.0f64, 4.0, 4096, 256).unwrap();
        let driver = sample_driver(64, &grid);
        let b = synthesize_fbm(&driver, 0.75).unwrap();
        let p = SdeProblem::bounded_multiplicative(0.3f64);
        let xs = solve_young(&p, &b).unwrap();
        let y = sensitivity_exponential_scalar(&p, &xs, &b).unwrap();
        let fd = sensitivity_finite_difference(&p, &[&driver], 0.75, 1e-3).unwrap();
        let scale = fd.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = y
            .values
            .iter()
            .zip(&fd.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(
            err < 0.05 * scale,
            "representation vs finite differences: sup error {err} vs scale {scale}"
        );
    }

    #[test]
    fn finite_differences_validate_coupled_variational_system() {
        let grid = GridSpec::new(1.0f64, 4.0, 256, 128).unwrap();
        let d1 = sample_driver(65, &grid);
        let d2 = sample_driver(66, &grid);
        let p = SdeProblem::<f64>::new(
            2,
            2,
            vec![0.5, -0.2],
            |x, out| {
                out[0] = -x[0] + 0.25 * x[1];
                out[1] = -0.75 * x[1] + 0.25 * x[0].sin();
            },
            |x, out| {
                out[0] = 1.0 + 0.25 / (1.0 + x[1] * x[1]);
                out[1] = 0.25;
                out[2] = 0.2;
                out[3] = 1.0 + 0.25 / (1.0 + x[0] * x[0]);
            },
        )
        .unwrap()
        .with_mu_jacobian(|x, out| {
            out.copy_from_slice(&[-1.0, 0.25, 0.25 * x[0].cos(), -0.75]);
        })
        .with_sigma_jacobian(|x, out| {
            out.fill(0.0);
            let dy = 1.0 + x[1] * x[1];
            out[1] = -0.5 * x[1] / (dy * dy); // ∂σ^{00}/∂x1
            let dx = 1.0 + x[0] * x[0];
            out[6] = -0.5 * x[0] / (dx * dx); // ∂σ^{11}/∂x0
        });
        let b1 = synthesize_fbm(&d1, 0.8).unwrap();
        let b2 = synthesize_fbm(&d2, 0.8).unwrap();
        let xs = solve_young_multi(&p, &[&b1, &b2]).unwrap();
        let y = sensitivity_variational_multi(&p, &xs, &[&b1, &b2]).unwrap();
        let fd = sensitivity_finite_difference(&p, &[&d1, &d2], 0.8, 1e-3).unwrap();
        let scale = fd.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = y
            .values
            .iter()
            .zip(&fd.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(
            err < 0.05 * scale,
            "coupled variational vs finite differences: sup error {err} vs scale {scale}"
        );
    }

    #[test]
    fn multiplicative_sensitivity_below_half_is_unsupported() {
        let grid = GridSpec::new(1.0f64, 4.0, 32, 32).unwrap();
        let b = synthesize_fbm(&sample_driver(67, &grid), 0.45).unwrap();
        let p = SdeProblem::bounded_multiplicative(0.0f64);
        let xs = solve_doss_sussmann(&p, &b).unwrap();
        assert!(matches!(
            sensitivity_exponential_scalar(&p, &xs, &b),
            Err(CoreError::Unsupported { .. })
        ));
        assert!(matches!(
            sensitivity_variational(&p, &xs, &b),
            Err(CoreError::Unsupported { .. })
        ));
    }

    #[test]
    fn law_lipschitz_of_constant_observable_is_zero() {
        let grid = GridSpec::new(1.0f64, 2.0, 32, 32).unwrap();
        let p = SdeProblem::ou(1.0f64, 0.0);
        let report =
            estimate_law_lipschitz(&p, |_x| 1.5f64, &[(0.6, 0.7)], &grid, 1.0, 8, 100).unwrap();
        let row = report.find("lipschitz_ratio").expect("ratio row");
        assert_abs_diff_eq!(row.value, 0.0, epsilon = 0.0);
        assert_eq!(row.h, Some(0.6));
        assert_eq!(row.h_prime, Some(0.7));
    }

    #[test]
    fn law_lipschitz_rejects_degenerate_input() {
        let grid = GridSpec::new(1.0f64, 2.0, 32, 32).unwrap();
        let p = SdeProblem::ou(1.0f64, 0.0);
        assert!(estimate_law_lipschitz(&p, |x| x, &[], &grid, 1.0, 8, 1).is_err());
        assert!(estimate_law_lipschitz(&p, |x| x, &[(0.6, 0.6)], &grid, 1.0, 8, 1).is_err());
        // t must be a node.
        assert!(estimate_law_lipschitz(&p, |x| x, &[(0.6, 0.7)], &grid, 0.013, 8, 1).is_err());
    }

    #[test]
    fn law_lipschitz_matches_the_linear_gaussian_moment() {
        // dX = αXdt + βXdB with X_t = x0·e^{αt+βB_t}, so
        // E[X_t] = x0·e^{αt + β²t^{2H}/2}.  With α=−0.5, β=0.3, x0=1, t=2:
        // (E[X]|_{H=0.65} − E[X]|_{H=0.55})/0.1 = 5.8600e−2.
        let grid = GridSpec::new(2.0f64, 32.0, 256, 256).unwrap();
        let p = SdeProblem::linear(-0.5f64, 0.3, 1.0);
        let report = estimate_law_lipschitz(
            &p,
            |x| x,
            &[(0.65, 0.55)],
            &grid,
            2.0,
            1500,
            777,
        )
        .unwrap();
        let mean_e = |h: f64| (-1.0 + 0.5 * 0.09 * 2.0f64.powf(2.0 * h)).exp();
        for row in report.rows.iter().filter(|r| r.statistic == "mean_phi") {
            let h = row.h.expect("mean rows carry h");
            let se = row.std_err.expect("monte-carlo rows carry std errors");
            assert!(
                (row.value - mean_e(h)).abs() < 4.0 * se + 5e-3,
                "E[X] at h = {h}: {} vs {}",
                row.value,
                mean_e(h)
            );
        }
        let row = report.find("lipschitz_ratio").expect("ratio row");
        let se = row.std_err.expect("ratio carries a std error");
        let oracle = (mean_e(0.65) - mean_e(0.55)) / 0.1;
        assert!(
            (row.value - oracle).abs() < 3.0 * se,
            "Lipschitz quotient {} vs analytic {} (se {})",
            row.value,
            oracle,
            se
        );
    }

    #[test]
    fn law_lipschitz_quotients_are_stable_across_gap_sizes() {
        let grid = GridSpec::new(2.0f64, 32.0, 128, 128).unwrap();
        let p = SdeProblem::linear(-0.5f64, 0.3, 1.0);
        let pairs = [(0.7, 0.6), (0.65, 0.6), (0.625, 0.6)];
        let report =
            estimate_law_lipschitz(&p, |x| x, &pairs, &grid, 2.0, 400, 778).unwrap();
        let ratios: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.statistic == "lipschitz_ratio")
            .map(|r| r.value)
            .collect();
        assert_eq!(ratios.len(), 3);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            hi <= 2.0 * lo,
            "quotients across shrinking gaps must sit in a factor-2 band: {ratios:?}"
        );
    }
}
