//! Doss–Sussmann machinery: the diffusion flow `h(α, β)`, the reduced drift
//! `f(x, y) = e^{−∫_0^y σ'(h(x,s))ds}·μ(h(x,y))`, and the composition solver
//! `X_t = h(D_t, g_t)` with `D' = f(D, g_t)`.

use super::quad::gl16;
use super::{check_channels, check_state, PathSolution, Scheme, SdeProblem};
use crate::error::{CoreError, Result};
use crate::fbm::FbmBundle;
use crate::scalar::Scalar;

/// Default flow substep for the standalone entry points.
const DEFAULT_SUBSTEP: f64 = 1.0 / 256.0;
/// Maximum quadrature panel length for the exponent `∫_0^y σ'(h)ds`.
const EXPONENT_PANEL: f64 = 0.5;

/// Integrates the autonomous flow `dh/ds = σ(h)` from `s = from` to
/// `s = to` (either direction) by RK4 with steps of size at most `substep`.
fn march_flow<T: Scalar>(
    sigma: impl Fn(T) -> T,
    y0: T,
    from: T,
    to: T,
    substep: T,
) -> Result<T> {
    let gap = to - from;
    let n = (gap.abs() / substep)
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let hs = gap / T::from_usize_c(n);
    let half = T::from_f64_c(0.5);
    let sixth = T::from_f64_c(1.0 / 6.0);
    let mut y = y0;
    for i in 0..n {
        let k1 = sigma(y);
        let k2 = sigma(y + half * hs * k1);
        let k3 = sigma(y + half * hs * k2);
        let k4 = sigma(y + hs * k3);
        y += hs * sixth * (k1 + k2 + k2 + k3 + k3 + k4);
        check_state(&[y], from + hs * T::from_usize_c(i + 1))?;
    }
    Ok(y)
}

fn check_substep<T: Scalar>(substep: T) -> Result<()> {
    if !(substep > T::zero()) || !substep.is_finite() {
        return Err(CoreError::InvalidInput {
            reason: format!("flow substep must be positive, got {}", substep.as_f64()),
        });
    }
    Ok(())
}

/// The flow `h(α, β)` of `∂h/∂β = σ(h)`, `h(α, 0) = α`, with an explicit RK4
/// substep.
pub fn ds_flow_with<T: Scalar>(
    sigma: impl Fn(T) -> T,
    alpha: T,
    beta: T,
    substep: T,
) -> Result<T> {
    check_substep(substep)?;
    march_flow(sigma, alpha, T::zero(), beta, substep)
}

/// The flow `h(α, β)` of `∂h/∂β = σ(h)`, `h(α, 0) = α`, at default accuracy.
pub fn ds_flow<T: Scalar>(sigma: impl Fn(T) -> T, alpha: T, beta: T) -> Result<T> {
    ds_flow_with(sigma, alpha, beta, T::from_f64_c(DEFAULT_SUBSTEP))
}

/// The Doss–Sussmann reduced drift
/// `f(x, y) = exp(−∫_0^y σ'(h(x,s))ds)·μ(h(x,y))`, with an explicit flow
/// substep.
///
/// The exponent is evaluated by Gauss–Legendre panels along the flow orbit,
/// marching `h(x, ·)` monotonically through the quadrature nodes so each node
/// costs only the march from its predecessor.
pub fn ds_reduced_drift_with<T: Scalar>(
    problem: &SdeProblem<T>,
    x: T,
    y: T,
    substep: T,
) -> Result<T> {
    problem.expect_scalar()?;
    if !problem.has_sigma_jacobian() {
        return Err(CoreError::Unsupported {
            reason: "reduced drift requires the diffusion derivative".into(),
        });
    }
    check_substep(substep)?;
    if y == T::zero() {
        return Ok(problem.mu1(x));
    }
    let sigma = |v: T| problem.sigma1(v);
    let mut nodes: Vec<(f64, f64)> = gl16().to_vec();
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    let panels = (y.abs().as_f64() / EXPONENT_PANEL).ceil().max(1.0) as usize;
    let half = T::from_f64_c(0.5);
    let jacobian = half * y / T::from_usize_c(panels);
    let mut exponent = T::zero();
    let mut cur_s = T::zero();
    let mut cur_h = x;
    for p in 0..panels {
        for &(xi, w) in &nodes {
            let s = y * (T::from_usize_c(p) + half * (T::from_f64_c(xi) + T::one()))
                / T::from_usize_c(panels);
            cur_h = march_flow(sigma, cur_h, cur_s, s, substep)?;
            cur_s = s;
            exponent += T::from_f64_c(w) * jacobian * problem.sigma1_deriv(cur_h)?;
        }
    }
    let h_y = march_flow(sigma, cur_h, cur_s, y, substep)?;
    Ok((-exponent).exp() * problem.mu1(h_y))
}

/// The Doss–Sussmann reduced drift at default accuracy.
pub fn ds_reduced_drift<T: Scalar>(problem: &SdeProblem<T>, x: T, y: T) -> Result<T> {
    ds_reduced_drift_with(problem, x, y, T::from_f64_c(DEFAULT_SUBSTEP))
}

/// Auxiliary output of the Doss–Sussmann solver: the smooth component `D` and
/// re-evaluators for the flow and reduced drift at the solver's accuracy.
#[derive(Clone)]
pub struct DossSussmannAux<T> {
    /// The ODE component `D` at the grid nodes (`X_k = h(D_k, g_k)`).
    pub d_path: Vec<T>,
    problem: SdeProblem<T>,
    substep: T,
}

impl<T: Scalar> std::fmt::Debug for DossSussmannAux<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DossSussmannAux")
            .field("nodes", &self.d_path.len())
            .field("substep", &self.substep)
            .finish()
    }
}

impl<T: Scalar> DossSussmannAux<T> {
    /// Evaluates the flow `h(α, β)` with the solver's substep.
    pub fn flow(&self, alpha: T, beta: T) -> Result<T> {
        ds_flow_with(|v| self.problem.sigma1(v), alpha, beta, self.substep)
    }

    /// Evaluates the reduced drift `f(x, y)` with the solver's substep.
    pub fn reduced_drift(&self, x: T, y: T) -> Result<T> {
        ds_reduced_drift_with(&self.problem, x, y, self.substep)
    }
}

/// Doss–Sussmann solver returning the path together with its smooth
/// component.
///
/// `D` is advanced by RK4 on `D' = f(D, g_t)` with the driving path linearly
/// interpolated at the half step, and the state is recovered as
/// `X_k = h(D_k, g_k)`.  Valid for every Hurst value; requires a scalar
/// problem with the diffusion derivative attached.
pub fn solve_doss_sussmann_with_aux<T: Scalar>(
    problem: &SdeProblem<T>,
    bundle: &FbmBundle<T>,
) -> Result<(PathSolution<T>, DossSussmannAux<T>)> {
    problem.expect_scalar()?;
    if !problem.has_sigma_jacobian() {
        return Err(CoreError::Unsupported {
            reason: "Doss-Sussmann solver requires the diffusion derivative".into(),
        });
    }
    let (grid, h) = check_channels(problem, &[bundle])?;
    let n = grid.n_steps;
    let dt = grid.dt();
    let substep = dt;
    let half = T::from_f64_c(0.5);
    let sixth = T::from_f64_c(1.0 / 6.0);
    let g = &bundle.path;
    let mut d_path = vec![T::zero(); n + 1];
    let mut states = vec![T::zero(); n + 1];
    d_path[0] = problem.x0()[0];
    states[0] = problem.x0()[0];
    for k in 0..n {
        let d0 = d_path[k];
        let gm = half * (g[k] + g[k + 1]);
        let k1 = ds_reduced_drift_with(problem, d0, g[k], substep)?;
        let k2 = ds_reduced_drift_with(problem, d0 + half * dt * k1, gm, substep)?;
        let k3 = ds_reduced_drift_with(problem, d0 + half * dt * k2, gm, substep)?;
        let k4 = ds_reduced_drift_with(problem, d0 + dt * k3, g[k + 1], substep)?;
        let d1 = d0 + dt * sixth * (k1 + k2 + k2 + k3 + k3 + k4);
        check_state(&[d1], grid.node(k + 1))?;
        d_path[k + 1] = d1;
        let x = ds_flow_with(|v| problem.sigma1(v), d1, g[k + 1], substep)?;
        check_state(&[x], grid.node(k + 1))?;
        states[k + 1] = x;
    }
    let solution = PathSolution {
        h,
        scheme: Scheme::DossSussmann,
        grid: *grid,
        d: 1,
        states,
    };
    let aux = DossSussmannAux {
        d_path,
        problem: problem.clone(),
        substep,
    };
    Ok((solution, aux))
}

/// Doss–Sussmann solver (path only); see [`solve_doss_sussmann_with_aux`].
pub fn solve_doss_sussmann<T: Scalar>(
    problem: &SdeProblem<T>,
    bundle: &FbmBundle<T>,
) -> Result<PathSolution<T>> {
    Ok(solve_doss_sussmann_with_aux(problem, bundle)?.0)
}

#[cfg(test)]
mod tests {
    use super::super::solvers::{solve_additive, solve_young};
    use super::*;
    use crate::driver::sample_driver;
    use crate::fbm::synthesize_fbm;
    use crate::grid::GridSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flow_of_linear_sigma_is_exponential() {
        let h = ds_flow(|x: f64| x, 1.3, 0.7).unwrap();
        assert!(
            (h - 1.3 * 0.7f64.exp()).abs() < 1e-8,
            "flow of sigma(x) = x: {h}"
        );
        let back = ds_flow(|x: f64| x, h, -0.7).unwrap();
        assert!((back - 1.3).abs() < 1e-8, "reverse flow: {back}");
    }

    #[test]
    fn flow_of_unit_sigma_is_translation() {
        let h = ds_flow(|_x: f64| 1.0, 0.4, 2.3).unwrap();
        assert_abs_diff_eq!(h, 2.7, epsilon = 1e-13);
        let h = ds_flow(|_x: f64| 1.0, 0.4, -1.5).unwrap();
        assert_abs_diff_eq!(h, -1.1, epsilon = 1e-13);
    }

    #[test]
    fn flow_satisfies_the_group_property() {
        let sigma = |x: f64| 1.0 + 1.0 / (1.0 + x * x);
        let two_legs =
            ds_flow(sigma, ds_flow(sigma, 0.4, 0.8).unwrap(), -0.3).unwrap();
        let one_leg = ds_flow(sigma, 0.4, 0.5).unwrap();
        assert!(
            (two_legs - one_leg).abs() < 1e-7,
            "group property violated: {two_legs} vs {one_leg}"
        );
    }

    #[test]
    fn reduced_drift_with_unit_sigma_is_shifted_drift() {
        let p = SdeProblem::sine_drift(0.0f64);
        for &(x, y) in &[(0.3, 0.9), (-1.2, -0.4), (2.0, 0.0)] {
            let f = ds_reduced_drift(&p, x, y).unwrap();
            assert_abs_diff_eq!(f, p.mu1(x + y), epsilon = 1e-10);
        }
    }

    #[test]
    fn reduced_drift_vanishes_with_the_drift() {
        let p = SdeProblem::<f64>::new(
            1,
            1,
            vec![0.0],
            |_x, out| out[0] = 0.0,
            |x, out| out[0] = 1.0 + (1.0 + x[0] * x[0]).recip(),
        )
        .unwrap()
        .with_sigma_jacobian(|x, out| {
            let denom = 1.0 + x[0] * x[0];
            out[0] = -2.0 * x[0] / (denom * denom);
        });
        for &(x, y) in &[(0.3, 0.9), (-1.2, -0.4)] {
            assert_abs_diff_eq!(ds_reduced_drift(&p, x, y).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn reduced_drift_of_linear_problem_is_alpha_x() {
        // mu = αx, sigma = βx gives h(x,y) = x e^{βy} and exponent βy, so
        // f(x, y) = αx independently of y.
        let p = SdeProblem::linear(-0.3f64, 0.5, 1.0);
        for &(x, y) in &[(1.7, 0.9), (0.4, -1.3), (-2.0, 2.0)] {
            let f = ds_reduced_drift(&p, x, y).unwrap();
            assert!(
                (f - (-0.3) * x).abs() < 1e-8,
                "linear reduced drift at ({x}, {y}): {f}"
            );
        }
    }

    #[test]
    fn reduced_drift_requires_scalar_problem_and_jacobian() {
        let p = SdeProblem::<f64>::new(
            1,
            1,
            vec![0.0],
            |_x, out| out[0] = 0.0,
            |_x, out| out[0] = 1.0,
        )
        .unwrap();
        assert!(matches!(
            ds_reduced_drift(&p, 0.0, 1.0),
            Err(CoreError::Unsupported { .. })
        ));
        let p2 = SdeProblem::<f64>::new(
            2,
            2,
            vec![0.0, 0.0],
            |_x, out| out.fill(0.0),
            |_x, out| out.fill(0.0),
        )
        .unwrap();
        assert!(ds_reduced_drift(&p2, 0.0, 1.0).is_err());
    }

    #[test]
    fn doss_sussmann_reproduces_the_linear_closed_form() {
        let grid = GridSpec::new(1.0f64, 4.0, 512, 512).unwrap();
        let b = synthesize_fbm(&sample_driver(41, &grid), 0.75).unwrap();
        let p = SdeProblem::linear(-0.4f64, 0.6, 1.2);
        let sol = solve_doss_sussmann(&p, &b).unwrap();
        let mut worst = 0.0f64;
        for (k, &x) in sol.states.iter().enumerate() {
            let exact = 1.2 * (-0.4 * grid.node(k) + 0.6 * b.path[k]).exp();
            worst = worst.max((x - exact).abs());
        }
        assert!(
            worst < 1e-6,
            "linear Doss-Sussmann solution max error {worst}"
        );
    }

    #[test]
    fn doss_sussmann_without_noise_matches_the_additive_reduction() {
        let grid = GridSpec::without_past(1.0f64, 128).unwrap();
        let b = FbmBundle {
            h: 0.75,
            grid,
            path: vec![0.0; grid.n_nodes()],
            sensitivity: vec![0.0; grid.n_nodes()],
            driver_seed: 0,
        };
        let p = SdeProblem::sine_drift(1.0f64);
        let ds = solve_doss_sussmann(&p, &b).unwrap();
        let add = solve_additive(&p, &b).unwrap();
        for k in 0..grid.n_nodes() {
            assert_abs_diff_eq!(ds.states[k], add.states[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn doss_sussmann_and_young_euler_converge_together_above_half() {
        let grid = GridSpec::new(1.0f64, 8.0, 1024, 1024).unwrap();
        let b = synthesize_fbm(&sample_driver(42, &grid), 0.7).unwrap();
        let p = SdeProblem::bounded_multiplicative(0.2f64);
        let mut gaps = Vec::new();
        for factor in [32usize, 16, 8, 4, 2, 1] {
            let rb = b.restrict(factor).unwrap();
            let ds = solve_doss_sussmann(&p, &rb).unwrap();
            let ye = solve_young(&p, &rb).unwrap();
            let gap = ds
                .states
                .iter()
                .zip(&ye.states)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0f64, f64::max);
            gaps.push(gap);
        }
        // The asymptotic gap rate is the Young scheme's 2h−1 = 0.4, so a
        // pre-asymptotic rung may be nearly flat; demand decay with lag two
        // and an overall halving across the ladder.
        assert!(
            (2..gaps.len()).all(|i| gaps[i] < gaps[i - 2]),
            "Doss-Sussmann / Young gap must shrink: {gaps:?}"
        );
        assert!(
            *gaps.last().unwrap() < 0.5 * gaps[0],
            "refining 32x should at least halve the gap: {gaps:?}"
        );
    }

    #[test]
    fn doss_sussmann_aux_exposes_consistent_components() {
        let grid = GridSpec::new(0.5f64, 2.0, 64, 64).unwrap();
        let b = synthesize_fbm(&sample_driver(43, &grid), 0.6).unwrap();
        let p = SdeProblem::bounded_multiplicative(0.1f64);
        let (sol, aux) = solve_doss_sussmann_with_aux(&p, &b).unwrap();
        assert_eq!(aux.d_path.len(), grid.n_nodes());
        assert_abs_diff_eq!(aux.d_path[0], 0.1, epsilon = 0.0);
        // X_k must be the flow of D_k through g_k.
        for k in [10usize, 32, 64] {
            let x = aux.flow(aux.d_path[k], b.path[k]).unwrap();
            assert_abs_diff_eq!(x, sol.states[k], epsilon = 1e-12);
        }
        // The reduced drift honors the solver's substep.
        let f = aux.reduced_drift(0.1, 0.3).unwrap();
        let direct = ds_reduced_drift_with(&p, 0.1, 0.3, grid.dt()).unwrap();
        assert_abs_diff_eq!(f, direct, epsilon = 0.0);
    }
}
