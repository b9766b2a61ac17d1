//! Pathwise SDE solvers and Hurst-sensitivity solvers.
//!
//! The equation `dX = μ(X)dt + σ(X)dB^H` is solved pathwise: for constant `σ`
//! the substitution `z = x − Σ·g` reduces it to an ODE ([`solve_additive`]);
//! for scalar multiplicative noise the Doss–Sussmann composition
//! `X_t = h(D(t), g_t)` applies for every `H` ([`solve_doss_sussmann`]); for
//! `H > 1/2` a left-point Euler scheme integrates in the Young sense
//! ([`solve_young`]).  The Lamperti map `F(x) = ∫_0^x dy/σ(y)` converts
//! bounded-positive-`σ` problems into additive ones ([`lamperti`]).
//!
//! The derivative `Y = ∂_H X^H` is computed from explicit representations —
//! exact for additive noise, exponential for scalar noise above `1/2`, and
//! the forward variational system in general — all sharing one left-point
//! exponential-factor step so that the routes agree to rounding where their
//! continuum forms coincide.

mod flow;
mod quad;
mod sensitivity;
mod solvers;

pub use flow::{
    ds_flow, ds_flow_with, ds_reduced_drift, ds_reduced_drift_with, solve_doss_sussmann,
    solve_doss_sussmann_with_aux, DossSussmannAux,
};
pub use sensitivity::{
    estimate_law_lipschitz, sensitivity_additive, sensitivity_additive_multi,
    sensitivity_exponential_scalar, sensitivity_finite_difference, sensitivity_variational,
    sensitivity_variational_multi,
};
pub use solvers::{
    lamperti, solve_additive, solve_additive_multi, solve_young, solve_young_multi,
    young_integral, LampertiPair,
};

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::fbm::FbmBundle;
use crate::grid::GridSpec;
use crate::scalar::Scalar;

/// A vector field evaluated into a caller-provided buffer.
pub type Field<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Magnitude beyond which a solution is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// An SDE `dX = μ(X)dt + σ(X)dB` with state dimension `d` and noise
/// dimension `m`.
///
/// Coefficients are supplied as closures writing row-major buffers: `μ` fills
/// `d` entries, `σ` fills `d×m` entries (`out[i·m+l] = σ^{il}`).  Jacobians are
/// optional and analytic: the drift Jacobian fills `d×d` (`out[i·d+k] =
/// ∂_k μ^i`), the diffusion one fills `d×m×d` (`out[(i·m+l)·d+k] =
/// ∂_k σ^{il}`).  Sensitivity solvers and the Doss–Sussmann machinery require
/// the corresponding Jacobian and fail cleanly without it.
#[derive(Clone)]
pub struct SdeProblem<T> {
    d: usize,
    m: usize,
    x0: Vec<T>,
    mu: Field<T>,
    sigma: Field<T>,
    mu_jac: Option<Field<T>>,
    sigma_jac: Option<Field<T>>,
    sigma_constant: bool,
}

impl<T: Scalar> std::fmt::Debug for SdeProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeProblem")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("x0", &self.x0)
            .field("mu_jac", &self.mu_jac.is_some())
            .field("sigma_jac", &self.sigma_jac.is_some())
            .field("sigma_constant", &self.sigma_constant)
            .finish()
    }
}

impl<T: Scalar> SdeProblem<T> {
    /// Builds a problem from its dimensions, initial state, and coefficient
    /// fields.
    pub fn new(
        d: usize,
        m: usize,
        x0: Vec<T>,
        mu: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        sigma: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(CoreError::InvalidInput {
                reason: "state and noise dimensions must be at least 1".into(),
            });
        }
        if x0.len() != d || x0.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidInput {
                reason: format!("initial state must be {d} finite entries"),
            });
        }
        Ok(Self {
            d,
            m,
            x0,
            mu: Arc::new(mu),
            sigma: Arc::new(sigma),
            mu_jac: None,
            sigma_jac: None,
            sigma_constant: false,
        })
    }

    /// Attaches the analytic drift Jacobian (`d×d`, row-major).
    pub fn with_mu_jacobian(
        mut self,
        jac: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        self.mu_jac = Some(Arc::new(jac));
        self
    }

    /// Attaches the analytic diffusion Jacobian (`d×m×d`, row-major).
    pub fn with_sigma_jacobian(
        mut self,
        jac: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        self.sigma_jac = Some(Arc::new(jac));
        self
    }

    /// Declares `σ` state-independent, enabling the additive-reduction solver
    /// and the exact additive sensitivity representation.
    pub fn with_constant_sigma(mut self) -> Self {
        self.sigma_constant = true;
        self
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Noise dimension.
    pub fn noise_dim(&self) -> usize {
        self.m
    }

    /// Initial state.
    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    /// Whether `σ` was declared constant.
    pub fn is_sigma_constant(&self) -> bool {
        self.sigma_constant
    }

    /// Whether the drift Jacobian is available.
    pub fn has_mu_jacobian(&self) -> bool {
        self.mu_jac.is_some()
    }

    /// Whether the diffusion Jacobian is available.
    pub fn has_sigma_jacobian(&self) -> bool {
        self.sigma_jac.is_some()
    }

    /// Evaluates the drift into `out` (`d` entries).
    pub fn mu_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(out.len(), self.d);
        (self.mu)(x, out);
    }

    /// Evaluates the diffusion into `out` (`d×m` entries, row-major).
    pub fn sigma_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(out.len(), self.d * self.m);
        (self.sigma)(x, out);
    }

    /// Evaluates the drift Jacobian into `out` (`d×d`), failing if absent.
    pub fn mu_jacobian_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        let jac = self.mu_jac.as_ref().ok_or_else(|| CoreError::Unsupported {
            reason: "drift Jacobian not supplied".into(),
        })?;
        debug_assert_eq!(out.len(), self.d * self.d);
        jac(x, out);
        Ok(())
    }

    /// Evaluates the diffusion Jacobian into `out` (`d×m×d`), failing if
    /// absent.
    pub fn sigma_jacobian_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        let jac = self.sigma_jac.as_ref().ok_or_else(|| CoreError::Unsupported {
            reason: "diffusion Jacobian not supplied".into(),
        })?;
        debug_assert_eq!(out.len(), self.d * self.m * self.d);
        jac(x, out);
        Ok(())
    }

    /// The constant diffusion matrix (`d×m`), evaluated at `x0`; fails if the
    /// problem was not declared constant-`σ`.
    pub fn constant_sigma(&self) -> Result<Vec<T>> {
        if !self.sigma_constant {
            return Err(CoreError::Unsupported {
                reason: "diffusion is not declared constant".into(),
            });
        }
        let mut out = vec![T::zero(); self.d * self.m];
        self.sigma_into(&self.x0.clone(), &mut out);
        Ok(out)
    }

    /// Errors unless the problem is scalar (`d = m = 1`).
    pub fn expect_scalar(&self) -> Result<()> {
        if self.d != 1 || self.m != 1 {
            return Err(CoreError::Unsupported {
                reason: format!("operation requires d = m = 1, got d = {}, m = {}", self.d, self.m),
            });
        }
        Ok(())
    }

    /// Scalar drift `μ(x)` (requires `d = m = 1`).
    pub fn mu1(&self, x: T) -> T {
        let mut out = [T::zero()];
        (self.mu)(&[x], &mut out);
        out[0]
    }

    /// Scalar diffusion `σ(x)` (requires `d = m = 1`).
    pub fn sigma1(&self, x: T) -> T {
        let mut out = [T::zero()];
        (self.sigma)(&[x], &mut out);
        out[0]
    }

    /// Scalar drift derivative `μ'(x)`.
    pub fn mu1_deriv(&self, x: T) -> Result<T> {
        let mut out = [T::zero()];
        self.mu_jacobian_into(&[x], &mut out)?;
        Ok(out[0])
    }

    /// Scalar diffusion derivative `σ'(x)`.
    pub fn sigma1_deriv(&self, x: T) -> Result<T> {
        let mut out = [T::zero()];
        self.sigma_jacobian_into(&[x], &mut out)?;
        Ok(out[0])
    }

    /// Linear scalar SDE `dX = αX dt + βX dB` with closed-form solution
    /// `x0·exp(αt + βB_t)`.
    pub fn linear(alpha: T, beta: T, x0: T) -> Self {
        Self::new(
            1,
            1,
            vec![x0],
            move |x: &[T], out: &mut [T]| out[0] = alpha * x[0],
            move |x: &[T], out: &mut [T]| out[0] = beta * x[0],
        )
        .expect("valid scalar problem")
        .with_mu_jacobian(move |_x: &[T], out: &mut [T]| out[0] = alpha)
        .with_sigma_jacobian(move |_x: &[T], out: &mut [T]| out[0] = beta)
    }

    /// Ornstein–Uhlenbeck problem `dX = −κX dt + dB` (additive noise).
    pub fn ou(kappa: T, x0: T) -> Self {
        Self::new(
            1,
            1,
            vec![x0],
            move |x: &[T], out: &mut [T]| out[0] = -kappa * x[0],
            |_x: &[T], out: &mut [T]| out[0] = T::one(),
        )
        .expect("valid scalar problem")
        .with_mu_jacobian(move |_x: &[T], out: &mut [T]| out[0] = -kappa)
        .with_sigma_jacobian(|_x: &[T], out: &mut [T]| out[0] = T::zero())
        .with_constant_sigma()
    }

    /// Dissipative non-linear drift `μ(x) = −x + sin x` with unit additive
    /// noise.
    pub fn sine_drift(x0: T) -> Self {
        Self::new(
            1,
            1,
            vec![x0],
            |x: &[T], out: &mut [T]| out[0] = -x[0] + x[0].sin(),
            |_x: &[T], out: &mut [T]| out[0] = T::one(),
        )
        .expect("valid scalar problem")
        .with_mu_jacobian(|x: &[T], out: &mut [T]| out[0] = -T::one() + x[0].cos())
        .with_sigma_jacobian(|_x: &[T], out: &mut [T]| out[0] = T::zero())
        .with_constant_sigma()
    }

    /// Bounded multiplicative problem: `μ(x) = sin x`, `σ(x) = 1 + 1/(1+x²)`.
    ///
    /// Both coefficients are smooth with bounded derivatives and
    /// `σ ∈ [1, 2]`, so every solver and the Lamperti transform apply.
    pub fn bounded_multiplicative(x0: T) -> Self {
        Self::new(
            1,
            1,
            vec![x0],
            |x: &[T], out: &mut [T]| out[0] = x[0].sin(),
            |x: &[T], out: &mut [T]| out[0] = T::one() + (T::one() + x[0] * x[0]).recip(),
        )
        .expect("valid scalar problem")
        .with_mu_jacobian(|x: &[T], out: &mut [T]| out[0] = x[0].cos())
        .with_sigma_jacobian(|x: &[T], out: &mut [T]| {
            let denom = T::one() + x[0] * x[0];
            out[0] = -(x[0] + x[0]) / (denom * denom);
        })
    }
}

/// Scheme used to produce a [`PathSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// ODE reduction `z = x − Σg` for constant diffusion, RK4.
    AdditiveReduction,
    /// Doss–Sussmann composition `X = h(D(t), g_t)`.
    DossSussmann,
    /// Left-point Euler in the Young sense (`H > 1/2`).
    YoungEuler,
}

impl Scheme {
    /// Stable lowercase label (used in CSV metadata).
    pub fn label(self) -> &'static str {
        match self {
            Scheme::AdditiveReduction => "additive-reduction",
            Scheme::DossSussmann => "doss-sussmann",
            Scheme::YoungEuler => "young-euler",
        }
    }
}

/// Method used to produce a [`SensitivitySolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact additive-noise representation (integrating factor of `μ'`).
    AdditiveExact,
    /// Scalar exponential representation with the `∫σ'dB` factor.
    ExponentialRepresentation,
    /// Forward variational system (general `d`, `m`).
    VariationalPhi,
    /// Central finite differences on a shared driver.
    FiniteDifference,
}

impl Method {
    /// Stable lowercase label (used in CSV metadata).
    pub fn label(self) -> &'static str {
        match self {
            Method::AdditiveExact => "additive-exact",
            Method::ExponentialRepresentation => "exponential-representation",
            Method::VariationalPhi => "variational-phi",
            Method::FiniteDifference => "finite-difference",
        }
    }
}

/// A solved path `X` at the grid nodes.
#[derive(Debug, Clone)]
pub struct PathSolution<T> {
    /// Hurst parameter of the driving path.
    pub h: T,
    /// Scheme that produced the states.
    pub scheme: Scheme,
    /// Grid the states live on.
    pub grid: GridSpec<T>,
    /// State dimension.
    pub d: usize,
    /// Row-major `n_nodes × d` states; `states[0..d] = x0`.
    pub states: Vec<T>,
}

impl<T: Scalar> PathSolution<T> {
    /// State vector at node `k`.
    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.d..(k + 1) * self.d]
    }

    /// Scalar state path (requires `d = 1`).
    pub fn scalar_path(&self) -> Result<&[T]> {
        if self.d != 1 {
            return Err(CoreError::Unsupported {
                reason: format!("scalar path requested from a d = {} solution", self.d),
            });
        }
        Ok(&self.states)
    }

    /// Terminal state.
    pub fn terminal(&self) -> &[T] {
        self.state(self.grid.n_steps)
    }
}

/// The Hurst derivative `Y = ∂_H X^H` at the grid nodes.
#[derive(Debug, Clone)]
pub struct SensitivitySolution<T> {
    /// Hurst parameter of the driving path.
    pub h: T,
    /// Grid the values live on.
    pub grid: GridSpec<T>,
    /// State dimension.
    pub d: usize,
    /// Row-major `n_nodes × d` values; `values[0..d] = 0`.
    pub values: Vec<T>,
    /// Method that produced the values.
    pub method: Method,
}

impl<T: Scalar> SensitivitySolution<T> {
    /// Sensitivity vector at node `k`.
    pub fn value(&self, k: usize) -> &[T] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    /// Scalar sensitivity path (requires `d = 1`).
    pub fn scalar_values(&self) -> Result<&[T]> {
        if self.d != 1 {
            return Err(CoreError::Unsupported {
                reason: format!("scalar values requested from a d = {} solution", self.d),
            });
        }
        Ok(&self.values)
    }
}

/// Validates that the bundles form an `m`-channel driver on one grid with one
/// Hurst value, returning `(grid, h)`.
fn check_channels<'a, T: Scalar>(
    problem: &SdeProblem<T>,
    bundles: &[&'a FbmBundle<T>],
) -> Result<(&'a GridSpec<T>, T)> {
    if bundles.len() != problem.m {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "problem has {} noise channels but {} driving paths were supplied",
                problem.m,
                bundles.len()
            ),
        });
    }
    let first = bundles[0];
    for b in &bundles[1..] {
        if b.grid != first.grid {
            return Err(CoreError::GridMismatch {
                reason: "driving channels live on different grids".into(),
            });
        }
        if b.h != first.h {
            return Err(CoreError::GridMismatch {
                reason: format!(
                    "driving channels have different Hurst values ({} vs {})",
                    b.h.as_f64(),
                    first.h.as_f64()
                ),
            });
        }
    }
    for b in bundles {
        if b.path.len() != first.grid.n_nodes() {
            return Err(CoreError::GridMismatch {
                reason: "driving path length does not match its grid".into(),
            });
        }
    }
    Ok((&first.grid, first.h))
}

/// Divergence guard: all entries finite and below the threshold.
pub(crate) fn check_state<T: Scalar>(x: &[T], t: T) -> Result<()> {
    let threshold = T::from_f64_c(DIVERGENCE_THRESHOLD);
    for &v in x {
        if !v.is_finite() || v.abs() > threshold {
            return Err(CoreError::Diverged {
                t: t.as_f64(),
                magnitude: v.as_f64(),
                threshold: DIVERGENCE_THRESHOLD,
            });
        }
    }
    Ok(())
}

/// Picks the pathwise scheme usable for a scalar problem over all Hurst
/// values in `hs`: the additive reduction for constant diffusion (any `H`),
/// Doss–Sussmann for state-dependent diffusion with a Jacobian (any `H`), and
/// the Young–Euler scheme otherwise, which needs every `H` above `1/2`.
///
/// Young–Euler is the fallback rather than the default because its left-point
/// products carry an `exp(−½σσ″-type Σ(ΔB)²)` bias that stays `O(1)` near
/// `H = 1/2` at feasible step counts, which would pollute cross-`H` law
/// comparisons there.
pub(crate) fn choose_scheme<T: Scalar>(problem: &SdeProblem<T>, hs: &[T]) -> Result<Scheme> {
    if problem.is_sigma_constant() {
        Ok(Scheme::AdditiveReduction)
    } else if problem.has_sigma_jacobian() {
        Ok(Scheme::DossSussmann)
    } else if hs.iter().all(|h| h.as_f64() > 0.5) {
        Ok(Scheme::YoungEuler)
    } else {
        Err(CoreError::Unsupported {
            reason: "state-dependent diffusion without its Jacobian needs every h > 1/2".into(),
        })
    }
}

/// Runs the solver selected by [`choose_scheme`] on a single-channel bundle.
pub(crate) fn solve_with_scheme<T: Scalar>(
    problem: &SdeProblem<T>,
    scheme: Scheme,
    bundle: &FbmBundle<T>,
) -> Result<PathSolution<T>> {
    match scheme {
        Scheme::AdditiveReduction => solve_additive(problem, bundle),
        Scheme::DossSussmann => solve_doss_sussmann(problem, bundle),
        Scheme::YoungEuler => solve_young(problem, bundle),
    }
}
