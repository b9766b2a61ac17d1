//! Wiener integrals of step functions against fractional Brownian motion.
//!
//! A step function `f = Σ f_i 1_{[u_i, v_i)}` integrates against a path as the
//! finite sum `Σ f_i (B_{v_i} − B_{u_i})`.  The resulting Gaussian variable has
//! variance `‖f‖_H²`, which for `H < 1/2` admits the closed two-term form
//!
//! ```text
//! ‖f‖_H² = H(1−2H)/2 ∬ (f(x)−f(y))² |x−y|^{2H−2} dx dy
//!          + H ∫ f(x)² (x^{2H−1} + (T−x)^{2H−1}) dx,
//! ```
//!
//! evaluated here exactly via power-function antiderivatives.  For every `H`
//! the variance is also a finite double sum over increment covariances; the two
//! routes cross-check each other below `1/2`.  The module also provides the
//! symmetric mollified integral `(1/2ε) ∫ U_s (B_{s+ε} − B_{s−ε}) ds`, the
//! ε-approximation whose limit generalizes the Stratonovich integral.

use crate::error::{CoreError, Result};
use crate::fbm::{fbm_covariance, FbmBundle};
use crate::grid::GridSpec;
use crate::scalar::Scalar;

/// A finitely supported step function `Σ f_i 1_{[u_i, v_i)}` on `[0, ∞)`.
///
/// Pieces are kept sorted by left endpoint; the intervals are pairwise
/// disjoint (touching endpoints allowed) and the function is zero on gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T> {
    pieces: Vec<(T, T, T)>,
}

impl<T: Scalar> StepFunction<T> {
    /// Builds a step function from `(u_i, v_i, f_i)` pieces.
    ///
    /// Requires at least one piece, `0 ≤ u_i < v_i` finite, and pairwise
    /// disjoint intervals.
    pub fn new(mut pieces: Vec<(T, T, T)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(CoreError::InvalidInput {
                reason: "step function needs at least one piece".into(),
            });
        }
        for &(u, v, c) in &pieces {
            if !(u.is_finite() && v.is_finite() && c.is_finite()) {
                return Err(CoreError::InvalidInput {
                    reason: "step function piece is not finite".into(),
                });
            }
            if u < T::zero() || v <= u {
                return Err(CoreError::InvalidInput {
                    reason: format!(
                        "piece [{}, {}) must satisfy 0 <= u < v",
                        u.as_f64(),
                        v.as_f64()
                    ),
                });
            }
        }
        pieces.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite endpoints"));
        for w in pieces.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(CoreError::InvalidInput {
                    reason: format!(
                        "pieces overlap near u = {}",
                        w[1].0.as_f64()
                    ),
                });
            }
        }
        Ok(Self { pieces })
    }

    /// Parses CSV rows `u,v,value`; blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(CoreError::InvalidInput {
                    reason: format!(
                        "line {}: expected 'u,v,value', got {:?}",
                        lineno + 1,
                        line
                    ),
                });
            }
            let mut parsed = [T::zero(); 3];
            for (slot, field) in parsed.iter_mut().zip(&fields) {
                let x: f64 = field.parse().map_err(|_| CoreError::InvalidInput {
                    reason: format!("line {}: bad number {:?}", lineno + 1, field),
                })?;
                *slot = T::from_f64_c(x);
            }
            pieces.push((parsed[0], parsed[1], parsed[2]));
        }
        Self::new(pieces)
    }

    /// The pieces `(u_i, v_i, f_i)`, sorted by `u_i`.
    pub fn pieces(&self) -> &[(T, T, T)] {
        &self.pieces
    }

    /// Right end of the support (largest `v_i`).
    pub fn support_end(&self) -> T {
        self.pieces
            .iter()
            .map(|p| p.1)
            .fold(T::zero(), T::max)
    }

    /// Pointwise value; zero on gaps and outside the support.
    pub fn evaluate(&self, t: T) -> T {
        for &(u, v, c) in &self.pieces {
            if u <= t && t < v {
                return c;
            }
        }
        T::zero()
    }

    /// Partition of `[0, t_max]` into constancy intervals `(a, b, value)`,
    /// including zero-valued gaps.
    fn partition(&self, t_max: T) -> Vec<(T, T, T)> {
        let mut cuts: Vec<T> = vec![T::zero(), t_max];
        for &(u, v, _) in &self.pieces {
            cuts.push(u);
            cuts.push(v);
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite endpoints"));
        cuts.dedup_by(|a, b| a == b);
        let mut out = Vec::with_capacity(cuts.len());
        let half = T::from_f64_c(0.5);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b > a {
                out.push((a, b, self.evaluate(half * (a + b))));
            }
        }
        out
    }
}

/// Wiener integral `Σ f_i (B_{v_i} − B_{u_i})` of a step function against a
/// sampled path.  All interval endpoints must be nodes of the bundle's grid.
pub fn wiener_integral<T: Scalar>(f: &StepFunction<T>, bundle: &FbmBundle<T>) -> Result<T> {
    let grid = &bundle.grid;
    let mut acc = T::zero();
    for &(u, v, c) in f.pieces() {
        let iu = grid.index_of(u)?;
        let iv = grid.index_of(v)?;
        acc += c * (bundle.path[iv] - bundle.path[iu]);
    }
    Ok(acc)
}

/// Antiderivative block for the double integral of `|x−y|^{2H−2}` over the
/// rectangle `[a,b] × [c,d]` with `b ≤ c`:
/// `((d−a)^{2H} − (d−b)^{2H} − (c−a)^{2H} + (c−b)^{2H}) / (2H(2H−1))`.
fn rectangle_kernel_mass<T: Scalar>(two_h: T, a: T, b: T, c: T, d: T) -> T {
    let p = |x: T| x.powf(two_h);
    (p(d - a) - p(d - b) - p(c - a) + p(c - b)) / (two_h * (two_h - T::one()))
}

/// Exact `‖f‖_H²` for `H < 1/2` on the interval `[0, t_max]`.
///
/// Both terms of the closed-form norm are integrated analytically over the
/// constancy partition of `f` (gaps included), so the only floating-point
/// error is in the power evaluations themselves.
pub fn wiener_norm_small_h<T: Scalar>(f: &StepFunction<T>, h: T, t_max: T) -> Result<T> {
    let half = T::from_f64_c(0.5);
    if !(h > T::zero() && h < half) {
        return Err(CoreError::InvalidHurst {
            h: h.as_f64(),
            lo: 0.0,
            hi: 0.5,
        });
    }
    if !(t_max.is_finite() && t_max > T::zero()) || f.support_end() > t_max {
        return Err(CoreError::InvalidInput {
            reason: "step function support must lie inside [0, t_max]".into(),
        });
    }
    let two_h = h + h;
    let cells = f.partition(t_max);
    // H(1−2H)/2 · ∬ (f(x)−f(y))² |x−y|^{2H−2}; the two triangles x<y and x>y
    // contribute equally, so sum ordered pairs once and double.
    let mut double_term = T::zero();
    for (j, &(aj, bj, cj)) in cells.iter().enumerate() {
        for &(ak, bk, ck) in cells.iter().skip(j + 1) {
            let diff = cj - ck;
            if diff != T::zero() {
                double_term += diff * diff * rectangle_kernel_mass(two_h, aj, bj, ak, bk);
            }
        }
    }
    double_term = h * (T::one() - two_h) * double_term;
    // H · ∫ f² (x^{2H−1} + (T−x)^{2H−1}) dx, antiderivatives x^{2H}/(2H).
    let mut boundary_term = T::zero();
    for &(a, b, c) in &cells {
        if c != T::zero() {
            let p = |x: T| x.powf(two_h);
            boundary_term += c * c * (p(b) - p(a) + p(t_max - a) - p(t_max - b));
        }
    }
    boundary_term = half * boundary_term;
    Ok(double_term + boundary_term)
}

/// Variance of the Wiener integral via the increment-covariance double sum
/// `Σ_i Σ_j f_i f_j E[(B_{v_i}−B_{u_i})(B_{v_j}−B_{u_j})]`, valid for every
/// `h ∈ (0, 1)`.
pub fn wiener_variance_covariance<T: Scalar>(f: &StepFunction<T>, h: T) -> Result<T> {
    if !(h > T::zero() && h < T::one()) {
        return Err(CoreError::InvalidHurst {
            h: h.as_f64(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut acc = T::zero();
    for &(ui, vi, ci) in f.pieces() {
        for &(uj, vj, cj) in f.pieces() {
            let cov = fbm_covariance(h, vi, vj) - fbm_covariance(h, vi, uj)
                - fbm_covariance(h, ui, vj)
                + fbm_covariance(h, ui, uj);
            acc += ci * cj * cov;
        }
    }
    Ok(acc)
}

/// Variance curve `h ↦ Var(I^H(f))` over an `h`-grid in `(0, 1)`.
///
/// Uses the closed-form norm below `1/2` and the covariance double sum at and
/// above it; the two branches agree to quadrature accuracy where both apply.
pub fn wiener_variance_curve<T: Scalar>(
    f: &StepFunction<T>,
    h_grid: &[T],
    t_max: T,
) -> Result<Vec<(T, T)>> {
    let half = T::from_f64_c(0.5);
    let mut out = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let var = if h < half {
            wiener_norm_small_h(f, h, t_max)?
        } else {
            wiener_variance_covariance(f, h)?
        };
        out.push((h, var));
    }
    Ok(out)
}

/// Inputs for the symmetric mollified integral.
///
/// Both paths live on the nodes of `grid`; the integrator is extended past the
/// ends of `[0, t_max]` by its boundary values (so the left extension is zero,
/// matching the paths-start-at-zero convention, and the right extension keeps
/// the terminal value).
#[derive(Debug, Clone, Copy)]
pub struct RvConfig<'a, T> {
    /// Mollification half-width; must be a positive node multiple of the step.
    pub epsilon: T,
    /// Integrand `U` sampled on the grid nodes.
    pub integrand: &'a [T],
    /// Integrator `B` sampled on the grid nodes.
    pub integrator: &'a [T],
    /// Common grid of both paths.
    pub grid: &'a GridSpec<T>,
}

/// Symmetric ε-approximation `(1/2ε) ∫_0^T U_s (B_{s+ε} − B_{s−ε}) ds` with
/// trapezoid quadrature on the grid nodes.
///
/// `ε` must be an exact multiple `m·Δ` of the grid step with `m ≥ 1` and
/// `ε < t_max/2`, which keeps the estimator bit-reproducible across runs.
pub fn russo_vallois_symmetric<T: Scalar>(cfg: RvConfig<'_, T>) -> Result<T> {
    let grid = cfg.grid;
    let n = grid.n_steps;
    let dt = grid.dt();
    if cfg.integrand.len() != grid.n_nodes() || cfg.integrator.len() != grid.n_nodes() {
        return Err(CoreError::GridMismatch {
            reason: format!(
                "paths of length {} and {} on a grid with {} nodes",
                cfg.integrand.len(),
                cfg.integrator.len(),
                grid.n_nodes()
            ),
        });
    }
    let half = T::from_f64_c(0.5);
    if !(cfg.epsilon > T::zero() && cfg.epsilon < half * grid.t_max) {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "epsilon {} must lie in (0, t_max/2)",
                cfg.epsilon.as_f64()
            ),
        });
    }
    let ratio = cfg.epsilon / dt;
    let m = ratio.round();
    let tol = T::from_f64_c(1e-9).max(T::epsilon() * T::from_f64_c(8.0) * ratio.abs());
    if (ratio - m).abs() > tol || m < T::one() {
        return Err(CoreError::InvalidInput {
            reason: format!(
                "epsilon {} is not a positive multiple of the grid step {}",
                cfg.epsilon.as_f64(),
                dt.as_f64()
            ),
        });
    }
    let m = m.as_f64() as usize;
    let mut acc = T::zero();
    for i in 0..=n {
        let fwd = cfg.integrator[(i + m).min(n)];
        let bwd = cfg.integrator[i.saturating_sub(m)];
        let w = if i == 0 || i == n { half } else { T::one() };
        acc += w * cfg.integrand[i] * (fwd - bwd);
    }
    Ok(acc * dt / (cfg.epsilon + cfg.epsilon))
}
