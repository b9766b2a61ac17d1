//! Path-regularity diagnostics: discrete Hölder norms and the two Besov-type
//! norms used by the Young-solution theory.
//!
//! Definitions (scalar paths on `[0, T]`):
//! - Hölder: `sup_t |f(t)| + sup_{s<t} |f(t)−f(s)|/|t−s|^λ` over grid nodes.
//! - `‖f‖_{α,1} = sup_t (|f(t)| + ∫_0^t |f(t)−f(s)|/(t−s)^{1+α} ds)`.
//! - `‖g‖_{1−α,2} = sup_{s<t} (|g(t)−g(s)|/(t−s)^{1−α} + ∫_s^t |g(y)−g(s)|/(y−s)^{2−α} dy)`.
//!
//! Inner integrals are trapezoid sums with the integrand continued by zero at
//! its singular endpoint; for paths that belong to the respective space the
//! quadrature error vanishes under grid refinement (tested).

use crate::error::{CoreError, Result};
use crate::grid::GridSpec;
use crate::scalar::Scalar;

fn check_len<T: Scalar>(values: &[T], grid: &GridSpec<T>) -> Result<()> {
    if values.len() != grid.n_nodes() {
        return Err(CoreError::GridMismatch {
            reason: format!(
                "path has {} values but the grid has {} nodes",
                values.len(),
                grid.n_nodes()
            ),
        });
    }
    Ok(())
}

/// Discrete `λ`-Hölder norm estimate over node pairs inside `window`
/// (defaults to the whole observation interval).
pub fn holder_norm_estimate<T: Scalar>(
    values: &[T],
    grid: &GridSpec<T>,
    lambda: T,
    window: Option<(T, T)>,
) -> Result<T> {
    check_len(values, grid)?;
    if lambda < T::zero() || lambda >= T::one() {
        return Err(CoreError::Unsupported {
            reason: format!("Hölder exponent must lie in [0, 1), got {lambda}"),
        });
    }
    let (lo, hi) = match window {
        Some((a, b)) => (grid.index_of(a)?, grid.index_of(b)?),
        None => (0, grid.n_steps),
    };
    if lo >= hi {
        return Err(CoreError::InvalidGrid {
            reason: "window must contain at least two nodes".into(),
        });
    }
    let dt = grid.dt();
    // Precompute |t−s|^{−λ} per lag; uniform grid makes pairs lag-indexed.
    let inv_pow: Vec<T> = (0..=(hi - lo))
        .map(|l| {
            if l == 0 {
                T::zero()
            } else {
                (dt * T::from_usize_c(l)).powf(-lambda)
            }
        })
        .collect();
    let mut sup_abs = T::zero();
    let mut sup_ratio = T::zero();
    for i in lo..=hi {
        sup_abs = sup_abs.max(values[i].abs());
        for j in (i + 1)..=hi {
            let ratio = (values[j] - values[i]).abs() * inv_pow[j - i];
            sup_ratio = sup_ratio.max(ratio);
        }
    }
    Ok(sup_abs + sup_ratio)
}

/// Discrete `‖f‖_{α,1}` norm, `0 < α < 1/2`.
pub fn besov_norm_w1<T: Scalar>(values: &[T], grid: &GridSpec<T>, alpha: T) -> Result<T> {
    check_len(values, grid)?;
    check_alpha(alpha)?;
    let dt = grid.dt();
    let n = grid.n_steps;
    let half = T::from_f64_c(0.5);
    // (lag·Δ)^{−1−α} per lag ≥ 1.
    let inv_pow: Vec<T> = (0..=n)
        .map(|l| {
            if l == 0 {
                T::zero()
            } else {
                (dt * T::from_usize_c(l)).powf(-(T::one() + alpha))
            }
        })
        .collect();
    let mut norm = T::zero();
    for i in 0..=n {
        // Trapezoid of s ↦ |f(t_i)−f(s)|/(t_i−s)^{1+α} over [0, t_i];
        // integrand continued by 0 at s = t_i.
        let mut integral = T::zero();
        for j in 0..i {
            let v = (values[i] - values[j]).abs() * inv_pow[i - j];
            let w = if j == 0 { half } else { T::one() };
            integral += w * v;
        }
        norm = norm.max(values[i].abs() + integral * dt);
    }
    Ok(norm)
}

/// Discrete `‖g‖_{1−α,2}` norm, `0 < α < 1/2`.
pub fn besov_norm_w2<T: Scalar>(values: &[T], grid: &GridSpec<T>, alpha: T) -> Result<T> {
    check_len(values, grid)?;
    check_alpha(alpha)?;
    let dt = grid.dt();
    let n = grid.n_steps;
    let half = T::from_f64_c(0.5);
    let ratio_pow: Vec<T> = (0..=n)
        .map(|l| {
            if l == 0 {
                T::zero()
            } else {
                (dt * T::from_usize_c(l)).powf(alpha - T::one())
            }
        })
        .collect();
    let integrand_pow: Vec<T> = (0..=n)
        .map(|l| {
            if l == 0 {
                T::zero()
            } else {
                (dt * T::from_usize_c(l)).powf(alpha - T::from_f64_c(2.0))
            }
        })
        .collect();
    let mut norm = T::zero();
    for i in 0..n {
        // s = t_i fixed; walk t = t_j upward, accumulating the inner integral
        // of y ↦ |g(y)−g(s)|/(y−s)^{2−α} by trapezoid (0 at the singular end).
        let mut integral = T::zero();
        let mut prev = T::zero();
        for j in (i + 1)..=n {
            let diff = (values[j] - values[i]).abs();
            let v = diff * integrand_pow[j - i];
            integral += half * (prev + v) * dt;
            prev = v;
            norm = norm.max(diff * ratio_pow[j - i] + integral);
        }
    }
    Ok(norm)
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::from_f64_c(0.5) {
        Ok(())
    } else {
        Err(CoreError::Unsupported {
            reason: format!("Besov parameter must lie in (0, 1/2), got {alpha}"),
        })
    }
}
