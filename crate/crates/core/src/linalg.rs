//! Minimal dense symmetric linear algebra: Cholesky factorization with a
//! Jacobi eigendecomposition fallback for numerically semi-definite matrices.
//!
//! Matrices are row-major `n × n` slices.  Sizes here are small (the Gaussian
//! oracle caps at 4096 nodes), so simplicity and genericity over the scalar
//! type win over asymptotics.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`, or `None` if a pivot
/// is not strictly positive (matrix not numerically positive definite).
pub fn cholesky<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= T::zero() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Jacobi eigendecomposition of a symmetric matrix: `A = Q Λ Qᵀ`.
///
/// Returns `(eigenvalues, q)` with `q` row-major; eigenvector `k` is column
/// `k` of `q`.  Converges to rounding for any symmetric input.
pub fn jacobi_eigh<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut q = vec![T::zero(); n * n];
    for i in 0..n {
        q[i * n + i] = T::one();
    }
    let norm: T = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = norm * T::epsilon() * T::from_usize_c(n);
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m[p * n + r];
                if apr.abs() <= tol / T::from_usize_c(n * n) {
                    continue;
                }
                let theta = (m[r * n + r] - m[p * n + p]) / (T::from_f64_c(2.0) * apr);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkr = m[k * n + r];
                    m[k * n + p] = c * mkp - s * mkr;
                    m[k * n + r] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mrk = m[r * n + k];
                    m[p * n + k] = c * mpk - s * mrk;
                    m[r * n + k] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let qkp = q[k * n + p];
                    let qkr = q[k * n + r];
                    q[k * n + p] = c * qkp - s * qkr;
                    q[k * n + r] = s * qkp + c * qkr;
                }
            }
        }
    }
    let lambda = (0..n).map(|i| m[i * n + i]).collect();
    (lambda, q)
}

/// Factor `F` with `F Fᵀ = A` for a symmetric positive *semi*-definite matrix.
///
/// Tries Cholesky first; on failure falls back to the eigendecomposition with
/// tiny negative eigenvalues (rounding noise) clamped to zero.  Eigenvalues
/// below `−1e−10·λ_max` are treated as a genuine indefiniteness failure.
pub fn factor_spd<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    if let Some(l) = cholesky(a, n) {
        return Ok(l);
    }
    let (lambda, q) = jacobi_eigh(a, n);
    let lambda_max = lambda.iter().fold(T::zero(), |m, &x| m.max(x));
    let floor = -T::from_f64_c(1e-10) * lambda_max;
    for &lam in &lambda {
        if lam < floor {
            return Err(CoreError::Numerical {
                context: "factor_spd",
                reason: format!(
                    "eigenvalue {} below tolerance {} (max {})",
                    lam.as_f64(),
                    floor.as_f64(),
                    lambda_max.as_f64()
                ),
            });
        }
    }
    let mut f = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            f[i * n + j] = q[i * n + j] * lambda[j].max(T::zero()).sqrt();
        }
    }
    Ok(f)
}

/// Applies the factor to a standard normal vector: `x = F z`.
pub fn apply_factor<T: Scalar>(f: &[T], n: usize, z: &[T]) -> Vec<T> {
    (0..n)
        .map(|i| (0..n).map(|j| f[i * n + j] * z[j]).sum())
        .collect()
}

/// Row-major matrix product `C = A B` for `n × n` matrices.
pub fn mat_mul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik != T::zero() {
                for j in 0..n {
                    c[i * n + j] += aik * b[k * n + j];
                }
            }
        }
    }
    c
}

/// Matrix–vector product `y = A x` for a row-major `n × n` matrix.
pub fn mat_vec<T: Scalar>(a: &[T], x: &[T], n: usize) -> Vec<T> {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

/// Matrix exponential of a small row-major `n × n` matrix by scaling and
/// squaring with a Taylor series on the scaled matrix.
///
/// Intended for the tiny state dimensions of the variational solvers (`n` a
/// handful); accuracy is close to machine precision there.
pub fn expm<T: Scalar>(a: &[T], n: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), n * n);
    // Scale so the infinity norm is at most 1/2, then square back.
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<T>())
        .fold(T::zero(), T::max);
    let mut squarings = 0u32;
    let mut scale = T::one();
    let half = T::from_f64_c(0.5);
    while norm * scale > half && squarings < 64 {
        scale = scale * half;
        squarings += 1;
    }
    let scaled: Vec<T> = a.iter().map(|&x| x * scale).collect();
    // exp(scaled) by Taylor; terms decay at least geometrically from ‖·‖ ≤ ½.
    let mut result = vec![T::zero(); n * n];
    for i in 0..n {
        result[i * n + i] = T::one();
    }
    let mut term = result.clone();
    for k in 1..=24 {
        term = mat_mul(&term, &scaled, n);
        let inv_k = T::one() / T::from_usize_c(k);
        let mut term_norm = T::zero();
        for (r, t) in result.iter_mut().zip(term.iter_mut()) {
            *t = *t * inv_k;
            *r += *t;
            term_norm = term_norm.max(t.abs());
        }
        if term_norm < T::epsilon() {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result, n);
    }
    result
}
