//! 16-point Gauss–Legendre quadrature used by the flow integrals and the
//! Lamperti antiderivative.

use std::sync::OnceLock;

use crate::scalar::Scalar;

/// Nodes and weights on `[-1, 1]`, computed once by Newton iteration on the
/// Legendre polynomial (converges to rounding in a handful of steps).
pub(crate) fn gl16() -> &'static [(f64, f64); 16] {
    static CACHE: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    CACHE.get_or_init(|| {
        const N: usize = 16;
        let mut out = [(0.0f64, 0.0f64); N];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=N {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let delta = p1 / dp;
                x -= delta;
                if delta.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// Integrates `f` over a single panel `[a, b]` with the 16-point rule.
pub(crate) fn integrate_panel<T: Scalar>(mut f: impl FnMut(T) -> T, a: T, b: T) -> T {
    let half = T::from_f64_c(0.5);
    let mid = half * (a + b);
    let rad = half * (b - a);
    let mut acc = T::zero();
    for &(x, w) in gl16() {
        acc += T::from_f64_c(w) * f(mid + rad * T::from_f64_c(x));
    }
    acc * rad
}
