//! Scalar abstraction and the special functions the library needs.
//!
//! Everything numerical in this crate is generic over [`Scalar`], which is a
//! blanket trait over the floating-point machinery from `num-traits`.  Special
//! functions (`gamma`, `digamma`, ...) are evaluated in `f64` regardless of the
//! working precision: they only ever feed scalar *constants* (normalisation
//! factors, exponents), so computing them at full double precision and then
//! narrowing loses nothing.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the library can compute with (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type (nearest value).
    fn from_f64_c(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert")
    }

    /// Converts a count into this scalar type.
    fn from_usize_c(n: usize) -> Self {
        Self::from_f64(n as f64).expect("count must convert")
    }

    /// Widens (or passes through) to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must widen to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Lanczos coefficients for `g = 7`, `n = 9` (double-precision accurate).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function Γ(x) for real arguments (Lanczos approximation).
///
/// Accurate to roughly 14–15 significant digits on the ranges this crate uses
/// (arguments in `(0, 4)` coming from Hurst parameters in `(0, 1)`).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula keeps the approximation on its accurate half-line.
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

/// Natural logarithm of Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let refl = std::f64::consts::PI / (std::f64::consts::PI * x).sin();
        refl.ln() - ln_gamma(1.0 - x)
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Digamma function ψ(x) = Γ'(x)/Γ(x) for `x > 0`.
///
/// Uses the recurrence ψ(x) = ψ(x+1) − 1/x to push the argument above 10 and
/// then the Bernoulli asymptotic series; good to ~1e−14 absolute there.
pub fn digamma(x: f64) -> f64 {
    assert!(x > 0.0, "digamma implemented for positive arguments, got {x}");
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ψ(x) ~ ln x − 1/(2x) − Σ B_{2n}/(2n x^{2n})
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    shift + x.ln() - 0.5 * inv - series
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Reference values computed with 30-digit arbitrary-precision arithmetic.
    #[test]
    fn gamma_matches_reference() {
        let cases = [
            (0.35, 2.546_146_977_212_288_0),
            (0.5, 1.772_453_850_905_516_0),
            (0.75, 1.225_416_702_465_177_6),
            (1.0, 1.0),
            (1.5, 0.886_226_925_452_758_0),
            (2.5, 1.329_340_388_179_137_0),
            (4.2, 7.756_689_535_793_177_6),
        ];
        for (x, want) in cases {
            assert_abs_diff_eq!(gamma(x), want, epsilon = 1e-13 * want.abs());
        }
    }

    #[test]
    fn ln_gamma_matches_reference() {
        assert_abs_diff_eq!(ln_gamma(8.5), 9.549_267_257_300_998, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(0.3), 1.095_797_994_818_075_5, epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn digamma_matches_reference() {
        let cases = [
            (0.5, -1.963_510_026_021_423_5),
            (0.55, -1.735_959_250_642_173_8),
            (1.0, -0.577_215_664_901_532_9),
            (1.45, -0.011_316_422_586_445_844),
            (2.5, 0.703_156_640_645_243_2),
            (7.3, 1.917_820_335_637_986_1),
        ];
        for (x, want) in cases {
            assert_abs_diff_eq!(digamma(x), want, epsilon = 1e-13);
        }
    }

    #[test]
    fn digamma_recurrence_holds() {
        // ψ(x+1) = ψ(x) + 1/x across the recurrence/series boundary.
        for &x in &[0.2, 0.9, 3.7, 9.9, 25.0] {
            assert_abs_diff_eq!(digamma(x + 1.0), digamma(x) + 1.0 / x, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_conversions_roundtrip() {
        let x: f32 = Scalar::from_f64_c(0.25);
        assert_eq!(x, 0.25f32);
        assert_eq!(x.as_f64(), 0.25f64);
        let n: f64 = Scalar::from_usize_c(17);
        assert_eq!(n, 17.0);
    }
}
