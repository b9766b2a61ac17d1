//! Time grids and Hurst-parameter bands.
//!
//! All computations run on uniform grids: `n_steps` cells on the observation
//! window `[0, t_max]` and, when a truncated past is present, `n_past` cells on
//! `[-s_trunc, 0)`.  Cell edges and nodes are always derived arithmetically
//! from the integer index so that shared nodes of nested grids agree bit for
//! bit.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// A closed band `[a, b] ⊂ (0, 1)` of Hurst parameters with an active value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstBand<T> {
    /// Lower edge of the band.
    pub a: T,
    /// Upper edge of the band.
    pub b: T,
    /// Active Hurst value, `a ≤ h ≤ b`.
    pub h: T,
}

impl<T: Scalar> HurstBand<T> {
    /// Creates a band, enforcing `0 < a ≤ h ≤ b < 1`.
    pub fn new(a: T, h: T, b: T) -> Result<Self> {
        if !(a > T::zero() && a <= h && h <= b && b < T::one()) {
            return Err(CoreError::InvalidHurst {
                h: h.as_f64(),
                lo: a.as_f64(),
                hi: b.as_f64(),
            });
        }
        Ok(Self { a, b, h })
    }

    /// Degenerate band holding a single value.
    pub fn single(h: T) -> Result<Self> {
        Self::new(h, h, h)
    }

    /// Whether `h` lies inside the band.
    pub fn contains(&self, h: T) -> bool {
        self.a <= h && h <= self.b
    }
}

/// Uniform grid covering `[-s_trunc, t_max]`.
///
/// The past part (`s_trunc > 0`) exists to truncate the kernel integral over
/// `(-∞, 0)`; pure-ODE and path-processing code uses `s_trunc = 0`,
/// `n_past = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    /// Observation horizon `T > 0`.
    pub t_max: T,
    /// Truncation depth `S ≥ 0` of the past window `[-S, 0)`.
    pub s_trunc: T,
    /// Number of uniform cells on `[0, t_max]`.
    pub n_steps: usize,
    /// Number of uniform cells on `[-s_trunc, 0)`.
    pub n_past: usize,
}

impl<T: Scalar> GridSpec<T> {
    /// Validating constructor.
    pub fn new(t_max: T, s_trunc: T, n_steps: usize, n_past: usize) -> Result<Self> {
        if !(t_max > T::zero()) || !t_max.is_finite() {
            return Err(CoreError::InvalidGrid {
                reason: format!("t_max must be positive and finite, got {t_max}"),
            });
        }
        if n_steps == 0 {
            return Err(CoreError::InvalidGrid {
                reason: "n_steps must be at least 1".into(),
            });
        }
        if s_trunc < T::zero() || !s_trunc.is_finite() {
            return Err(CoreError::InvalidGrid {
                reason: format!("s_trunc must be nonnegative and finite, got {s_trunc}"),
            });
        }
        if (s_trunc > T::zero()) != (n_past > 0) {
            return Err(CoreError::InvalidGrid {
                reason: format!(
                    "past window requires both s_trunc > 0 and n_past > 0 (got {s_trunc}, {n_past})"
                ),
            });
        }
        Ok(Self { t_max, s_trunc, n_steps, n_past })
    }

    /// Grid without a past window (solvers, path post-processing).
    pub fn without_past(t_max: T, n_steps: usize) -> Result<Self> {
        Self::new(t_max, T::zero(), n_steps, 0)
    }

    /// Step on the observation window.
    pub fn dt(&self) -> T {
        self.t_max / T::from_usize_c(self.n_steps)
    }

    /// Cell width on the past window. Zero when there is no past.
    pub fn past_dt(&self) -> T {
        if self.n_past == 0 {
            T::zero()
        } else {
            self.s_trunc / T::from_usize_c(self.n_past)
        }
    }

    /// Number of nodes `0 = t_0 < ... < t_{n_steps} = t_max`.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// Total number of cells on `[-s_trunc, t_max]`.
    pub fn n_cells(&self) -> usize {
        self.n_past + self.n_steps
    }

    /// Node `t_i = i·t_max/n_steps`.
    pub fn node(&self, i: usize) -> T {
        debug_assert!(i <= self.n_steps, "node index {i} out of range");
        self.t_max * T::from_usize_c(i) / T::from_usize_c(self.n_steps)
    }

    /// All nodes of the observation window.
    pub fn nodes(&self) -> Vec<T> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }

    /// Edges `(u, v)` of cell `k`, counting past cells first.
    ///
    /// Past cell `k < n_past` is `[-S + kS/n_past, -S + (k+1)S/n_past)`; cell
    /// `n_past + j` is `[t_j, t_{j+1})`.
    pub fn cell(&self, k: usize) -> (T, T) {
        debug_assert!(k < self.n_cells(), "cell index {k} out of range");
        if k < self.n_past {
            let np = T::from_usize_c(self.n_past);
            let u = -self.s_trunc + self.s_trunc * T::from_usize_c(k) / np;
            let v = -self.s_trunc + self.s_trunc * T::from_usize_c(k + 1) / np;
            (u, v)
        } else {
            let j = k - self.n_past;
            (self.node(j), self.node(j + 1))
        }
    }

    /// Width of cell `k`.
    pub fn cell_width(&self, k: usize) -> T {
        if k < self.n_past {
            self.past_dt()
        } else {
            self.dt()
        }
    }

    /// Index `i` with `node(i) = t`, or an error if `t` is not a node.
    pub fn index_of(&self, t: T) -> Result<usize> {
        let dt = self.dt();
        let ratio = (t / dt).as_f64();
        let i = ratio.round();
        let tol = f64::max(1e-9, f64::from(f32::EPSILON) * 8.0 * ratio.abs().max(1.0));
        if i < 0.0 || i > self.n_steps as f64 || (ratio - i).abs() > tol {
            return Err(CoreError::NotANode { t: t.as_f64(), dt: dt.as_f64() });
        }
        Ok(i as usize)
    }

    /// Coarsens the observation window by keeping every `factor`-th node.
    ///
    /// The past parameters are carried over unchanged (they are synthesis
    /// provenance, not part of the node set).
    pub fn restrict(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(CoreError::InvalidGrid {
                reason: format!(
                    "restriction factor {factor} must divide n_steps = {}",
                    self.n_steps
                ),
            });
        }
        Ok(Self { n_steps: self.n_steps / factor, ..*self })
    }
}
