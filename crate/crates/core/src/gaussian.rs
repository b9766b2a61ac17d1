//! Exact Gaussian sampler for fBm node values — the oracle the kernel
//! synthesizer is validated against.
//!
//! Draws `(B^H_{t_1}, ..., B^H_{t_n})` with the *exact* fBm covariance via a
//! dense symmetric factorization.  Independent of the Mandelbrot–van Ness
//! route, so agreement between the two is a genuine cross-check.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::driver::SampleScalar;
use crate::error::{CoreError, Result};
use crate::fbm::{fbm_covariance, FbmBundle};
use crate::grid::GridSpec;
use crate::linalg::{apply_factor, factor_spd};
use crate::scalar::Scalar;

/// Dense-factorization size cap.
pub const MAX_ORACLE_NODES: usize = 4096;

/// Precomputed covariance factor for exact fBm draws on a grid.
#[derive(Debug, Clone)]
pub struct FbmCholesky<T> {
    grid: GridSpec<T>,
    h: T,
    factor: Vec<T>,
    n: usize,
}

impl<T: Scalar> FbmCholesky<T> {
    /// Builds the factor of the node covariance matrix (nodes `t_1..t_n`).
    pub fn new(h: T, grid: &GridSpec<T>) -> Result<Self> {
        let hf = h.as_f64();
        if !(hf > 0.0 && hf < 1.0) {
            return Err(CoreError::InvalidHurst { h: hf, lo: 0.0, hi: 1.0 });
        }
        let n = grid.n_steps;
        if n > MAX_ORACLE_NODES {
            return Err(CoreError::Unsupported {
                reason: format!(
                    "dense factorization capped at {MAX_ORACLE_NODES} steps, got {n}"
                ),
            });
        }
        let mut cov = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] = fbm_covariance(h, grid.node(i + 1), grid.node(j + 1));
            }
        }
        let factor = factor_spd(&cov, n)?;
        Ok(Self { grid: *grid, h, factor, n })
    }

    /// One exact draw as node values `[0, B_{t_1}, ..., B_{t_n}]`.
    pub fn sample(&self, seed: u64) -> FbmBundle<T>
    where
        T: SampleScalar,
    {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let z: Vec<T> = (0..self.n).map(|_| T::std_normal(&mut rng)).collect();
        let mut path = Vec::with_capacity(self.n + 1);
        path.push(T::zero());
        path.extend(apply_factor(&self.factor, self.n, &z));
        FbmBundle {
            h: self.h,
            grid: self.grid,
            path,
            sensitivity: Vec::new(),
            driver_seed: seed,
        }
    }
}

/// One-shot exact fBm draw (sensitivity empty).  For Monte Carlo loops build
/// one [`FbmCholesky`] and call [`FbmCholesky::sample`] per seed.
pub fn exact_fbm_cholesky<T: SampleScalar>(
    seed: u64,
    grid: &GridSpec<T>,
    h: T,
) -> Result<FbmBundle<T>> {
    Ok(FbmCholesky::new(h, grid)?.sample(seed))
}
