//! Synthesis of fractional Brownian motion and its Hurst sensitivity from a
//! shared Brownian driver.
//!
//! [`FbmSynth`] precomputes all cell-averaged kernel weights for one `(h,
//! grid)` pair so that Monte Carlo replication costs one weighted sum per
//! node.  On the observation window the weights depend only on the lag
//! `t_i − t_j` (uniform grid), so they are stored once per lag; past-window
//! weights genuinely depend on `(node, cell)` and are stored densely.
//!
//! The synthesized process is Gaussian with covariance
//! `C_H² Σ_k w_k(s) w_k(t) width_k`; [`FbmSynth::covariance`] evaluates this
//! exactly, and [`FbmSynth::truncation_budget`] reports its distance from the
//! analytic fBm covariance — the honest discretization + truncation error
//! budget used by the acceptance checks.

use crate::driver::DriverPath;
use crate::error::Result;
use crate::grid::GridSpec;
use crate::kernel::{
    cell_dweight, cell_weight, check_h_band, dg_anti, g_anti, mvn_constant,
    mvn_constant_derivative,
};
use crate::scalar::Scalar;

/// Analytic fBm covariance `½(|s|^{2H} + |t|^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance<T: Scalar>(h: T, s: T, t: T) -> T {
    let two_h = h + h;
    let half = T::from_f64_c(0.5);
    half * (s.abs().powf(two_h) + t.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// Co-sampled fBm path and Hurst-sensitivity path at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmBundle<T> {
    /// Hurst parameter of the bundle.
    pub h: T,
    /// Grid the node values live on.
    pub grid: GridSpec<T>,
    /// `B^H` at nodes `t_0 = 0, ..., t_{n_steps}`.
    pub path: Vec<T>,
    /// `∂_H B^H` at the same nodes (empty for oracle samplers).
    pub sensitivity: Vec<T>,
    /// Seed of the driver this bundle was synthesized from.
    pub driver_seed: u64,
}

impl<T: Scalar> FbmBundle<T> {
    /// Restriction to every `factor`-th node (paths of coarser resolution).
    pub fn restrict(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.restrict(factor)?;
        let pick = |src: &Vec<T>| -> Vec<T> {
            if src.is_empty() {
                Vec::new()
            } else {
                (0..=grid.n_steps).map(|i| src[i * factor]).collect()
            }
        };
        Ok(Self {
            h: self.h,
            grid,
            path: pick(&self.path),
            sensitivity: pick(&self.sensitivity),
            driver_seed: self.driver_seed,
        })
    }
}

/// Precomputed kernel-weight tables for one `(h, grid)` pair.
#[derive(Debug, Clone)]
pub struct FbmSynth<T> {
    h: T,
    grid: GridSpec<T>,
    c: T,
    dc: T,
    /// Recent-cell weight by lag: `w_rec[l] = (g(t_l) − g(t_{l−1}))/Δ`, `l ≥ 1`.
    w_rec: Vec<T>,
    dw_rec: Vec<T>,
    /// Past-cell weights, row-major `n_nodes × n_past`.
    w_past: Vec<T>,
    dw_past: Vec<T>,
}

impl<T: Scalar> FbmSynth<T> {
    /// Precomputes weights; rejects `h` outside the synthesizer band.
    pub fn new(h: T, grid: &GridSpec<T>) -> Result<Self> {
        check_h_band(h)?;
        let c = mvn_constant(h)?;
        let dc = mvn_constant_derivative(h)?;
        let dt = grid.dt();
        let n = grid.n_steps;

        let mut w_rec = Vec::with_capacity(n + 1);
        let mut dw_rec = Vec::with_capacity(n + 1);
        w_rec.push(T::zero());
        dw_rec.push(T::zero());
        for lag in 1..=n {
            let x1 = grid.node(lag);
            let x0 = grid.node(lag - 1);
            w_rec.push((g_anti(h, x1) - g_anti(h, x0)) / dt);
            dw_rec.push((dg_anti(h, x1) - dg_anti(h, x0)) / dt);
        }

        let n_nodes = grid.n_nodes();
        let np = grid.n_past;
        let mut w_past = vec![T::zero(); n_nodes * np];
        let mut dw_past = vec![T::zero(); n_nodes * np];
        for i in 0..n_nodes {
            let t = grid.node(i);
            for k in 0..np {
                let (u, v) = grid.cell(k);
                w_past[i * np + k] = cell_weight(h, t, u, v);
                dw_past[i * np + k] = cell_dweight(h, t, u, v);
            }
        }

        Ok(Self { h, grid: *grid, c, dc, w_rec, dw_rec, w_past, dw_past })
    }

    /// Hurst parameter of this synthesizer.
    pub fn h(&self) -> T {
        self.h
    }

    /// Grid of this synthesizer.
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Normalisation constant `C_H`.
    pub fn c_h(&self) -> T {
        self.c
    }

    /// Derivative `∂_H C_H`.
    pub fn dc_h(&self) -> T {
        self.dc
    }

    /// Raw kernel-quadrature sums `Σ w·ΔB` and `Σ ∂_H w·ΔB` at node `i`.
    fn node_sums(&self, increments: &[T], i: usize) -> (T, T) {
        let np = self.grid.n_past;
        let mut s = T::zero();
        let mut ds = T::zero();
        for k in 0..np {
            let inc = increments[k];
            s += self.w_past[i * np + k] * inc;
            ds += self.dw_past[i * np + k] * inc;
        }
        for j in 0..i {
            let inc = increments[np + j];
            s += self.w_rec[i - j] * inc;
            ds += self.dw_rec[i - j] * inc;
        }
        (s, ds)
    }

    /// Synthesizes the co-sampled `(B^H, ∂_H B^H)` bundle from a driver.
    pub fn synthesize(&self, driver: &DriverPath<T>) -> Result<FbmBundle<T>> {
        driver.same_grid(&self.grid)?;
        let n_nodes = self.grid.n_nodes();
        let mut path = Vec::with_capacity(n_nodes);
        let mut sensitivity = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let (s, ds) = self.node_sums(&driver.increments, i);
            path.push(self.c * s);
            sensitivity.push(self.dc * s + self.c * ds);
        }
        Ok(FbmBundle {
            h: self.h,
            grid: self.grid,
            path,
            sensitivity,
            driver_seed: driver.seed,
        })
    }

    /// Path-only synthesis (skips the sensitivity accumulation; ~half cost).
    pub fn synthesize_path(&self, driver: &DriverPath<T>) -> Result<Vec<T>> {
        driver.same_grid(&self.grid)?;
        let np = self.grid.n_past;
        let mut path = Vec::with_capacity(self.grid.n_nodes());
        for i in 0..self.grid.n_nodes() {
            let mut s = T::zero();
            for k in 0..np {
                s += self.w_past[i * np + k] * driver.increments[k];
            }
            for j in 0..i {
                s += self.w_rec[i - j] * driver.increments[np + j];
            }
            path.push(self.c * s);
        }
        Ok(path)
    }

    /// Exact covariance of the synthesized Gaussian model between nodes `i, j`:
    /// `C_H² Σ_k w_k(t_i) w_k(t_j) width_k`.
    pub fn covariance(&self, i: usize, j: usize) -> T {
        let np = self.grid.n_past;
        let wp = self.grid.past_dt();
        let dt = self.grid.dt();
        let mut acc = T::zero();
        for k in 0..np {
            acc += self.w_past[i * np + k] * self.w_past[j * np + k] * wp;
        }
        for m in 0..i.min(j) {
            acc += self.w_rec[i - m] * self.w_rec[j - m] * dt;
        }
        self.c * self.c * acc
    }

    /// Absolute gap between the synthesized-model covariance and the analytic
    /// fBm covariance at nodes `(i, j)` — the deterministic error budget of
    /// truncation + cell averaging.
    pub fn truncation_budget(&self, i: usize, j: usize) -> T {
        let analytic = fbm_covariance(self.h, self.grid.node(i), self.grid.node(j));
        (self.covariance(i, j) - analytic).abs()
    }
}

/// One-shot synthesis of `(B^H, ∂_H B^H)` from a driver.
///
/// For Monte Carlo loops build one [`FbmSynth`] and reuse it.
pub fn synthesize_fbm<T: Scalar>(driver: &DriverPath<T>, h: T) -> Result<FbmBundle<T>> {
    FbmSynth::new(h, &driver.grid)?.synthesize(driver)
}
