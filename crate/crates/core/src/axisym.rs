//! Heat flow for data that depend on `(x, y)` only through `r = |(x, y)|`.
//!
//! Rotations about the `tau` axis commute with `Delta_H`, and on such
//! functions `Delta_H f = f_rr + f_r / r + 4 r^2 f_tautau` (the mixed terms
//! combine into the rotation generator, which annihilates them). The
//! reduced operator is discretized on an `(r, tau)` grid in conservative
//! form and stepped with backward Euler in `r` and then in `tau`. Both
//! solves are M-matrix inversions, so the step is order preserving and
//! unconditionally stable; the discrete mass with cylindrical cell volumes
//! is conserved up to boundary outflow.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::solver::LinearFlow;

/// Nodes `r_i = i h_r` (`i = 0..nr`) and `tau_k = -R_tau + k h_tau`.
/// The outer radius and both `tau` ends are Dirichlet boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiGrid {
    pub r_max: f64,
    pub rtau: f64,
    pub nr: usize,
    pub ntau: usize,
}

impl AxiGrid {
    pub fn new(r_max: f64, rtau: f64, nr: usize, ntau: usize) -> Result<Self> {
        if !(r_max > 0.0 && rtau > 0.0) || !r_max.is_finite() || !rtau.is_finite() {
            return Err(invalid("axisymmetric grid needs positive extents"));
        }
        if nr < 3 || ntau < 3 || ntau % 2 == 0 {
            return Err(invalid("axisymmetric grid needs nr >= 3 and odd ntau >= 3"));
        }
        Ok(Self { r_max, rtau, nr, ntau })
    }

    pub fn hr(&self) -> f64 {
        self.r_max / (self.nr - 1) as f64
    }

    pub fn htau(&self) -> f64 {
        2.0 * self.rtau / (self.ntau - 1) as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.hr()
    }

    pub fn tau(&self, k: usize) -> f64 {
        -self.rtau + k as f64 * self.htau()
    }

    pub fn len(&self) -> usize {
        self.nr * self.ntau
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.ntau + k
    }

    /// Volume in `H^1` of the annular cell around ring `i`.
    pub fn cell_volume(&self, i: usize) -> f64 {
        let (hr, ht) = (self.hr(), self.htau());
        if i == 0 {
            std::f64::consts::PI * (hr / 2.0).powi(2) * ht
        } else {
            2.0 * std::f64::consts::PI * self.r(i) * hr * ht
        }
    }

    /// Samples `f(r, tau)`; boundary nodes are zero.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.nr {
            for k in 0..self.ntau {
                let boundary = i == self.nr - 1 || k == 0 || k == self.ntau - 1;
                v.push(if boundary { 0.0 } else { f(self.r(i), self.tau(k)) });
            }
        }
        v
    }

    pub fn l1_norm(&self, u: &[f64]) -> f64 {
        (0..self.nr)
            .map(|i| {
                let row = &u[i * self.ntau..(i + 1) * self.ntau];
                self.cell_volume(i) * row.iter().map(|v| v.abs()).sum::<f64>()
            })
            .sum()
    }
}

/// Solves a tridiagonal system in place (`sub[0]` and `sup[n-1]` unused).
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], work: &mut [f64]) {
    let n = rhs.len();
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        work[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * work[i];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= work[i + 1] * rhs[i + 1];
    }
}

#[derive(Debug, Clone)]
pub struct AxiFlow {
    grid: AxiGrid,
    max_dt: f64,
    col: Vec<f64>,
    work: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl AxiFlow {
    pub fn new(grid: AxiGrid) -> Self {
        let n = grid.nr.max(grid.ntau);
        Self {
            grid,
            max_dt: f64::INFINITY,
            col: vec![0.0; n],
            work: vec![0.0; n],
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    /// Caps the substep length used by [`LinearFlow::advance`].
    pub fn with_max_dt(mut self, dt: f64) -> Self {
        self.max_dt = dt;
        self
    }

    pub fn grid(&self) -> &AxiGrid {
        &self.grid
    }

    /// One backward Euler step in `r`, then one in `tau`.
    pub fn step(&mut self, u: &mut [f64], dt: f64) {
        let g = self.grid;
        let (hr, ht) = (g.hr(), g.htau());
        let m = g.nr - 1; // unknown rings 0..m-1; ring m is the wall
        for i in 0..m {
            let (lo, hi) = if i == 0 {
                (0.0, 4.0 / (hr * hr))
            } else {
                let ri = g.r(i);
                ((ri - hr / 2.0) / (ri * hr * hr), (ri + hr / 2.0) / (ri * hr * hr))
            };
            self.sub[i] = -dt * lo;
            self.sup[i] = -dt * hi;
            self.diag[i] = 1.0 + dt * (lo + hi);
        }
        for k in 1..g.ntau - 1 {
            for i in 0..m {
                self.col[i] = u[g.index(i, k)];
            }
            thomas(
                &self.sub[..m],
                &self.diag[..m],
                &self.sup[..m],
                &mut self.col[..m],
                &mut self.work[..m],
            );
            for i in 0..m {
                u[g.index(i, k)] = self.col[i];
            }
        }
        let nk = g.ntau - 2;
        for i in 1..m {
            let c = dt * 4.0 * g.r(i).powi(2) / (ht * ht);
            self.sub[..nk].fill(-c);
            self.sup[..nk].fill(-c);
            self.diag[..nk].fill(1.0 + 2.0 * c);
            let row = &mut u[g.index(i, 1)..g.index(i, 1) + nk];
            thomas(
                &self.sub[..nk],
                &self.diag[..nk],
                &self.sup[..nk],
                row,
                &mut self.work[..nk],
            );
        }
    }
}

impl LinearFlow for AxiFlow {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn advance(&mut self, u: &mut [f64], dt: f64) -> Result<usize> {
        let n = if self.max_dt.is_finite() {
            crate::semigroup::substeps(dt, self.max_dt)
        } else {
            1
        };
        let h = dt / n as f64;
        for _ in 0..n {
            self.step(u, h);
        }
        Ok(n)
    }

    fn default_dt(&self) -> f64 {
        self.grid.hr().powi(2) / 4.0
    }

    fn l1_norm(&self, u: &[f64]) -> f64 {
        self.grid.l1_norm(u)
    }
}
