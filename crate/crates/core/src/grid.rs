//! Uniform truncated boxes in `H^1` and scalar fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Box `[-rx, rx] x [-ry, ry] x [-rtau, rtau]` with `nx x ny x ntau` nodes.
///
/// Node counts are odd so that the origin is a node. Fields are stored with
/// the central coordinate varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rx: f64,
    pub ry: f64,
    pub rtau: f64,
    pub nx: usize,
    pub ny: usize,
    pub ntau: usize,
}

impl GridSpec {
    pub fn new(rx: f64, ry: f64, rtau: f64, nx: usize, ny: usize, ntau: usize) -> Result<Self> {
        for (name, r) in [("rx", rx), ("ry", ry), ("rtau", rtau)] {
            if !(r > 0.0) || !r.is_finite() {
                return Err(invalid(format!("grid half-width {name} must be positive, got {r}")));
            }
        }
        for (name, n) in [("nx", nx), ("ny", ny), ("ntau", ntau)] {
            if n < 3 || n % 2 == 0 {
                return Err(invalid(format!("grid node count {name} must be odd and >= 3, got {n}")));
            }
        }
        Ok(Self {
            rx,
            ry,
            rtau,
            nx,
            ny,
            ntau,
        })
    }

    /// `n^3` nodes on the cube `[-r, r]^2 x [-rtau, rtau]`.
    pub fn cube(r: f64, rtau: f64, n: usize) -> Result<Self> {
        Self::new(r, r, rtau, n, n, n)
    }

    /// Same box, spacings halved in every direction.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
            ntau: 2 * self.ntau - 1,
            ..*self
        }
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.rx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * self.ry / (self.ny - 1) as f64
    }

    pub fn htau(&self) -> f64 {
        2.0 * self.rtau / (self.ntau - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.ntau
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy() * self.htau()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.rx + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -self.ry + j as f64 * self.hy()
    }

    pub fn tau(&self, k: usize) -> f64 {
        -self.rtau + k as f64 * self.htau()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.ntau + k
    }

    pub fn origin(&self) -> (usize, usize, usize) {
        (self.nx / 2, self.ny / 2, self.ntau / 2)
    }

    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i == self.nx - 1 || j == self.ny - 1 || k == self.ntau - 1
    }

    /// Largest `x^2 + y^2` over the box.
    pub fn max_horizontal_radius_sq(&self) -> f64 {
        self.rx * self.rx + self.ry * self.ry
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    /// Samples `f(x, y, tau)` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            let x = grid.x(i);
            for j in 0..grid.ny {
                let y = grid.y(j);
                for k in 0..grid.ntau {
                    values.push(f(x, y, grid.tau(k)));
                }
            }
        }
        Self { grid, values }
    }

    /// Unit mass concentrated on the node nearest the origin.
    pub fn spike(grid: GridSpec, height: f64) -> Self {
        let mut f = Self::zeros(grid);
        let (i, j, k) = grid.origin();
        f.values[grid.index(i, j, k)] = height;
        f
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(p) => Err(Error::NumericDomain(format!(
                "non-finite value {} at flat index {p}",
                self.values[p]
            ))),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cell-volume weighted `sum |u| h_x h_y h_tau`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Cell-volume weighted sum of the values themselves (signed mass).
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete `L^q` norm; `q = f64::INFINITY` gives the sup-norm.
    pub fn lq_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            return self.sup_norm();
        }
        if q == 1.0 {
            return self.l1_norm();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(q)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / q)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sets every boundary node to zero.
    pub fn zero_boundary(&mut self) {
        let g = self.grid;
        for i in 0..g.nx {
            for j in 0..g.ny {
                let base = g.index(i, j, 0);
                if i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1 {
                    self.values[base..base + g.ntau].fill(0.0);
                } else {
                    self.values[base] = 0.0;
                    self.values[base + g.ntau - 1] = 0.0;
                }
            }
        }
    }

    /// Largest absolute value on the boundary layer.
    pub fn boundary_sup(&self) -> f64 {
        let g = self.grid;
        let mut m: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..g.ntau {
                    if g.is_boundary(i, j, k) {
                        m = m.max(self.at(i, j, k).abs());
                    }
                }
            }
        }
        m
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn max_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max (self - other)_+` over all nodes.
    pub fn max_excess_over(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max(a - b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1.0, 1.0, 1.0, 5, 5, 5).is_ok());
        assert!(GridSpec::new(1.0, 1.0, 1.0, 4, 5, 5).is_err());
        assert!(GridSpec::new(1.0, 1.0, 1.0, 1, 5, 5).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1.0, 5, 5, 5).is_err());
        assert!(GridSpec::new(1.0, -1.0, 1.0, 5, 5, 5).is_err());
    }

    #[test]
    fn origin_is_a_node() {
        let g = GridSpec::new(2.0, 3.0, 5.0, 9, 11, 21).unwrap();
        let (i, j, k) = g.origin();
        assert_eq!((g.x(i), g.y(j), g.tau(k)), (0.0, 0.0, 0.0));
        assert!(g.hx() > 0.0 && g.hy() > 0.0 && g.htau() > 0.0);
        let r = g.refined();
        assert_eq!((r.nx, r.ny, r.ntau), (17, 21, 41));
        assert!((r.hx() - g.hx() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn field_rejects_bad_input() {
        let g = GridSpec::cube(1.0, 1.0, 3).unwrap();
        assert!(Field::from_values(g, vec![0.0; 26]).is_err());
        let mut v = vec![0.0; 27];
        v[3] = f64::NAN;
        assert!(matches!(Field::from_values(g, v), Err(Error::NumericDomain(_))));
    }

    #[test]
    fn norms() {
        let g = GridSpec::cube(1.0, 1.0, 3).unwrap();
        let f = Field::spike(g, 2.0);
        assert_eq!(f.sup_norm(), 2.0);
        assert_eq!(f.l1_norm(), 2.0);
        assert_eq!(f.lq_norm(2.0), 2.0);
        assert_eq!(f.lq_norm(f64::INFINITY), 2.0);
        let mut ones = Field::from_fn(g, |_, _, _| 1.0);
        ones.zero_boundary();
        assert_eq!(ones.sup_norm(), 1.0);
        assert_eq!(ones.values().iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(ones.boundary_sup(), 0.0);
    }
}
