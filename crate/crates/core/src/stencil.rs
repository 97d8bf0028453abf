//! Finite-difference sub-Laplacian and horizontal gradient on an `H^1` grid.
//!
//! Two discretizations of `Delta_H = X^2 + Y^2` are provided:
//!
//! * [`Stencil::Centered`] discretizes the expanded operator
//!   `u_xx + u_yy + 4(x^2 + y^2) u_tt + 4(x u_yt - y u_xt)` with second-order
//!   centered differences and 4-point cross stencils. It is exact on
//!   quadratics but its cross stencils carry negative off-diagonal weights,
//!   so an explicit step with it is not order preserving.
//! * [`Stencil::Monotone`] discretizes each square `X^2`, `Y^2` as a second
//!   difference along the flow line of the field. The line through node
//!   `(i, j, k)` in direction `X` moves `s = -2 y h_x / h_tau` central cells
//!   per horizontal cell; the second difference is split between the two
//!   lattice directions `(1, floor(s))` and `(1, floor(s) + 1)` with convex
//!   weights. All off-diagonal weights are nonnegative and every column sums
//!   to zero, so explicit steps below [`SubLaplacian::stable_dt`] preserve
//!   order and mass. The price is an extra central diffusion
//!   `theta (1 - theta) h_tau^2 / h_x^2` where `theta` is the fractional part
//!   of `s`; it vanishes on lattice-commensurate grids (`h_tau = 2 h_x h_y / m`).
//!
//! Boundary nodes are held at zero (homogeneous Dirichlet closure) and
//! neighbours that fall outside the box read as zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Field, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    Centered,
    #[default]
    Monotone,
}

impl std::str::FromStr for Stencil {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "centered" | "centred" => Ok(Stencil::Centered),
            "monotone" => Ok(Stencil::Monotone),
            other => Err(invalid(format!(
                "unknown stencil '{other}' (expected centered|monotone)"
            ))),
        }
    }
}

impl std::fmt::Display for Stencil {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stencil::Centered => "centered",
            Stencil::Monotone => "monotone",
        })
    }
}

/// One stencil weight: neighbour offset and coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub di: isize,
    pub dj: isize,
    pub dk: isize,
    pub coef: f64,
}

/// The assembled operator. Coefficients depend on `(x, y)` only, so one tap
/// list per interior `(i, j)` column describes every row.
#[derive(Debug, Clone)]
pub struct SubLaplacian {
    grid: GridSpec,
    stencil: Stencil,
    columns: Vec<Vec<Tap>>,
}

const SNAP: f64 = 1e-12;

fn lattice_split(s: f64) -> (isize, f64) {
    let mut m = s.floor();
    let mut theta = s - m;
    if theta < SNAP {
        theta = 0.0;
    } else if 1.0 - theta < SNAP {
        m += 1.0;
        theta = 0.0;
    }
    (m as isize, theta)
}

fn push_directional(taps: &mut Vec<Tap>, along_x: bool, s: f64, h: f64) {
    let (m, theta) = lattice_split(s);
    let w = 1.0 / (h * h);
    let (di, dj) = if along_x { (1, 0) } else { (0, 1) };
    for (shift, weight) in [(m, 1.0 - theta), (m + 1, theta)] {
        if weight == 0.0 {
            continue;
        }
        taps.push(Tap {
            di,
            dj,
            dk: shift,
            coef: weight * w,
        });
        taps.push(Tap {
            di: -di,
            dj: -dj,
            dk: -shift,
            coef: weight * w,
        });
    }
}

impl SubLaplacian {
    pub fn new(grid: GridSpec, stencil: Stencil) -> Self {
        let (hx, hy, ht) = (grid.hx(), grid.hy(), grid.htau());
        let mut columns = Vec::with_capacity(grid.nx * grid.ny);
        for i in 0..grid.nx {
            let x = grid.x(i);
            for j in 0..grid.ny {
                let y = grid.y(j);
                if i == 0 || j == 0 || i == grid.nx - 1 || j == grid.ny - 1 {
                    columns.push(Vec::new());
                    continue;
                }
                let mut taps = Vec::with_capacity(15);
                match stencil {
                    Stencil::Centered => {
                        let c = 4.0 * (x * x + y * y);
                        let center = -2.0 / (hx * hx) - 2.0 / (hy * hy) - 2.0 * c / (ht * ht);
                        taps.push(Tap {
                            di: 0,
                            dj: 0,
                            dk: 0,
                            coef: center,
                        });
                        for d in [1, -1] {
                            taps.push(Tap {
                                di: d,
                                dj: 0,
                                dk: 0,
                                coef: 1.0 / (hx * hx),
                            });
                            taps.push(Tap {
                                di: 0,
                                dj: d,
                                dk: 0,
                                coef: 1.0 / (hy * hy),
                            });
                        }
                        if c != 0.0 {
                            for d in [1, -1] {
                                taps.push(Tap {
                                    di: 0,
                                    dj: 0,
                                    dk: d,
                                    coef: c / (ht * ht),
                                });
                            }
                        }
                        // 4x u_{y tau}
                        let a = x / (hy * ht);
                        if a != 0.0 {
                            for (dj, dk, sgn) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                                taps.push(Tap {
                                    di: 0,
                                    dj,
                                    dk,
                                    coef: sgn * a,
                                });
                            }
                        }
                        // -4y u_{x tau}
                        let b = -y / (hx * ht);
                        if b != 0.0 {
                            for (di, dk, sgn) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                                taps.push(Tap {
                                    di,
                                    dj: 0,
                                    dk,
                                    coef: sgn * b,
                                });
                            }
                        }
                    }
                    Stencil::Monotone => {
                        let center = -2.0 / (hx * hx) - 2.0 / (hy * hy);
                        taps.push(Tap {
                            di: 0,
                            dj: 0,
                            dk: 0,
                            coef: center,
                        });
                        push_directional(&mut taps, true, -2.0 * y * hx / ht, hx);
                        push_directional(&mut taps, false, 2.0 * x * hy / ht, hy);
                    }
                }
                columns.push(taps);
            }
        }
        Self { grid, stencil, columns }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    /// Taps of the column through interior node `(i, j, *)`; empty on the boundary.
    pub fn taps(&self, i: usize, j: usize) -> &[Tap] {
        &self.columns[i * self.grid.ny + j]
    }

    /// `out = L u` on raw node arrays. Boundary entries of `out` are zero.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        debug_assert_eq!(u.len(), g.len());
        debug_assert_eq!(out.len(), g.len());
        out.fill(0.0);
        let nt = g.ntau as isize;
        for i in 1..g.nx - 1 {
            for j in 1..g.ny - 1 {
                let dst = g.index(i, j, 0);
                for tap in self.taps(i, j) {
                    let src = g.index((i as isize + tap.di) as usize, (j as isize + tap.dj) as usize, 0);
                    let lo = 1.max(-tap.dk);
                    let hi = (nt - 2).min(nt - 1 - tap.dk);
                    if lo > hi {
                        continue;
                    }
                    let (lo, hi) = (lo as usize, hi as usize);
                    let shifted = (src as isize + tap.dk) as usize;
                    let dst_slice = &mut out[dst + lo..=dst + hi];
                    let src_slice = &u[shifted + lo..=shifted + hi];
                    for (o, v) in dst_slice.iter_mut().zip(src_slice) {
                        *o += tap.coef * v;
                    }
                }
            }
        }
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        if u.grid() != &self.grid {
            return Err(invalid("field grid does not match operator grid"));
        }
        u.check_finite()?;
        let mut out = Field::zeros(self.grid);
        self.apply_into(u.values(), out.values_mut());
        Ok(out)
    }

    /// Largest explicit Euler step guaranteed stable for this operator.
    ///
    /// Computed row by row from the assembled taps as `2 / sum |coef|`. For the
    /// monotone stencil this equals `1 / |diag|`, the largest step for which
    /// `I + dt L` has no negative entry. For the centered stencil it bounds the
    /// spectral radius of the (symmetric, negative semidefinite) matrix.
    pub fn stable_dt(&self) -> f64 {
        self.columns
            .iter()
            .filter(|t| !t.is_empty())
            .map(|taps| 2.0 / taps.iter().map(|t| t.coef.abs()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Off-diagonal entries of the matrix row at interior node `(i, j, k)`,
    /// as `(flat index, coefficient)`, plus the diagonal coefficient.
    pub fn row(&self, i: usize, j: usize, k: usize) -> (f64, Vec<(usize, f64)>) {
        let g = &self.grid;
        let mut diag = 0.0;
        let mut off = Vec::new();
        for tap in self.taps(i, j) {
            let kk = k as isize + tap.dk;
            if kk < 0 || kk >= g.ntau as isize {
                continue;
            }
            let (ii, jj) = ((i as isize + tap.di) as usize, (j as isize + tap.dj) as usize);
            if (ii, jj, kk as usize) == (i, j, k) {
                diag += tap.coef;
            } else {
                off.push((g.index(ii, jj, kk as usize), tap.coef));
            }
        }
        (diag, off)
    }

    /// Most negative off-diagonal coefficient over all rows (0 if none).
    pub fn min_offdiag(&self) -> f64 {
        self.columns
            .iter()
            .flat_map(|taps| taps.iter())
            .filter(|t| (t.di, t.dj, t.dk) != (0, 0, 0))
            .map(|t| t.coef)
            .fold(0.0, f64::min)
    }
}

/// Centered finite-difference sub-Laplacian (zero on boundary nodes).
pub fn apply_sublaplacian(u: &Field) -> Result<Field> {
    SubLaplacian::new(*u.grid(), Stencil::Centered).apply(u)
}

/// Centered differences of `X = d_x - 2y d_tau` and `Y = d_y + 2x d_tau`
/// at interior nodes; boundary nodes are zero.
pub fn apply_horizontal_gradient(u: &Field) -> Result<(Field, Field)> {
    u.check_finite()?;
    let g = *u.grid();
    let (hx, hy, ht) = (g.hx(), g.hy(), g.htau());
    let mut xu = Field::zeros(g);
    let mut yu = Field::zeros(g);
    for i in 1..g.nx - 1 {
        let x = g.x(i);
        for j in 1..g.ny - 1 {
            let y = g.y(j);
            for k in 1..g.ntau - 1 {
                let dt = (u.at(i, j, k + 1) - u.at(i, j, k - 1)) / (2.0 * ht);
                let dx = (u.at(i + 1, j, k) - u.at(i - 1, j, k)) / (2.0 * hx);
                let dy = (u.at(i, j + 1, k) - u.at(i, j - 1, k)) / (2.0 * hy);
                let idx = g.index(i, j, k);
                xu.values_mut()[idx] = dx - 2.0 * y * dt;
                yu.values_mut()[idx] = dy + 2.0 * x * dt;
            }
        }
    }
    Ok((xu, yu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(1.0, 1.5, 2.0, 11, 13, 17).unwrap()
    }

    /// Max deviation from `expected` over nodes at least `layers` from the boundary.
    fn interior_err(f: &Field, layers: usize, expected: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let g = f.grid();
        let mut err: f64 = 0.0;
        for i in layers..g.nx - layers {
            for j in layers..g.ny - layers {
                for k in layers..g.ntau - layers {
                    let e = expected(g.x(i), g.y(j), g.tau(k));
                    err = err.max((f.at(i, j, k) - e).abs());
                }
            }
        }
        err
    }

    #[test]
    fn centered_exact_on_examples() {
        let g = grid();
        let lx2 = apply_sublaplacian(&Field::from_fn(g, |x, _, _| x * x)).unwrap();
        assert!(interior_err(&lx2, 1, |_, _, _| 2.0) < 1e-10);
        let lt = apply_sublaplacian(&Field::from_fn(g, |_, _, t| t)).unwrap();
        assert!(interior_err(&lt, 1, |_, _, _| 0.0) < 1e-10);
        let lt2 = apply_sublaplacian(&Field::from_fn(g, |_, _, t| t * t)).unwrap();
        assert!(interior_err(&lt2, 1, |x, y, _| 8.0 * (x * x + y * y)) < 1e-9);
    }

    #[test]
    fn gradient_examples() {
        let g = grid();
        let (xu, yu) = apply_horizontal_gradient(&Field::from_fn(g, |x, _, _| x)).unwrap();
        assert!(interior_err(&xu, 1, |_, _, _| 1.0) < 1e-12);
        assert!(interior_err(&yu, 1, |_, _, _| 0.0) < 1e-12);
        let (xu, yu) = apply_horizontal_gradient(&Field::from_fn(g, |_, _, t| t)).unwrap();
        assert!(interior_err(&xu, 1, |_, y, _| -2.0 * y) < 1e-12);
        assert!(interior_err(&yu, 1, |x, _, _| 2.0 * x) < 1e-12);
    }

    #[test]
    fn commutator_on_tau() {
        // [X, Y] = 4 d_tau, so (XY - YX) tau = 4 away from the boundary.
        let g = grid();
        let u = Field::from_fn(g, |_, _, t| t);
        let (xu, yu) = apply_horizontal_gradient(&u).unwrap();
        let (xyu, _) = apply_horizontal_gradient(&yu).unwrap();
        let (_, yxu) = apply_horizontal_gradient(&xu).unwrap();
        let mut c = xyu.clone();
        c.values_mut().iter_mut().zip(yxu.values()).for_each(|(a, b)| *a -= b);
        assert!(interior_err(&c, 2, |_, _, _| 4.0) < 1e-10);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = grid();
        let mut u = Field::zeros(g);
        u.values_mut()[100] = f64::INFINITY;
        assert!(matches!(apply_sublaplacian(&u), Err(crate::Error::NumericDomain(_))));
        assert!(apply_horizontal_gradient(&u).is_err());
    }

    #[test]
    fn monotone_sign_pattern_and_column_sums() {
        let g = grid();
        let op = SubLaplacian::new(g, Stencil::Monotone);
        assert!(op.min_offdiag() >= 0.0);
        // Columns of the full (untruncated) matrix sum to zero: every tap
        // appears with its mirror, so total weight per row is zero.
        for i in 1..g.nx - 1 {
            for j in 1..g.ny - 1 {
                let s: f64 = op.taps(i, j).iter().map(|t| t.coef).sum();
                assert!(s.abs() < 1e-9, "row sum {s}");
            }
        }
        let centered = SubLaplacian::new(g, Stencil::Centered);
        assert!(centered.min_offdiag() < 0.0);
    }

    #[test]
    fn monotone_exact_on_lattice_commensurate_grid() {
        // h_tau = 2 h_x h_y puts every flow-line neighbour on a node.
        let h = 0.1;
        let g = GridSpec::new(10.0 * h, 10.0 * h, 30.0 * 2.0 * h * h, 21, 21, 61).unwrap();
        let op = SubLaplacian::new(g, Stencil::Monotone);
        for taps in op.columns.iter().filter(|t| !t.is_empty()) {
            assert_eq!(taps.len(), 5);
        }
        let check = |f: &dyn Fn(f64, f64, f64) -> f64, lf: &dyn Fn(f64, f64, f64) -> f64| {
            let u = Field::from_fn(g, f);
            let lu = op.apply(&u).unwrap();
            // every neighbour of a node >= 12 layers in stays inside the box
            interior_err(&lu, 12, lf)
        };
        assert!(check(&|x, _, _| x * x, &|_, _, _| 2.0) < 1e-9);
        assert!(check(&|_, _, t| t, &|_, _, _| 0.0) < 1e-9);
        assert!(check(&|_, _, t| t * t, &|x, y, _| 8.0 * (x * x + y * y)) < 1e-9);
    }

    #[test]
    fn stencil_parses() {
        assert_eq!("Centered".parse::<Stencil>().unwrap(), Stencil::Centered);
        assert_eq!("monotone".parse::<Stencil>().unwrap(), Stencil::Monotone);
        assert!("upwind".parse::<Stencil>().is_err());
    }
}
