//! Explicit finite-difference heat flow `u_t = Delta_H u` and decay-rate fits.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, GridSpec};
use crate::stats::{log_log_fit, LineFit};
use crate::stencil::{Stencil, SubLaplacian};

/// Homogeneous dimension of the grid engine (`n = 1`).
pub const GRID_Q: f64 = 4.0;

const DT_SLACK: f64 = 1e-12;

/// Explicit Euler heat flow on one grid with a reusable work buffer.
#[derive(Debug, Clone)]
pub struct HeatFlow {
    op: SubLaplacian,
    dt_max: f64,
    work: Vec<f64>,
}

impl HeatFlow {
    pub fn new(grid: GridSpec, stencil: Stencil) -> Self {
        let op = SubLaplacian::new(grid, stencil);
        let dt_max = op.stable_dt();
        Self {
            op,
            dt_max,
            work: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.op.grid()
    }

    pub fn operator(&self) -> &SubLaplacian {
        &self.op
    }

    pub fn stable_dt(&self) -> f64 {
        self.dt_max
    }

    /// `u <- u + dt L u` on raw node values.
    pub fn step_in_place(&mut self, u: &mut [f64], dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if dt > self.dt_max * (1.0 + DT_SLACK) {
            return Err(Error::Precondition(format!(
                "time step {dt:e} exceeds the stability bound {:e}",
                self.dt_max
            )));
        }
        if u.len() != self.work.len() {
            return Err(invalid("field size does not match heat-flow grid"));
        }
        self.op.apply_into(u, &mut self.work);
        let g = *self.op.grid();
        for i in 0..g.nx {
            for j in 0..g.ny {
                let base = g.index(i, j, 0);
                let col = &mut u[base..base + g.ntau];
                if i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1 {
                    col.fill(0.0);
                    continue;
                }
                let lu = &self.work[base..base + g.ntau];
                col[0] = 0.0;
                col[g.ntau - 1] = 0.0;
                for k in 1..g.ntau - 1 {
                    col[k] += dt * lu[k];
                }
            }
        }
        Ok(())
    }

    pub fn step(&mut self, u: &Field, dt: f64) -> Result<Field> {
        if u.grid() != self.op.grid() {
            return Err(invalid("field grid does not match heat-flow grid"));
        }
        u.check_finite()?;
        let mut out = u.clone();
        self.step_in_place(out.values_mut(), dt)?;
        Ok(out)
    }

    /// Advances by `duration` using the fewest equal steps within the bound.
    /// Returns the number of steps taken.
    pub fn advance(&mut self, u: &mut [f64], duration: f64) -> Result<usize> {
        if duration == 0.0 {
            return Ok(0);
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid(format!("duration must be nonnegative, got {duration}")));
        }
        let n = substeps(duration, self.dt_max);
        let dt = duration / n as f64;
        for _ in 0..n {
            self.step_in_place(u, dt)?;
        }
        Ok(n)
    }
}

/// Number of equal substeps of `duration` that each fit under `dt_max`.
pub fn substeps(duration: f64, dt_max: f64) -> usize {
    let n = (duration / dt_max * (1.0 - DT_SLACK)).ceil();
    (n as usize).max(1)
}

/// One explicit step with the order-preserving stencil.
pub fn heat_step(u: &Field, dt: f64) -> Result<Field> {
    heat_step_with(u, dt, Stencil::Monotone)
}

pub fn heat_step_with(u: &Field, dt: f64, stencil: Stencil) -> Result<Field> {
    HeatFlow::new(*u.grid(), stencil).step(u, dt)
}

/// Stability bound of the order-preserving stencil.
pub fn stable_dt(grid: &GridSpec) -> f64 {
    stable_dt_with(grid, Stencil::Monotone)
}

pub fn stable_dt_with(grid: &GridSpec, stencil: Stencil) -> f64 {
    SubLaplacian::new(*grid, stencil).stable_dt()
}

/// `S(t) u0` by explicit stepping.
pub fn evolve(u0: &Field, t: f64, stencil: Stencil) -> Result<Field> {
    u0.check_finite()?;
    let mut flow = HeatFlow::new(*u0.grid(), stencil);
    let mut u = u0.clone();
    flow.advance(u.values_mut(), t)?;
    Ok(u)
}

/// `-(Q/2)(1/p - 1/q)`; `f64::INFINITY` stands for the sup norm.
pub fn predicted_decay_slope(q_dim: f64, p: f64, q: f64) -> f64 {
    -(q_dim / 2.0) * (1.0 / p - 1.0 / q)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub p: f64,
    pub q: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub predicted_slope: f64,
    /// Relative loss of signed mass through the box boundary by the last time.
    pub mass_loss: f64,
}

impl DecayFit {
    pub fn relative_slope_error(&self) -> f64 {
        if self.predicted_slope == 0.0 {
            self.slope.abs()
        } else {
            ((self.slope - self.predicted_slope) / self.predicted_slope).abs()
        }
    }
}

/// Evolves `u0`, records `||u(t)||_q` at `times` and fits the log-log slope.
pub fn decay_fit(u0: &Field, p: f64, q: f64, times: &[f64], stencil: Stencil) -> Result<DecayFit> {
    if !(p >= 1.0) || !(q >= p) {
        return Err(invalid(format!(
            "norm indices must satisfy 1 <= p <= q, got p={p}, q={q}"
        )));
    }
    if times.len() < 2 {
        return Err(invalid("decay fit needs at least two sample times"));
    }
    if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("sample times must be positive and strictly increasing"));
    }
    u0.check_finite()?;
    let mass0 = u0.mass();
    let mut flow = HeatFlow::new(*u0.grid(), stencil);
    let mut u = u0.clone();
    let mut now = 0.0;
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        flow.advance(u.values_mut(), t - now)?;
        now = t;
        u.check_finite()?;
        norms.push(u.lq_norm(q));
    }
    let LineFit {
        slope,
        intercept,
        r_squared,
    } = log_log_fit(times, &norms)?;
    let mass_loss = if mass0 != 0.0 { (mass0 - u.mass()) / mass0 } else { 0.0 };
    Ok(DecayFit {
        p,
        q,
        times: times.to_vec(),
        norms,
        slope,
        intercept,
        r_squared,
        predicted_slope: predicted_decay_slope(GRID_Q, p, q),
        mass_loss,
    })
}

/// `n` log-spaced times in `[t0, t1]`.
pub fn log_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    let (a, b) = (t0.ln(), t1.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(g: GridSpec, w: f64) -> Field {
        let mut f = Field::from_fn(g, |x, y, t| (-(x * x + y * y) / (w * w) - t * t / w.powi(4)).exp());
        f.zero_boundary();
        f
    }

    #[test]
    fn zero_stays_zero() {
        let g = GridSpec::cube(1.0, 1.0, 11).unwrap();
        let z = Field::zeros(g);
        for s in [Stencil::Monotone, Stencil::Centered] {
            let out = heat_step_with(&z, stable_dt_with(&g, s), s).unwrap();
            assert!(out.values().iter().all(|v| v.to_bits() == 0));
        }
    }

    #[test]
    fn spike_mass_is_conserved_before_boundary_contact() {
        let g = GridSpec::new(2.0, 2.0, 2.0, 41, 41, 81).unwrap();
        let mut flow = HeatFlow::new(g, Stencil::Monotone);
        let mut u = Field::spike(g, 1.0 / g.cell_volume());
        let dt = flow.stable_dt();
        let m0 = u.l1_norm();
        for _ in 0..5 {
            let m = u.l1_norm();
            flow.step_in_place(u.values_mut(), dt).unwrap();
            assert!((u.l1_norm() - m).abs() < 1e-12);
            assert!(u.min_value() >= 0.0);
        }
        assert!(u.boundary_sup() == 0.0);
        assert!((u.l1_norm() - m0).abs() < 1e-12);
    }

    #[test]
    fn bump_sup_strictly_decreases() {
        let g = GridSpec::new(2.0, 2.0, 3.0, 31, 31, 41).unwrap();
        let mut flow = HeatFlow::new(g, Stencil::Monotone);
        let mut u = bump(g, 0.6);
        let dt = flow.stable_dt();
        let mut prev = u.sup_norm();
        for _ in 0..20 {
            flow.step_in_place(u.values_mut(), dt).unwrap();
            let s = u.sup_norm();
            assert!(s < prev);
            assert!(u.min_value() >= 0.0);
            prev = s;
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = GridSpec::cube(1.0, 1.0, 11).unwrap();
        let u = bump(g, 0.5);
        let dt = stable_dt(&g);
        assert!(matches!(heat_step(&u, dt * 1.01), Err(Error::Precondition(_))));
        assert!(heat_step(&u, dt).is_ok());
        assert!(heat_step(&u, -dt).is_err());
    }

    #[test]
    fn centered_bound_scales_with_tau_spacing_and_radius() {
        let a = GridSpec::new(2.0, 2.0, 1.0, 21, 21, 21).unwrap();
        let b = GridSpec::new(2.0, 2.0, 1.0, 21, 21, 41).unwrap();
        let ratio = stable_dt_with(&a, Stencil::Centered) / stable_dt_with(&b, Stencil::Centered);
        assert!(ratio > 3.5 && ratio < 4.1, "ratio {ratio}");

        let wide = GridSpec::new(4.0, 2.0, 1.0, 41, 21, 21).unwrap();
        assert!(stable_dt_with(&wide, Stencil::Centered) < stable_dt_with(&a, Stencil::Centered));
    }

    #[test]
    fn monotone_step_matrix_is_nonnegative_at_bound() {
        let g = GridSpec::new(3.0, 2.0, 1.5, 21, 17, 23).unwrap();
        let op = SubLaplacian::new(g, Stencil::Monotone);
        let dt = op.stable_dt();
        for i in 1..g.nx - 1 {
            for j in 1..g.ny - 1 {
                for k in 1..g.ntau - 1 {
                    let (diag, off) = op.row(i, j, k);
                    assert!(1.0 + dt * diag >= -1e-15);
                    assert!(off.iter().all(|(_, c)| *c >= 0.0));
                }
            }
        }
    }

    #[test]
    fn decay_fit_arguments() {
        let g = GridSpec::cube(1.0, 1.0, 11).unwrap();
        let u = bump(g, 0.4);
        assert!(decay_fit(&u, 2.0, 1.0, &[0.1, 0.2], Stencil::Monotone).is_err());
        assert!(decay_fit(&u, 0.5, 1.0, &[0.1, 0.2], Stencil::Monotone).is_err());
        assert!(decay_fit(&u, 1.0, 2.0, &[0.2, 0.1], Stencil::Monotone).is_err());
        assert_eq!(predicted_decay_slope(4.0, 2.0, 2.0), 0.0);
        assert_eq!(predicted_decay_slope(4.0, 1.0, f64::INFINITY), -2.0);
        assert_eq!(predicted_decay_slope(4.0, 1.0, 2.0), -1.0);
        let fit = decay_fit(&u, 1.0, 1.0, &[0.01, 0.02, 0.04], Stencil::Monotone).unwrap();
        assert_eq!(fit.predicted_slope, 0.0);
        assert!(fit.slope <= 1e-12);
    }

    #[test]
    fn log_spacing() {
        let t = log_spaced(0.1, 1.0, 5);
        assert!((t[0] - 0.1).abs() < 1e-15 && (t[4] - 1.0).abs() < 1e-15);
        assert!(((t[2] / t[1]) - (t[1] / t[0])).abs() < 1e-12);
    }
}
