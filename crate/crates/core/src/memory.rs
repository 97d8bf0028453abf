//! Product-integration quadrature for the weakly singular memory integral
//! `int_0^t (t - s)^-gamma F(s) ds` and the Riemann–Liouville integral.
//!
//! On a node set `0 = t_0 < t_1 < ...` the smooth factor is taken constant on
//! each `[t_j, t_{j+1})` and the kernel is integrated exactly:
//! `w_{k,j} = ((t_k - t_j)^(1-gamma) - (t_k - t_{j+1})^(1-gamma)) / (1 - gamma)`.
//! Weights are nonnegative and sum to `t_k^(1-gamma) / (1 - gamma)`.

use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, GridSpec};

/// `int_{t-a}^{t-b} (t - s)^-gamma ds = (a^beta - b^beta) / beta` for `a >= b >= 0`,
/// `beta = 1 - gamma`, evaluated without cancellation when `a ~ b`.
fn kernel_integral(beta: f64, a: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return a.powf(beta) / beta;
    }
    let bb = b.powf(beta);
    bb * (beta * ((a - b) / b).ln_1p()).exp_m1() / beta
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTable {
    gamma: f64,
    nodes: Vec<f64>,
}

impl QuadratureTable {
    pub fn new(gamma: f64, nodes: Vec<f64>) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(invalid(format!(
                "memory exponent gamma must lie in [0, 1), got {gamma}"
            )));
        }
        match nodes.first() {
            Some(&t0) if t0 == 0.0 => {}
            _ => return Err(invalid("time nodes must start at 0")),
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(invalid(format!(
                "time nodes must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { gamma, nodes })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn push_node(&mut self, t: f64) -> Result<()> {
        let last = *self.nodes.last().expect("table always holds t_0");
        if !(t > last) || !t.is_finite() {
            return Err(invalid(format!("new node {t} does not follow {last}")));
        }
        self.nodes.push(t);
        Ok(())
    }

    /// `w_{k,j}` for `j < k`.
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        debug_assert!(j < k && k < self.nodes.len());
        let tk = self.nodes[k];
        kernel_integral(1.0 - self.gamma, tk - self.nodes[j], tk - self.nodes[j + 1])
    }

    /// All weights `w_{k,0..k}`.
    pub fn row(&self, k: usize) -> Vec<f64> {
        (0..k).map(|j| self.weight(k, j)).collect()
    }

    /// `t_k^(1-gamma) / (1 - gamma)`, the exact kernel integral over `[0, t_k]`.
    pub fn row_total(&self, k: usize) -> f64 {
        let beta = 1.0 - self.gamma;
        self.nodes[k].powf(beta) / beta
    }
}

/// Product-integration weights for `gamma` on the given nodes.
pub fn build_weights(gamma: f64, nodes: &[f64]) -> Result<QuadratureTable> {
    QuadratureTable::new(gamma, nodes.to_vec())
}

/// Stored nonlinear terms `G_j` on the intervals `[t_j, t_{j+1})`.
///
/// Terms are kept in single precision: a refined blow-up run stores a few
/// hundred full-grid fields. Rounding is monotone, so ordered histories stay
/// ordered; sums are accumulated in double precision.
#[derive(Debug, Clone)]
pub struct MemoryHistory {
    grid: Option<GridSpec>,
    size: usize,
    table: QuadratureTable,
    terms: Vec<Vec<f32>>,
}

impl MemoryHistory {
    pub fn new(gamma: f64, grid: GridSpec) -> Result<Self> {
        let mut h = Self::with_size(gamma, grid.len())?;
        h.grid = Some(grid);
        Ok(h)
    }

    /// History for fields of `size` nodes on an arbitrary mesh.
    pub fn with_size(gamma: f64, size: usize) -> Result<Self> {
        Ok(Self {
            grid: None,
            size,
            table: QuadratureTable::new(gamma, vec![0.0])?,
            terms: Vec::new(),
        })
    }

    /// Number of completed steps.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn table(&self) -> &QuadratureTable {
        &self.table
    }

    /// Current time `t_{len}`.
    pub fn time(&self) -> f64 {
        self.table.nodes[self.terms.len()]
    }

    /// Records `G` for the interval from the current time to `t_next`.
    pub fn push(&mut self, term: &Field, t_next: f64) -> Result<()> {
        if self.grid.as_ref() != Some(term.grid()) {
            return Err(invalid("history term grid does not match"));
        }
        term.check_finite()?;
        let values = to_single(term.values())
            .ok_or_else(|| Error::NumericDomain("history term exceeds single-precision range".into()))?;
        self.push_values(values, t_next)
    }

    pub(crate) fn push_values(&mut self, values: Vec<f32>, t_next: f64) -> Result<()> {
        if values.len() != self.size {
            return Err(invalid("history term size does not match"));
        }
        self.table.push_node(t_next)?;
        self.terms.push(values);
        Ok(())
    }

    /// `sum_{j<k} w_{k,j} G_j` into `out`.
    pub fn eval_into(&self, k: usize, out: &mut [f64]) -> Result<()> {
        if k > self.terms.len() {
            return Err(Error::State(format!(
                "memory evaluated at step {k} but only {} steps are stored",
                self.terms.len()
            )));
        }
        if out.len() != self.size {
            return Err(invalid("output size does not match history"));
        }
        out.fill(0.0);
        for j in 0..k {
            let w = self.table.weight(k, j);
            for (o, g) in out.iter_mut().zip(&self.terms[j]) {
                *o += w * f64::from(*g);
            }
        }
        Ok(())
    }

    pub fn eval(&self, k: usize) -> Result<Field> {
        let grid = self
            .grid
            .ok_or_else(|| Error::State("history is not attached to a grid".into()))?;
        let mut out = Field::zeros(grid);
        self.eval_into(k, out.values_mut())?;
        Ok(out)
    }
}

/// Rounds to single precision; `None` if any value overflows.
pub(crate) fn to_single(values: &[f64]) -> Option<Vec<f32>> {
    let out: Vec<f32> = values.iter().map(|v| *v as f32).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Memory integral at step `k`.
pub fn eval_memory(history: &MemoryHistory, k: usize) -> Result<Field> {
    history.eval(k)
}

/// `I^alpha f(t_k) = Gamma(alpha)^-1 int_0^{t_k} (t_k - s)^(alpha - 1) f(s) ds`
/// at every node, with `f` on each interval replaced by the mean of its
/// endpoint samples (the trapezoid rule when `alpha = 1`).
pub fn fractional_integral(alpha: f64, nodes: &[f64], samples: &[f64]) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("fractional order must lie in (0, 1], got {alpha}")));
    }
    if nodes.len() != samples.len() {
        return Err(invalid(format!("{} nodes but {} samples", nodes.len(), samples.len())));
    }
    let table = build_weights(1.0 - alpha, nodes)?;
    let scale = 1.0 / gamma_fn(alpha);
    let means: Vec<f64> = samples.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    Ok((0..nodes.len())
        .map(|k| scale * (0..k).map(|j| table.weight(k, j) * means[j]).sum::<f64>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(dt: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_weights(1.0, &[0.0, 1.0]).is_err());
        assert!(build_weights(-0.1, &[0.0, 1.0]).is_err());
        assert!(build_weights(0.5, &[0.0, 1.0, 1.0]).is_err());
        assert!(build_weights(0.5, &[0.1, 1.0]).is_err());
        assert!(build_weights(0.5, &[]).is_err());
        assert!(fractional_integral(0.0, &[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(fractional_integral(1.5, &[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(fractional_integral(0.5, &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn gamma_zero_is_rectangle_rule() {
        let t = build_weights(0.0, &uniform(0.25, 8)).unwrap();
        for k in 1..=8 {
            for w in t.row(k) {
                assert!((w - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rows_exact_on_constants_nonuniform() {
        let mut nodes = vec![0.0];
        let mut t = 0.0;
        for i in 0..300 {
            t += 1e-3 * (1.0 + (i as f64 * 0.37).sin().abs() * 5.0);
            nodes.push(t);
        }
        for gamma in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let table = build_weights(gamma, &nodes).unwrap();
            for k in 1..nodes.len() {
                let row = table.row(k);
                assert!(row.iter().all(|w| *w >= 0.0));
                let s: f64 = row.iter().sum();
                let exact = table.row_total(k);
                assert!(((s - exact) / exact).abs() < 1e-12, "gamma {gamma} k {k}");
            }
        }
    }

    #[test]
    fn linear_integrand_against_beta_function() {
        // int_0^1 (1 - s)^{-1/2} s ds = B(2, 1/2) = 4/3; midpoint sampling
        let nodes = uniform(1e-3, 1000);
        let table = build_weights(0.5, &nodes).unwrap();
        let k = nodes.len() - 1;
        let s: f64 = (0..k)
            .map(|j| table.weight(k, j) * 0.5 * (nodes[j] + nodes[j + 1]))
            .sum();
        assert!((s - 4.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn history_examples() {
        let g = GridSpec::cube(1.0, 1.0, 3).unwrap();
        let mut h = MemoryHistory::new(0.5, g).unwrap();
        assert_eq!(h.eval(0).unwrap().sup_norm(), 0.0);
        assert!(matches!(h.eval(1), Err(Error::State(_))));

        let c = Field::from_fn(g, |_, _, _| 2.0);
        let mut t = 0.0;
        for i in 0..50 {
            t += 0.01 * (1.0 + (i % 3) as f64);
            h.push(&c, t).unwrap();
        }
        let m = h.eval(50).unwrap();
        let expect = 2.0 * t.sqrt() / 0.5;
        for v in m.values() {
            assert!(((v - expect) / expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_impulse_decays() {
        let g = GridSpec::cube(1.0, 1.0, 3).unwrap();
        let mut h = MemoryHistory::new(0.3, g).unwrap();
        h.push(&Field::from_fn(g, |_, _, _| 1.0), 0.1).unwrap();
        let zero = Field::zeros(g);
        let mut prev = f64::INFINITY;
        for k in 1..20 {
            if k > 1 {
                h.push(&zero, 0.1 * k as f64).unwrap();
            }
            let v = h.eval(k).unwrap().values()[0];
            assert!((v - h.table().weight(k, 0)).abs() < 1e-15);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn history_rejects_non_finite_and_stale_time() {
        let g = GridSpec::cube(1.0, 1.0, 3).unwrap();
        let mut h = MemoryHistory::new(0.5, g).unwrap();
        let mut bad = Field::zeros(g);
        bad.values_mut()[0] = f64::NAN;
        assert!(h.push(&bad, 0.1).is_err());
        assert!(h.push(&Field::zeros(g), 0.0).is_err());
    }

    #[test]
    fn fractional_integral_examples() {
        let nodes = uniform(1e-3, 1000);
        // alpha = 1: trapezoid running integral; exact on linear f.
        let f: Vec<f64> = nodes.iter().map(|t| 3.0 * t + 1.0).collect();
        let i1 = fractional_integral(1.0, &nodes, &f).unwrap();
        for (t, v) in nodes.iter().zip(&i1) {
            assert!((v - (1.5 * t * t + t)).abs() < 1e-12);
        }
        // I^alpha 1 = t^alpha / Gamma(alpha + 1)
        for alpha in [0.1, 0.5, 0.9] {
            let ones = vec![1.0; nodes.len()];
            let ia = fractional_integral(alpha, &nodes, &ones).unwrap();
            for (t, v) in nodes.iter().zip(&ia) {
                let exact = t.powf(alpha) / gamma_fn(alpha + 1.0);
                assert!((v - exact).abs() <= 1e-13 * exact.max(1.0));
            }
        }
        // I^{1/2} s at t = 1 equals 1 / Gamma(5/2)
        let ia = fractional_integral(0.5, &nodes, &nodes).unwrap();
        assert!((ia[1000] - 1.0 / gamma_fn(2.5)).abs() < 1e-3);
    }
}
