//! Exact arithmetic on the Heisenberg group `H^n = R^n x R^n x R`.
//!
//! Points are written `(x, y, tau)` with product
//! `(x, y, tau) o (x', y', tau') = (x + x', y + y', tau + tau' + 2(x.y' - x'.y))`,
//! parabolic dilations `(x, y, tau) -> (l x, l y, l^2 tau)` and the gauge
//! `|eta| = ((|x|^2 + |y|^2)^2 + tau^2)^(1/4)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    x: Vec<f64>,
    y: Vec<f64>,
    tau: f64,
}

impl GroupPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>, tau: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid(format!(
                "horizontal components differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(invalid("group dimension n must be at least 1"));
        }
        Ok(Self { x, y, tau })
    }

    /// A point of the first Heisenberg group `H^1`.
    pub fn h1(x: f64, y: f64, tau: f64) -> Self {
        Self {
            x: vec![x],
            y: vec![y],
            tau,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            tau: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(invalid(format!(
                "dimension mismatch: H^{} vs H^{}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let symplectic: f64 = self
            .x
            .iter()
            .zip(&other.y)
            .zip(other.x.iter().zip(&self.y))
            .map(|((x, y2), (x2, y))| x * y2 - x2 * y)
            .sum();
        Ok(Self {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a + b).collect(),
            tau: self.tau + other.tau + 2.0 * symplectic,
        })
    }

    pub fn inverse(&self) -> Self {
        Self {
            x: self.x.iter().map(|v| -v).collect(),
            y: self.y.iter().map(|v| -v).collect(),
            tau: -self.tau,
        }
    }

    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("dilation factor must be positive, got {lambda}")));
        }
        Ok(Self {
            x: self.x.iter().map(|v| lambda * v).collect(),
            y: self.y.iter().map(|v| lambda * v).collect(),
            tau: lambda * lambda * self.tau,
        })
    }

    /// Squared Euclidean norm of the horizontal part, `|x|^2 + |y|^2`.
    pub fn horizontal_norm_sq(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|v| v * v).sum()
    }

    pub fn koranyi_norm(&self) -> f64 {
        koranyi_gauge(self.horizontal_norm_sq(), self.tau)
    }

    /// `d(a, b) = |b^{-1} o a|`.
    pub fn koranyi_distance(&self, other: &Self) -> Result<f64> {
        Ok(other.inverse().compose(self)?.koranyi_norm())
    }

    /// Largest absolute coordinate difference; used for tolerance checks.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        let h = self
            .x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(h.max((self.tau - other.tau).abs()))
    }
}

/// Korányi gauge from `r2 = |x|^2 + |y|^2` and the central coordinate.
pub fn koranyi_gauge(r2: f64, tau: f64) -> f64 {
    (r2 * r2 + tau * tau).sqrt().sqrt()
}
