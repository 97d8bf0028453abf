//! Monte Carlo sampling of the heat kernel `h_t` through the diffusion whose
//! generator is `Delta_H`: `dx = sqrt(2) dW_1`, `dy = sqrt(2) dW_2`,
//! `dtau = 2 (x dy - y dx)`.
//!
//! Paths are split over a fixed number of independently seeded ChaCha
//! streams. Histograms merge integer counts and scalar estimates merge in
//! stream order, so results depend only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::group::GroupPoint;

pub const DEFAULT_SUBSTEPS_PER_UNIT: f64 = 200.0;
const STREAMS: u64 = 16;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn stream_sizes(n: usize) -> Vec<(u64, usize)> {
    let s = STREAMS as usize;
    (0..STREAMS)
        .map(|k| (k, n / s + usize::from((k as usize) < n % s)))
        .collect()
}

fn path_steps(t: f64) -> usize {
    ((t * DEFAULT_SUBSTEPS_PER_UNIT).ceil() as usize).max(1)
}

/// Endpoint of one path on `[0, t]` started at the identity.
fn endpoint<R: Rng>(rng: &mut R, t: f64, steps: usize) -> [f64; 3] {
    let dt = t / steps as f64;
    let sd = (2.0 * dt).sqrt();
    let (mut x, mut y, mut tau) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..steps {
        let dx = sd * rng.sample::<f64, _>(StandardNormal);
        let dy = sd * rng.sample::<f64, _>(StandardNormal);
        // the midpoint rule gives the same increment
        tau += 2.0 * (x * dy - y * dx);
        x += dx;
        y += dy;
    }
    [x, y, tau]
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("diffusion time must be positive, got {t}")));
    }
    Ok(())
}

/// Draws `n` endpoints `xi_t`.
pub fn sample_endpoints(t: f64, n: usize, seed: u64) -> Result<Vec<GroupPoint>> {
    check_time(t)?;
    let steps = path_steps(t);
    let chunks: Vec<Vec<GroupPoint>> = stream_sizes(n)
        .into_par_iter()
        .map(|(s, m)| {
            let mut rng = stream_rng(seed, s);
            (0..m)
                .map(|_| {
                    let [x, y, tau] = endpoint(&mut rng, t, steps);
                    GroupPoint::h1(x, y, tau)
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Uniform box histogram `[-lx, lx]^2 x [-ltau, ltau]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Binning {
    pub lx: f64,
    pub ltau: f64,
    pub nb_xy: usize,
    pub nb_tau: usize,
}

impl Binning {
    pub fn new(lx: f64, ltau: f64, nb_xy: usize, nb_tau: usize) -> Result<Self> {
        if !(lx > 0.0 && ltau > 0.0) || nb_xy == 0 || nb_tau == 0 {
            return Err(invalid("histogram needs positive extents and bin counts"));
        }
        Ok(Self {
            lx,
            ltau,
            nb_xy,
            nb_tau,
        })
    }

    /// Box of `8 sqrt(t)` by `16 t` with `nb` bins per axis. It holds all but
    /// about 0.3% of the mass and commutes with parabolic dilation.
    pub fn for_time(t: f64, nb: usize) -> Self {
        Self {
            lx: 8.0 * t.sqrt(),
            ltau: 16.0 * t,
            nb_xy: nb,
            nb_tau: nb,
        }
    }

    /// Image of the binning under `delta_r`.
    pub fn dilated(&self, r: f64) -> Self {
        Self {
            lx: self.lx * r,
            ltau: self.ltau * r * r,
            ..*self
        }
    }

    pub fn len(&self) -> usize {
        self.nb_xy * self.nb_xy * self.nb_tau
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn widths(&self) -> (f64, f64) {
        (2.0 * self.lx / self.nb_xy as f64, 2.0 * self.ltau / self.nb_tau as f64)
    }

    pub fn bin_volume(&self) -> f64 {
        let (wx, wt) = self.widths();
        wx * wx * wt
    }

    fn axis(v: f64, l: f64, nb: usize) -> Option<usize> {
        if !(v >= -l && v < l) {
            return None;
        }
        Some((((v + l) / (2.0 * l) * nb as f64) as usize).min(nb - 1))
    }

    pub fn bin_of(&self, x: f64, y: f64, tau: f64) -> Option<usize> {
        let i = Self::axis(x, self.lx, self.nb_xy)?;
        let j = Self::axis(y, self.lx, self.nb_xy)?;
        let k = Self::axis(tau, self.ltau, self.nb_tau)?;
        Some((i * self.nb_xy + j) * self.nb_tau + k)
    }

    pub fn center(&self, bin: usize) -> (f64, f64, f64) {
        let (wx, wt) = self.widths();
        let k = bin % self.nb_tau;
        let j = (bin / self.nb_tau) % self.nb_xy;
        let i = bin / (self.nb_tau * self.nb_xy);
        (
            -self.lx + (i as f64 + 0.5) * wx,
            -self.lx + (j as f64 + 0.5) * wx,
            -self.ltau + (k as f64 + 0.5) * wt,
        )
    }
}

/// Histogram estimate of `h_t`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelEstimate {
    pub t: f64,
    pub samples: usize,
    pub binning: Binning,
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl KernelEstimate {
    pub fn density(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / (self.samples as f64 * self.binning.bin_volume())
    }

    /// Binomial standard error of [`Self::density`].
    pub fn std_error(&self, bin: usize) -> f64 {
        let n = self.samples as f64;
        let p = self.counts[bin] as f64 / n;
        (p * (1.0 - p) / n).sqrt() / self.binning.bin_volume()
    }

    /// Density and standard error of the bin containing `eta`.
    pub fn density_at(&self, eta: &GroupPoint) -> Option<(f64, f64)> {
        if eta.dim() != 1 {
            return None;
        }
        let b = self.binning.bin_of(eta.x()[0], eta.y()[0], eta.tau())?;
        Some((self.density(b), self.std_error(b)))
    }

    /// Sum of density times bin volume.
    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.samples as f64
    }

    pub fn total_mass_std_error(&self) -> f64 {
        let p = self.total_mass();
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|b| self.density(b)).collect()
    }
}

/// Histogram of `n` endpoints at time `t` on the default binning.
pub fn mc_kernel_sample(t: f64, n: usize, seed: u64) -> Result<KernelEstimate> {
    mc_kernel_sample_binned(t, n, seed, Binning::for_time(t, 8))
}

pub fn mc_kernel_sample_binned(t: f64, n: usize, seed: u64, binning: Binning) -> Result<KernelEstimate> {
    check_time(t)?;
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let steps = path_steps(t);
    let partial: Vec<(Vec<u64>, u64)> = stream_sizes(n)
        .into_par_iter()
        .map(|(s, m)| {
            let mut rng = stream_rng(seed, s);
            let mut counts = vec![0u64; binning.len()];
            let mut outside = 0u64;
            for _ in 0..m {
                let [x, y, tau] = endpoint(&mut rng, t, steps);
                match binning.bin_of(x, y, tau) {
                    Some(b) => counts[b] += 1,
                    None => outside += 1,
                }
            }
            (counts, outside)
        })
        .collect();
    let mut counts = vec![0u64; binning.len()];
    let mut outside = 0;
    for (c, o) in partial {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        outside += o;
    }
    Ok(KernelEstimate {
        t,
        samples: n,
        binning,
        counts,
        outside,
    })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// `|a - b|` in units of the combined standard error.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        let se = self.std_error.hypot(other.std_error);
        let d = (self.mean - other.mean).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

fn estimate_streams<F>(n: usize, seed: u64, per_path: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if n < 2 {
        return Err(invalid("sample count must be at least 2"));
    }
    let sums: Vec<(f64, f64)> = stream_sizes(n)
        .into_par_iter()
        .map(|(s, m)| {
            let mut rng = stream_rng(seed, s);
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..m {
                let v = per_path(&mut rng);
                a += v;
                b += v * v;
            }
            (a, b)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    if !mean.is_finite() {
        return Err(crate::Error::NumericDomain(
            "test function produced non-finite values".into(),
        ));
    }
    Ok(McEstimate {
        mean,
        std_error: (var / nf).sqrt(),
    })
}

fn pt(e: [f64; 3]) -> GroupPoint {
    GroupPoint::h1(e[0], e[1], e[2])
}

/// `(S(t) f)(eta) = E f(xi_t^{-1} o eta)`.
pub fn mc_semigroup_apply<F>(f: F, t: f64, eta: &GroupPoint, n: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&GroupPoint) -> f64 + Sync,
{
    check_time(t)?;
    if eta.dim() != 1 {
        return Err(invalid("Monte Carlo engine works on H^1"));
    }
    let steps = path_steps(t);
    estimate_streams(n, seed, |rng| {
        let xi = pt(endpoint(rng, t, steps));
        f(&xi.inverse().compose(eta).expect("both points lie in H^1"))
    })
}

/// `(S(t) S(s) f)(eta) = E f(xi'_s^{-1} o xi_t^{-1} o eta)` with independent paths.
pub fn mc_semigroup_compose<F>(f: F, t: f64, s: f64, eta: &GroupPoint, n: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&GroupPoint) -> f64 + Sync,
{
    check_time(t)?;
    check_time(s)?;
    if eta.dim() != 1 {
        return Err(invalid("Monte Carlo engine works on H^1"));
    }
    let (nt, ns) = (path_steps(t), path_steps(s));
    estimate_streams(n, seed, |rng| {
        let a = pt(endpoint(rng, t, nt));
        let b = pt(endpoint(rng, s, ns));
        let inner = a.inverse().compose(eta).expect("H^1");
        f(&b.inverse().compose(&inner).expect("H^1"))
    })
}

/// One probe comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeCheck {
    pub probe: (f64, f64, f64),
    pub lhs: f64,
    pub rhs: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelValidation {
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub mass: f64,
    pub mass_std_error: f64,
    pub min_density: f64,
    pub symmetry: Vec<ProbeCheck>,
    pub scaling_r: f64,
    pub scaling: Vec<ProbeCheck>,
    pub semigroup_split: McEstimate,
    pub semigroup_direct: McEstimate,
    pub semigroup_z: f64,
}

impl KernelValidation {
    pub fn max_symmetry_diff(&self) -> f64 {
        self.symmetry.iter().map(|c| c.rel_diff).fold(0.0, f64::max)
    }

    pub fn max_scaling_diff(&self) -> f64 {
        self.scaling.iter().map(|c| c.rel_diff).fold(0.0, f64::max)
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

/// Test function used by the semigroup check.
pub fn gauge_bump(eta: &GroupPoint) -> f64 {
    let r2 = eta.horizontal_norm_sq();
    (-(r2 / 2.0) - eta.tau() * eta.tau() / 8.0).exp()
}

/// Probe points: centers of the bins touching the origin, relative to bin widths.
pub fn default_probes(binning: &Binning) -> Vec<GroupPoint> {
    let (wx, wt) = binning.widths();
    let h = 0.5;
    [(h, h, h), (-h, h, h), (h, -h, h), (h, h, -h), (-h, -h, h)]
        .iter()
        .map(|&(a, b, c)| GroupPoint::h1(a * wx, b * wx, c * wt))
        .collect()
}

/// Mass, positivity, symmetry `h_t(eta) = h_t(eta^-1)`, scaling
/// `h_{r^2 t}(delta_r eta) = r^-Q h_t(eta)` at `r = 2`, and the semigroup law
/// `S(t/2) S(t/2) f = S(t) f` on [`gauge_bump`] at a fixed point.
pub fn validate_kernel(t: f64, n: usize, seed: u64, nb: usize) -> Result<KernelValidation> {
    let binning = Binning::for_time(t, nb);
    let est = mc_kernel_sample_binned(t, n, seed, binning)?;
    let r = 2.0;
    let big = mc_kernel_sample_binned(r * r * t, n, seed.wrapping_add(1), binning.dilated(r))?;
    let probes = default_probes(&binning);
    let lookup = |e: &KernelEstimate, p: &GroupPoint| e.density_at(p).map(|d| d.0).unwrap_or(0.0);
    let symmetry = probes
        .iter()
        .map(|p| {
            let (a, b) = (lookup(&est, p), lookup(&est, &p.inverse()));
            ProbeCheck {
                probe: (p.x()[0], p.y()[0], p.tau()),
                lhs: a,
                rhs: b,
                rel_diff: rel_diff(a, b),
            }
        })
        .collect();
    let scaling = probes
        .iter()
        .map(|p| {
            let a = lookup(&est, p);
            let b = lookup(&big, &p.dilate(r).expect("r > 0")) * r.powi(4);
            ProbeCheck {
                probe: (p.x()[0], p.y()[0], p.tau()),
                lhs: a,
                rhs: b,
                rel_diff: rel_diff(a, b),
            }
        })
        .collect();
    let eta = GroupPoint::h1(0.3, -0.2, 0.5);
    let split = mc_semigroup_compose(gauge_bump, t / 2.0, t / 2.0, &eta, n, seed.wrapping_add(2))?;
    let direct = mc_semigroup_apply(gauge_bump, t, &eta, n, seed.wrapping_add(3))?;
    Ok(KernelValidation {
        t,
        samples: n,
        seed,
        mass: est.total_mass(),
        mass_std_error: est.total_mass_std_error(),
        min_density: est.densities().into_iter().fold(f64::INFINITY, f64::min),
        symmetry,
        scaling_r: r,
        scaling,
        semigroup_z: split.z_score(&direct),
        semigroup_split: split,
        semigroup_direct: direct,
    })
}
