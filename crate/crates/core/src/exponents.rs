//! Critical exponents of the mixed memory/reaction problem, the
//! global-existence / blow-up region map, and lifespan scaling laws.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Problem parameters `(gamma, p1, p2, n)`; `Q = 2n + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub gamma: f64,
    pub p1: f64,
    pub p2: f64,
    pub n: u32,
}

impl ProblemParams {
    pub fn new(gamma: f64, p1: f64, p2: f64, n: u32) -> Result<Self> {
        let p = Self { gamma, p1, p2, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.p1 > 1.0) || !self.p1.is_finite() {
            return Err(invalid(format!("p1 must be a finite value > 1, got {}", self.p1)));
        }
        if !(self.p2 > 1.0) || !self.p2.is_finite() {
            return Err(invalid(format!("p2 must be a finite value > 1, got {}", self.p2)));
        }
        if self.n < 1 {
            return Err(invalid("n must be at least 1"));
        }
        Ok(())
    }

    /// Homogeneous dimension `2n + 2`.
    pub fn q(&self) -> f64 {
        2.0 * self.n as f64 + 2.0
    }
}

/// A real number or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtendedReal {
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInf => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::PosInf)
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// `v < self` with `+inf` above every finite value.
    pub fn exceeds(self, v: f64) -> bool {
        match self {
            ExtendedReal::Finite(x) => v < x,
            ExtendedReal::PosInf => true,
        }
    }

    /// `v > self`.
    pub fn is_below(self, v: f64) -> bool {
        match self {
            ExtendedReal::Finite(x) => v > x,
            ExtendedReal::PosInf => false,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtendedReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (Finite(_), PosInf) => Some(Ordering::Less),
            (PosInf, Finite(_)) => Some(Ordering::Greater),
            (PosInf, PosInf) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v:.17e}"),
            ExtendedReal::PosInf => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    BlowUp,
    GlobalSmallData,
    Open,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::BlowUp => "BlowUp",
            Region::GlobalSmallData => "GlobalSmallData",
            Region::Open => "Open",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub p_gamma: ExtendedReal,
    pub p1_star: ExtendedReal,
    pub p2_star: ExtendedReal,
    pub p2_double_star: ExtendedReal,
    pub tilde_p2: ExtendedReal,
    pub tilde_p1: ExtendedReal,
    pub q_sc: ExtendedReal,
    pub p_sc1: ExtendedReal,
    pub region: Region,
}

/// `1 + 2(2 - gamma) / (Q - 2 + 2 gamma)`.
pub fn p_gamma(gamma: f64, q: f64) -> f64 {
    1.0 + 2.0 * (2.0 - gamma) / (q - 2.0 + 2.0 * gamma)
}

pub fn p1_star(gamma: f64, q: f64) -> ExtendedReal {
    let inv = if gamma == 0.0 {
        ExtendedReal::PosInf
    } else {
        ExtendedReal::Finite(1.0 / gamma)
    };
    inv.max(ExtendedReal::Finite(p_gamma(gamma, q)))
}

pub fn p2_star(q: f64) -> f64 {
    1.0 + 2.0 / q
}

pub fn p2_double_star(gamma: f64, q: f64) -> ExtendedReal {
    let first = if gamma == 0.0 {
        ExtendedReal::PosInf
    } else {
        ExtendedReal::Finite((gamma - gamma * gamma + 1.0) / (gamma * (2.0 - gamma)))
    };
    first.max(ExtendedReal::Finite(1.0 + 2.0 / (q - 2.0 + 2.0 * gamma)))
}

/// `(p1 + 1 - gamma) / (2 - gamma)`.
pub fn tilde_p2(gamma: f64, p1: f64) -> f64 {
    (p1 + 1.0 - gamma) / (2.0 - gamma)
}

/// `(p2 - 1)(2 - gamma) + 1`.
pub fn tilde_p1(gamma: f64, p2: f64) -> f64 {
    (p2 - 1.0) * (2.0 - gamma) + 1.0
}

/// `1 + 2(2 - gamma) / Q`.
pub fn p_sc1(gamma: f64, q: f64) -> f64 {
    1.0 + 2.0 * (2.0 - gamma) / q
}

/// The two branches of the scaled integrability exponent.
pub fn q_sc_branches(gamma: f64, p1: f64, p2: f64, q: f64) -> (f64, f64) {
    (q * (p1 - 1.0) / (2.0 * (2.0 - gamma)), q * (p2 - 1.0) / 2.0)
}

pub fn q_sc(gamma: f64, p1: f64, p2: f64, q: f64) -> f64 {
    let (memory_branch, reaction_branch) = q_sc_branches(gamma, p1, p2, q);
    if p2 >= tilde_p2(gamma, p1) {
        memory_branch
    } else {
        reaction_branch
    }
}

pub fn compute_exponents(params: &ProblemParams) -> Result<ExponentReport> {
    params.validate()?;
    let ProblemParams { gamma, p1, p2, .. } = *params;
    let q = params.q();
    Ok(ExponentReport {
        p_gamma: ExtendedReal::Finite(p_gamma(gamma, q)),
        p1_star: p1_star(gamma, q),
        p2_star: ExtendedReal::Finite(p2_star(q)),
        p2_double_star: p2_double_star(gamma, q),
        tilde_p2: ExtendedReal::Finite(tilde_p2(gamma, p1)),
        tilde_p1: ExtendedReal::Finite(tilde_p1(gamma, p2)),
        q_sc: ExtendedReal::Finite(q_sc(gamma, p1, p2, q)),
        p_sc1: ExtendedReal::Finite(p_sc1(gamma, q)),
        region: region_of(params),
    })
}

fn region_of(params: &ProblemParams) -> Region {
    let q = params.q();
    let p1s = p1_star(params.gamma, q);
    // p1 <= p1* or p2 <= p2*: every nontrivial nonnegative solution blows up.
    if !p1s.is_below(params.p1) || params.p2 <= p2_star(q) {
        Region::BlowUp
    } else if p2_double_star(params.gamma, q).is_below(params.p2) {
        Region::GlobalSmallData
    } else {
        Region::Open
    }
}

/// Region of the `(p1, p2)` plane; boundary `p1 = p1*` counts as blow-up and
/// `p2 = p2**` as open.
pub fn classify(params: &ProblemParams) -> Region {
    region_of(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawKind {
    /// `T_eps <= C eps^exponent`.
    PowerLaw,
    /// `T_eps <= C exp(eps^exponent)`.
    ExpLaw,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanLaw {
    pub kind: LawKind,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanPrediction {
    pub kind: LawKind,
    pub exponent: f64,
    /// A second applicable bound when both the memory and reaction laws hold.
    pub alternate: Option<LifespanLaw>,
}

impl LifespanPrediction {
    fn none() -> Self {
        Self {
            kind: LawKind::None,
            exponent: f64::NAN,
            alternate: None,
        }
    }
}

const CRITICAL_TOL: f64 = 1e-12;

/// Upper-bound law for the lifespan of `eps u0` as `eps -> 0`.
///
/// With `kappa` the decay-rate law for data bounded below by
/// `(1 + |eta|)^-kappa` is returned. Otherwise the memory-driven law
/// (`p1 < p_sc1`) takes precedence over the reaction-driven one
/// (`p2 < p2*`, or the exponential law at `p2 = p2*`), and the latter is kept
/// as `alternate`.
pub fn lifespan_prediction(params: &ProblemParams, kappa: Option<f64>) -> Result<LifespanPrediction> {
    params.validate()?;
    let ProblemParams { gamma, p1, p2, .. } = *params;
    let q = params.q();
    let memory_rate = (2.0 - gamma) / (p1 - 1.0);

    if let Some(kappa) = kappa {
        let upper = 2.0 * memory_rate;
        if !(kappa > 0.0 && kappa < upper) {
            return Err(invalid(format!(
                "kappa must lie in (0, {upper}) for p1 = {p1}, gamma = {gamma}; got {kappa}"
            )));
        }
        return Ok(LifespanPrediction {
            kind: LawKind::PowerLaw,
            exponent: -1.0 / (memory_rate - kappa / 2.0),
            alternate: None,
        });
    }

    let memory_law = (p1 < p_sc1(gamma, q)).then(|| LifespanLaw {
        kind: LawKind::PowerLaw,
        exponent: -1.0 / (memory_rate - q / 2.0),
    });
    let p2s = p2_star(q);
    let reaction_law = if (p2 - p2s).abs() <= CRITICAL_TOL * p2s {
        Some(LifespanLaw {
            kind: LawKind::ExpLaw,
            exponent: -(p2 - 1.0),
        })
    } else if p2 < p2s {
        Some(LifespanLaw {
            kind: LawKind::PowerLaw,
            exponent: -1.0 / (1.0 / (p2 - 1.0) - q / 2.0),
        })
    } else {
        None
    };

    Ok(match (memory_law, reaction_law) {
        (Some(m), alt) => LifespanPrediction {
            kind: m.kind,
            exponent: m.exponent,
            alternate: alt,
        },
        (None, Some(r)) => LifespanPrediction {
            kind: r.kind,
            exponent: r.exponent,
            alternate: None,
        },
        (None, None) => LifespanPrediction::none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64, p1: f64, p2: f64) -> ProblemParams {
        ProblemParams::new(gamma, p1, p2, 1).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ProblemParams::new(1.0, 2.0, 2.0, 1).is_err());
        assert!(ProblemParams::new(-0.1, 2.0, 2.0, 1).is_err());
        assert!(ProblemParams::new(0.5, 1.0, 2.0, 1).is_err());
        assert!(ProblemParams::new(0.5, 2.0, 0.5, 1).is_err());
        assert!(ProblemParams::new(0.5, 2.0, 2.0, 0).is_err());
        assert!(ProblemParams::new(0.5, f64::NAN, 2.0, 1).is_err());
    }

    #[test]
    fn half_gamma_first_group() {
        let r = compute_exponents(&params(0.5, 3.0, 2.0)).unwrap();
        let f = |e: ExtendedReal| e.finite().unwrap();
        assert!((f(r.p1_star) - 2.0).abs() < 1e-15);
        assert!((f(r.p2_star) - 1.5).abs() < 1e-15);
        assert!((f(r.p2_double_star) - 5.0 / 3.0).abs() < 1e-15);
        assert!((f(r.p_sc1) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn gamma_zero_is_infinite() {
        let r = compute_exponents(&ProblemParams::new(0.0, 50.0, 50.0, 3).unwrap()).unwrap();
        assert!(r.p1_star.is_infinite());
        assert!(r.p2_double_star.is_infinite());
        assert_eq!(r.region, Region::BlowUp);
    }

    #[test]
    fn fujita_limit() {
        for n in 1..4 {
            let q = 2.0 * n as f64 + 2.0;
            let p = p1_star(1.0 - 1e-6, q).finite().unwrap();
            assert!((p - (1.0 + 2.0 / q)).abs() < 1e-4);
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&params(0.5, 1.5, 2.0)), Region::BlowUp);
        assert_eq!(classify(&params(0.5, 3.0, 2.0)), Region::GlobalSmallData);
        assert_eq!(classify(&params(0.5, 3.0, 1.6)), Region::Open);
        // boundaries
        assert_eq!(classify(&params(0.5, 2.0, 3.0)), Region::BlowUp);
        assert_eq!(classify(&params(0.5, 3.0, 1.5)), Region::BlowUp);
        assert_eq!(classify(&params(0.5, 3.0, 5.0 / 3.0)), Region::Open);
    }

    #[test]
    fn extended_real_order() {
        let inf = ExtendedReal::PosInf;
        let one = ExtendedReal::Finite(1.0);
        assert!(inf > one);
        assert!(inf.exceeds(1e300));
        assert!(!inf.is_below(1e300));
        assert_eq!(one.max(inf), inf);
        assert_eq!(inf.to_string(), "inf");
    }

    #[test]
    fn lifespan_examples() {
        let p = params(0.5, 1.5, 3.0);
        let l = lifespan_prediction(&p, None).unwrap();
        assert_eq!(l.kind, LawKind::PowerLaw);
        assert!((l.exponent + 1.0).abs() < 1e-14);
        assert!(l.alternate.is_none());

        let l = lifespan_prediction(&params(0.5, 3.0, 1.25), None).unwrap();
        assert_eq!(l.kind, LawKind::PowerLaw);
        assert!((l.exponent + 0.5).abs() < 1e-14);

        let l = lifespan_prediction(&p, Some(1.0)).unwrap();
        assert!((l.exponent + 0.4).abs() < 1e-14);
    }

    #[test]
    fn lifespan_both_laws_prefers_memory() {
        let l = lifespan_prediction(&params(0.5, 1.5, 1.25), None).unwrap();
        assert!((l.exponent + 1.0).abs() < 1e-14);
        let alt = l.alternate.unwrap();
        assert_eq!(alt.kind, LawKind::PowerLaw);
        assert!((alt.exponent + 0.5).abs() < 1e-14);
    }

    #[test]
    fn lifespan_critical_reaction_is_exponential() {
        let l = lifespan_prediction(&params(0.5, 3.0, 1.5), None).unwrap();
        assert_eq!(l.kind, LawKind::ExpLaw);
        assert!((l.exponent + 0.5).abs() < 1e-14);
    }

    #[test]
    fn lifespan_gap_has_no_law() {
        // p_sc1 = 1.75 <= p1 = 1.9 <= p1* = 2 and p2 > p2*
        let l = lifespan_prediction(&params(0.5, 1.9, 3.0), None).unwrap();
        assert_eq!(l.kind, LawKind::None);
    }

    #[test]
    fn kappa_out_of_range() {
        let p = params(0.5, 1.5, 3.0);
        assert!(lifespan_prediction(&p, Some(0.0)).is_err());
        assert!(lifespan_prediction(&p, Some(6.0)).is_err());
        assert!(lifespan_prediction(&p, Some(5.9)).is_ok());
    }
}
