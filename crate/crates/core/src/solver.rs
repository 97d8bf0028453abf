//! Time marching for `u_t = Delta_H u + int_0^t (t-s)^-gamma |u|^{p1-1} u ds + |u|^{p2-1} u`
//! on an `H^1` grid, Picard iteration of the discrete mild formulation, and
//! blow-up detection.
//!
//! One split step of length `dt` from `t_n`:
//!
//! 1. `M_n = sum_{j<n} w_{n,j} G_j` (memory frozen at the left endpoint),
//! 2. `u* = u_n + dt (M_n + |u_n|^{p2-1} u_n)`,
//! 3. `u_{n+1} = H(dt) u*` with `H` the explicit heat flow over `dt`,
//!    subdivided into equal substeps under the stability bound,
//! 4. `G_n = |u_n|^{p1-1} u_n` is appended to the history.
//!
//! Every stage is monotone in the field and in the history, so ordered data
//! give ordered solutions.

use serde::{Deserialize, Serialize};

use crate::axisym::{AxiFlow, AxiGrid};
use crate::error::{invalid, Error, Result};
use crate::exponents::ProblemParams;
use crate::grid::{Field, GridSpec};
use crate::group::koranyi_gauge;
use crate::memory::MemoryHistory;
use crate::semigroup::{substeps, HeatFlow};
use crate::stencil::Stencil;

/// Shape of the unscaled initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataKind {
    /// `A exp(-(x^2 + y^2)/w^2 - tau^2/w^4)`.
    Bump { amplitude: f64, width: f64 },
    /// `A (1 + |eta|_H)^-kappa`.
    PowerDecay { kappa: f64, amplitude: f64 },
    /// Nodal values on the run grid.
    Custom { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub kind: DataKind,
    pub epsilon: f64,
}

impl InitialData {
    pub fn bump(amplitude: f64, width: f64) -> Self {
        Self {
            kind: DataKind::Bump { amplitude, width },
            epsilon: 1.0,
        }
    }

    pub fn power_decay(kappa: f64, amplitude: f64) -> Self {
        Self {
            kind: DataKind::PowerDecay { kappa, amplitude },
            epsilon: 1.0,
        }
    }

    pub fn custom(values: Vec<f64>) -> Self {
        Self {
            kind: DataKind::Custom { values },
            epsilon: 1.0,
        }
    }

    pub fn zero() -> Self {
        Self::bump(0.0, 1.0)
    }

    pub fn scaled(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid(format!("data scale must be nonnegative, got {}", self.epsilon)));
        }
        match &self.kind {
            DataKind::Bump { amplitude, width } => {
                if !(*amplitude >= 0.0) || !amplitude.is_finite() || !(*width > 0.0) || !width.is_finite() {
                    return Err(invalid("bump needs amplitude >= 0 and width > 0"));
                }
            }
            DataKind::PowerDecay { kappa, amplitude } => {
                if !(*amplitude >= 0.0) || !amplitude.is_finite() || !(*kappa > 0.0) || !kappa.is_finite() {
                    return Err(invalid("power-decay data needs amplitude >= 0 and kappa > 0"));
                }
            }
            DataKind::Custom { values } => {
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(invalid("custom data must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// Samples the datum on an `(r, tau)` mesh. Custom data are taken as
    /// nodal values in that mesh's ordering.
    pub fn realize_axisymmetric(&self, grid: &AxiGrid) -> Result<Vec<f64>> {
        self.validate()?;
        let eps = self.epsilon;
        match &self.kind {
            DataKind::Bump { amplitude, width } => {
                let (a, w2) = (amplitude * eps, width * width);
                Ok(grid.sample(|r, t| a * (-(r * r) / w2 - t * t / (w2 * w2)).exp()))
            }
            DataKind::PowerDecay { kappa, amplitude } => {
                let a = amplitude * eps;
                Ok(grid.sample(|r, t| a * (1.0 + koranyi_gauge(r * r, t)).powf(-kappa)))
            }
            DataKind::Custom { values } => {
                if values.len() != grid.len() {
                    return Err(invalid("custom data size does not match the mesh"));
                }
                let mut v: Vec<f64> = values.iter().map(|x| x * eps).collect();
                for i in 0..grid.nr {
                    for k in 0..grid.ntau {
                        if i == grid.nr - 1 || k == 0 || k == grid.ntau - 1 {
                            v[grid.index(i, k)] = 0.0;
                        }
                    }
                }
                Ok(v)
            }
        }
    }

    /// Samples the datum on `grid`; boundary nodes are set to zero.
    pub fn realize(&self, grid: &GridSpec) -> Result<Field> {
        self.validate()?;
        let eps = self.epsilon;
        let mut f = match &self.kind {
            DataKind::Bump { amplitude, width } => {
                let (a, w2) = (amplitude * eps, width * width);
                Field::from_fn(*grid, |x, y, t| a * (-(x * x + y * y) / w2 - t * t / (w2 * w2)).exp())
            }
            DataKind::PowerDecay { kappa, amplitude } => {
                let a = amplitude * eps;
                Field::from_fn(*grid, |x, y, t| {
                    a * (1.0 + koranyi_gauge(x * x + y * y, t)).powf(-kappa)
                })
            }
            DataKind::Custom { values } => {
                let mut f = Field::from_values(*grid, values.clone())?;
                f.scale(eps);
                f
            }
        };
        f.zero_boundary();
        Ok(f)
    }
}

/// Which right-hand-side terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub memory: bool,
    pub reaction: bool,
}

impl Terms {
    pub const FULL: Terms = Terms {
        memory: true,
        reaction: true,
    };
    pub const MEMORY_ONLY: Terms = Terms {
        memory: true,
        reaction: false,
    };
    pub const REACTION_ONLY: Terms = Terms {
        memory: false,
        reaction: true,
    };
    pub const LINEAR: Terms = Terms {
        memory: false,
        reaction: false,
    };
}

impl Default for Terms {
    fn default() -> Self {
        Terms::FULL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub stencil: Stencil,
    pub horizon: f64,
    /// Split step; `None` uses the heat stability bound.
    pub dt: Option<f64>,
    /// Blow-up threshold as a multiple of the initial sup norm.
    pub threshold_factor: f64,
    /// Absolute threshold; overrides `threshold_factor` when set.
    pub threshold: Option<f64>,
    pub adaptive: bool,
    pub growth_limit: f64,
    pub min_dt: f64,
    pub max_steps: usize,
    pub terms: Terms,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            stencil: Stencil::Monotone,
            horizon: 1.0,
            dt: None,
            threshold_factor: 1e6,
            threshold: None,
            adaptive: true,
            growth_limit: 0.1,
            min_dt: 1e-12,
            max_steps: 2_000_000,
            terms: Terms::FULL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(invalid(format!("split step must be positive, got {dt}")));
            }
        }
        if !(self.threshold_factor > 1.0) {
            return Err(invalid("threshold factor must exceed 1"));
        }
        if !(self.growth_limit > 0.0) || !(self.min_dt > 0.0) || self.max_steps == 0 {
            return Err(invalid("growth limit, minimum step and step budget must be positive"));
        }
        Ok(())
    }

    /// Same settings with the split step halved (the heat bound follows the grid).
    pub fn refined(&self) -> Self {
        Self {
            dt: self.dt.map(|d| d / 2.0),
            ..self.clone()
        }
    }

    pub fn with_terms(&self, terms: Terms) -> Self {
        Self { terms, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    BlewUp { t_star: f64 },
    SurvivedHorizon { horizon: f64 },
    StepCollapse { t: f64 },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::BlewUp { .. } => "BlewUp",
            RunStatus::SurvivedHorizon { .. } => "SurvivedHorizon",
            RunStatus::StepCollapse { .. } => "StepCollapse",
        }
    }

    pub fn t_star(&self) -> Option<f64> {
        match self {
            RunStatus::BlewUp { t_star } => Some(*t_star),
            _ => None,
        }
    }

    /// Blow-up or a step collapse before the horizon.
    pub fn is_singular(&self) -> bool {
        !matches!(self, RunStatus::SurvivedHorizon { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub sup: f64,
    pub l1: f64,
}

/// Mesh a run lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Grid(GridSpec),
    Axisymmetric(AxiGrid),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub status: RunStatus,
    pub series: Vec<SeriesPoint>,
    pub steps: usize,
    pub heat_substeps: usize,
    pub rejected_steps: usize,
    /// The field went non-finite and the run stopped at the prior step.
    pub nonfinite: bool,
    /// Smallest `min(u) / running sup(u)` seen over the run.
    pub min_relative_value: f64,
    pub threshold: f64,
    pub params: ProblemParams,
    pub domain: Domain,
    pub data: InitialData,
    pub config: SolverConfig,
    /// Final grid field (grid runs only).
    #[serde(skip)]
    pub final_field: Option<Field>,
}

#[inline]
fn signed_pow(v: f64, p: f64) -> f64 {
    v.abs().powf(p).copysign(v)
}

/// Linear part of a split step: `u <- S(dt) u` on some mesh.
pub trait LinearFlow {
    fn len(&self) -> usize;
    /// Advances by `dt`, returning the number of substeps used.
    fn advance(&mut self, u: &mut [f64], dt: f64) -> Result<usize>;
    /// Split step used when none is configured.
    fn default_dt(&self) -> f64;
    fn l1_norm(&self, u: &[f64]) -> f64;
}

impl LinearFlow for HeatFlow {
    fn len(&self) -> usize {
        self.grid().len()
    }

    fn advance(&mut self, u: &mut [f64], dt: f64) -> Result<usize> {
        HeatFlow::advance(self, u, dt)
    }

    fn default_dt(&self) -> f64 {
        self.stable_dt()
    }

    fn l1_norm(&self, u: &[f64]) -> f64 {
        u.iter().map(|v| v.abs()).sum::<f64>() * self.grid().cell_volume()
    }
}

/// Candidate state after one split step.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub dt: f64,
    pub u: Vec<f64>,
    history_term: Option<Vec<f32>>,
    pub sup: f64,
    pub finite: bool,
    heat_substeps: usize,
}

/// Single-run state machine. Proposals can be rejected without side effects,
/// which lets several runs advance in lockstep on a shared step sequence.
#[derive(Debug, Clone)]
pub struct Stepper<F: LinearFlow = HeatFlow> {
    params: ProblemParams,
    terms: Terms,
    flow: F,
    history: Option<MemoryHistory>,
    memory: Vec<f64>,
    memory_step: Option<usize>,
    u: Vec<f64>,
    t: f64,
    steps: usize,
    sup: f64,
}

impl Stepper<HeatFlow> {
    pub fn new(params: &ProblemParams, u0: &Field, stencil: Stencil, terms: Terms) -> Result<Self> {
        u0.check_finite()?;
        Self::with_flow(params, HeatFlow::new(*u0.grid(), stencil), u0.values().to_vec(), terms)
    }

    pub fn grid(&self) -> &GridSpec {
        self.flow.grid()
    }

    pub fn heat_dt(&self) -> f64 {
        self.flow.stable_dt()
    }

    pub fn field(&self) -> Field {
        Field::from_values(*self.grid(), self.u.clone()).expect("committed state is finite")
    }
}

impl<F: LinearFlow> Stepper<F> {
    pub fn with_flow(params: &ProblemParams, flow: F, u0: Vec<f64>, terms: Terms) -> Result<Self> {
        params.validate()?;
        if params.n != 1 {
            return Err(invalid("the grid engine supports n = 1 only"));
        }
        if u0.len() != flow.len() {
            return Err(invalid("initial field size does not match the mesh"));
        }
        if u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("initial field has non-finite values".into()));
        }
        let history = if terms.memory {
            Some(MemoryHistory::with_size(params.gamma, u0.len())?)
        } else {
            None
        };
        let sup = u0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Self {
            params: *params,
            terms,
            memory: vec![0.0; u0.len()],
            flow,
            history,
            memory_step: None,
            u: u0,
            t: 0.0,
            steps: 0,
            sup,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn flow(&self) -> &F {
        &self.flow
    }

    fn refresh_memory(&mut self) -> Result<()> {
        if self.memory_step == Some(self.steps) {
            return Ok(());
        }
        if let Some(h) = &self.history {
            h.eval_into(self.steps, &mut self.memory)?;
        }
        self.memory_step = Some(self.steps);
        Ok(())
    }

    pub fn propose(&mut self, dt: f64) -> Result<Proposal> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("split step must be positive, got {dt}")));
        }
        self.refresh_memory()?;
        let p2 = self.params.p2;
        let mut u = self.u.clone();
        match (self.terms.memory, self.terms.reaction) {
            (true, true) => {
                for (v, m) in u.iter_mut().zip(&self.memory) {
                    *v += dt * (m + signed_pow(*v, p2));
                }
            }
            (true, false) => {
                for (v, m) in u.iter_mut().zip(&self.memory) {
                    *v += dt * m;
                }
            }
            (false, true) => {
                for v in u.iter_mut() {
                    *v += dt * signed_pow(*v, p2);
                }
            }
            (false, false) => {}
        }
        let mut history_term = None;
        let mut term_ok = true;
        if self.terms.memory {
            let p1 = self.params.p1;
            let g: Vec<f64> = self.u.iter().map(|v| signed_pow(*v, p1)).collect();
            history_term = crate::memory::to_single(&g);
            term_ok = history_term.is_some();
        }
        let finite_before = term_ok && u.iter().all(|v| v.is_finite());
        let mut heat_substeps = 0;
        if finite_before {
            heat_substeps = self.flow.advance(&mut u, dt)?;
        }
        let finite = finite_before && u.iter().all(|v| v.is_finite());
        let sup = if finite {
            u.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        } else {
            f64::INFINITY
        };
        Ok(Proposal {
            dt,
            u,
            history_term,
            sup,
            finite,
            heat_substeps,
        })
    }

    /// Relative sup-norm growth of a proposal over the current state.
    pub fn growth(&self, p: &Proposal) -> f64 {
        if self.sup == 0.0 {
            if p.sup == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (p.sup - self.sup) / self.sup
        }
    }

    pub fn commit(&mut self, p: Proposal) -> Result<usize> {
        if !p.finite {
            return Err(Error::State("cannot commit a non-finite proposal".into()));
        }
        let t_next = self.t + p.dt;
        if let Some(h) = &mut self.history {
            let g = p
                .history_term
                .ok_or_else(|| Error::State("proposal carries no history term".into()))?;
            h.push_values(g, t_next)?;
        }
        self.u = p.u;
        self.t = t_next;
        self.steps += 1;
        self.sup = p.sup;
        Ok(p.heat_substeps)
    }

    pub fn l1_norm(&self) -> f64 {
        self.flow.l1_norm(&self.u)
    }

    pub fn min_value(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// First crossing of `threshold` by the sup norm, linearly interpolated
/// between the bracketing samples.
pub fn detect_blowup(series: &[SeriesPoint], threshold: f64) -> Option<f64> {
    let k = series.iter().position(|p| p.sup >= threshold)?;
    if k == 0 {
        return Some(series[0].t);
    }
    let (a, b) = (series[k - 1], series[k]);
    if !b.sup.is_finite() {
        return Some(b.t);
    }
    let frac = (threshold - a.sup) / (b.sup - a.sup);
    Some(a.t + frac * (b.t - a.t))
}

fn resolve_threshold(config: &SolverConfig, sup0: f64) -> Result<f64> {
    let thr = match config.threshold {
        Some(t) => t,
        None if sup0 > 0.0 => config.threshold_factor * sup0,
        None => config.threshold_factor,
    };
    if !(thr > sup0) {
        return Err(invalid(format!(
            "blow-up threshold {thr:e} must exceed the initial sup norm {sup0:e}"
        )));
    }
    Ok(thr)
}

struct March {
    status: RunStatus,
    series: Vec<SeriesPoint>,
    steps: usize,
    heat_substeps: usize,
    rejected: usize,
    nonfinite: bool,
    min_rel: f64,
    threshold: f64,
    u: Vec<f64>,
}

fn march<F: LinearFlow>(params: &ProblemParams, flow: F, u0: Vec<f64>, config: &SolverConfig) -> Result<March> {
    config.validate()?;
    let mut st = Stepper::with_flow(params, flow, u0, config.terms)?;
    let threshold = resolve_threshold(config, st.sup())?;
    let mut dt = config.dt.unwrap_or_else(|| st.flow().default_dt());
    let mut series = vec![SeriesPoint {
        t: 0.0,
        sup: st.sup(),
        l1: st.l1_norm(),
    }];
    let mut heat_substeps = 0;
    let mut rejected = 0;
    let mut nonfinite = false;
    let mut running_sup = st.sup();
    let mut min_rel: f64 = if running_sup > 0.0 {
        (st.min_value() / running_sup).min(0.0)
    } else {
        0.0
    };
    let horizon = config.horizon;

    let status = loop {
        let remaining = horizon - st.time();
        if remaining <= horizon * 1e-12 {
            break RunStatus::SurvivedHorizon { horizon };
        }
        if st.steps() >= config.max_steps {
            return Err(Error::State(format!(
                "step budget of {} exhausted at t = {}",
                config.max_steps,
                st.time()
            )));
        }
        let trial = dt.min(remaining);
        let prop = st.propose(trial)?;
        if !prop.finite {
            nonfinite = true;
            break RunStatus::BlewUp { t_star: st.time() };
        }
        if config.adaptive && st.growth(&prop) > config.growth_limit {
            rejected += 1;
            dt = trial / 2.0;
            if dt < config.min_dt {
                break RunStatus::StepCollapse { t: st.time() };
            }
            continue;
        }
        heat_substeps += st.commit(prop)?;
        running_sup = running_sup.max(st.sup());
        if running_sup > 0.0 {
            min_rel = min_rel.min(st.min_value() / running_sup);
        }
        series.push(SeriesPoint {
            t: st.time(),
            sup: st.sup(),
            l1: st.l1_norm(),
        });
        if st.sup() >= threshold {
            let t_star = detect_blowup(&series, threshold).expect("threshold crossed");
            break RunStatus::BlewUp { t_star };
        }
    };
    Ok(March {
        status,
        steps: st.steps(),
        heat_substeps,
        rejected,
        nonfinite,
        min_rel,
        threshold,
        series,
        u: st.u,
    })
}

fn assemble(m: March, params: &ProblemParams, domain: Domain, data: &InitialData, config: &SolverConfig) -> RunResult {
    let final_field = match domain {
        Domain::Grid(g) => Field::from_values(g, m.u).ok(),
        Domain::Axisymmetric(_) => None,
    };
    RunResult {
        status: m.status,
        series: m.series,
        steps: m.steps,
        heat_substeps: m.heat_substeps,
        rejected_steps: m.rejected,
        nonfinite: m.nonfinite,
        min_relative_value: m.min_rel,
        threshold: m.threshold,
        params: *params,
        domain,
        data: data.clone(),
        config: config.clone(),
        final_field,
    }
}

/// Marches one run to blow-up, step collapse or the horizon.
pub fn simulate(
    params: &ProblemParams,
    grid: &GridSpec,
    data: &InitialData,
    config: &SolverConfig,
) -> Result<RunResult> {
    config.validate()?;
    let u0 = data.realize(grid)?;
    let flow = HeatFlow::new(*grid, config.stencil);
    let m = march(params, flow, u0.into_values(), config)?;
    Ok(assemble(m, params, Domain::Grid(*grid), data, config))
}

/// [`simulate`] for rotation-invariant data on an `(r, tau)` mesh. The
/// stencil setting is ignored; `config.dt` defaults to `h_r^2 / 4`.
pub fn simulate_axisymmetric(
    params: &ProblemParams,
    grid: &AxiGrid,
    data: &InitialData,
    config: &SolverConfig,
) -> Result<RunResult> {
    config.validate()?;
    let u0 = data.realize_axisymmetric(grid)?;
    let m = march(params, AxiFlow::new(*grid), u0, config)?;
    Ok(assemble(m, params, Domain::Axisymmetric(*grid), data, config))
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub t_small: f64,
    pub dt: f64,
    pub steps: usize,
    /// `||u_k(T) - u_{k-1}(T)||_inf` for `k = 2..=m`.
    pub differences: Vec<f64>,
    /// Ratios of consecutive differences.
    pub ratios: Vec<f64>,
    #[serde(skip)]
    pub iterates: Vec<Field>,
}

impl PicardReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn last(&self) -> &Field {
        self.iterates.last().expect("at least one iterate")
    }
}

/// Picard iterates of the discrete mild formulation on `[0, t_small]`:
/// `u_1 = S(t) u0` and `u_k = Phi(u_{k-1})`, where `Phi(v)` runs the split
/// recurrence with both nonlinear terms evaluated along the trajectory `v`.
/// The fixed point of `Phi` is the [`simulate`] trajectory with the same
/// step `dt` (adaptivity off).
pub fn picard_iterate(
    params: &ProblemParams,
    grid: &GridSpec,
    data: &InitialData,
    t_small: f64,
    dt: f64,
    iterations: usize,
    stencil: Stencil,
) -> Result<PicardReport> {
    params.validate()?;
    if params.n != 1 {
        return Err(invalid("the grid engine supports n = 1 only"));
    }
    if !(t_small > 0.0) || !(dt > 0.0) || iterations == 0 {
        return Err(invalid(
            "picard iteration needs t_small > 0, dt > 0 and at least one iterate",
        ));
    }
    let u0 = data.realize(grid)?;
    let steps = ((t_small / dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = t_small / steps as f64;
    let nodes: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let sup0 = u0.sup_norm();
    let limit = if sup0 > 0.0 { 1e6 * sup0 } else { 1e6 };
    let mut flow = HeatFlow::new(*grid, stencil);
    let table = crate::memory::build_weights(params.gamma, &nodes)?;

    // trajectory of the previous iterate: v_0..v_steps
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let mut iterates = Vec::with_capacity(iterations);
    let mut differences = Vec::new();
    for it in 1..=iterations {
        let mut traj = Vec::with_capacity(steps + 1);
        let mut w = u0.values().to_vec();
        traj.push(w.clone());
        for n in 0..steps {
            if let Some(v) = &prev {
                let mut forcing = vec![0.0; w.len()];
                for j in 0..n {
                    let c = table.weight(n, j);
                    for (f, vj) in forcing.iter_mut().zip(&v[j]) {
                        *f += c * f64::from(signed_pow(*vj, params.p1) as f32);
                    }
                }
                for ((wi, f), vn) in w.iter_mut().zip(&forcing).zip(&v[n]) {
                    *wi += dt * (f + signed_pow(*vn, params.p2));
                }
            }
            flow.advance(&mut w, dt)?;
            let s = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !(s <= limit) {
                return Err(Error::IterationDiverged {
                    iterate: it,
                    sup_norm: s,
                });
            }
            traj.push(w.clone());
        }
        let end = Field::from_values(*grid, traj[steps].clone())?;
        if let Some(last) = iterates.last() {
            differences.push(end.max_diff(last));
        }
        iterates.push(end);
        prev = Some(traj);
    }
    let ratios = differences
        .windows(2)
        .map(|d| if d[0] > 0.0 { d[1] / d[0] } else { 0.0 })
        .collect();
    Ok(PicardReport {
        t_small,
        dt,
        steps,
        differences,
        ratios,
        iterates,
    })
}

/// Number of heat substeps per split step of length `dt` on `grid`.
pub fn heat_substeps_per_step(grid: &GridSpec, stencil: Stencil, dt: f64) -> usize {
    substeps(dt, crate::semigroup::stable_dt_with(grid, stencil))
}
