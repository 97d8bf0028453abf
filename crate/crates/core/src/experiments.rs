//! Experiment drivers: phase-diagram sweeps, lifespan scaling and
//! comparison checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exponents::{classify, lifespan_prediction, LawKind, LifespanPrediction, ProblemParams, Region};
use crate::grid::Field;
use crate::output::{fmt_float, CsvTable};
use crate::solver::{
    simulate, simulate_axisymmetric, Domain, InitialData, RunResult, RunStatus, SolverConfig, Stepper, Terms,
};
use crate::stats::{linear_fit, log_log_fit, LineFit};

/// Runs one simulation on whichever mesh `domain` names.
pub fn run_on(params: &ProblemParams, domain: &Domain, data: &InitialData, config: &SolverConfig) -> Result<RunResult> {
    match domain {
        Domain::Grid(g) => simulate(params, g, data, config),
        Domain::Axisymmetric(g) => simulate_axisymmetric(params, g, data, config),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub gamma: f64,
    pub n: u32,
    /// `(p1, p2)` points, in output order.
    pub lattice: Vec<(f64, f64)>,
    pub domain: Domain,
    pub data: InitialData,
    pub solver: SolverConfig,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lattice.is_empty() {
            return Err(Error::Config("sweep lattice is empty".into()));
        }
        for &(p1, p2) in &self.lattice {
            ProblemParams::new(self.gamma, p1, p2, self.n)?;
        }
        self.data.validate()?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Agreement {
    Yes,
    No,
    NotApplicable,
}

impl Agreement {
    pub fn label(&self) -> &'static str {
        match self {
            Agreement::Yes => "yes",
            Agreement::No => "no",
            Agreement::NotApplicable => "n/a",
        }
    }
}

/// Step collapses count as blow-up; the open region is never a disagreement.
pub fn agreement(region: Region, status: &RunStatus) -> Agreement {
    match region {
        Region::Open => Agreement::NotApplicable,
        Region::BlowUp if status.is_singular() => Agreement::Yes,
        Region::GlobalSmallData if !status.is_singular() => Agreement::Yes,
        _ => Agreement::No,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub p1: f64,
    pub p2: f64,
    pub region: Region,
    pub status: RunStatus,
    pub steps: usize,
    pub final_sup: f64,
    pub agreement: Agreement,
}

pub fn phase_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let run_point = |&(p1, p2): &(f64, f64)| -> Result<SweepRow> {
        let params = ProblemParams::new(config.gamma, p1, p2, config.n)?;
        let region = classify(&params);
        let res = run_on(&params, &config.domain, &config.data, &config.solver)?;
        let final_sup = res.series.last().map_or(f64::NAN, |p| p.sup);
        Ok(SweepRow {
            p1,
            p2,
            region,
            status: res.status,
            steps: res.steps,
            final_sup,
            agreement: agreement(region, &res.status),
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    // collect keeps lattice order regardless of scheduling
    pool.install(|| config.lattice.par_iter().map(run_point).collect())
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "p1",
    "p2",
    "region",
    "status",
    "t_star",
    "t_end",
    "steps",
    "final_sup",
    "agreement",
];

pub fn sweep_table(rows: &[SweepRow]) -> CsvTable {
    let mut table = CsvTable::new(&SWEEP_COLUMNS);
    for r in rows {
        let (t_star, t_end) = match r.status {
            RunStatus::BlewUp { t_star } => (fmt_float(t_star), fmt_float(t_star)),
            RunStatus::StepCollapse { t } => (String::new(), fmt_float(t)),
            RunStatus::SurvivedHorizon { horizon } => (String::new(), fmt_float(horizon)),
        };
        table.push(vec![
            fmt_float(r.p1),
            fmt_float(r.p2),
            r.region.to_string(),
            r.status.label().to_string(),
            t_star,
            t_end,
            r.steps.to_string(),
            fmt_float(r.final_sup),
            r.agreement.label().to_string(),
        ]);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifespanOptions {
    /// Decay rate of the data, for the power-decay law.
    pub kappa: Option<f64>,
    /// Retries with a 4x longer horizon when a run survives.
    pub max_extensions: usize,
}

impl Default for LifespanOptions {
    fn default() -> Self {
        Self {
            kappa: None,
            max_extensions: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LifespanPoint {
    pub epsilon: f64,
    pub status: RunStatus,
    pub horizon: f64,
    /// Blow-up or collapse time; `None` when the run survived.
    pub lifespan: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LifespanFit {
    pub points: Vec<LifespanPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub prediction: LifespanPrediction,
    /// Predicted log-log slope for power laws.
    pub predicted_slope: Option<f64>,
    /// `log T` against `eps^-(p2 - 1)` for the exponential law.
    pub exp_linearity: Option<LineFit>,
    /// Smallest and largest epsilon that entered the fit.
    pub fitted_range: (f64, f64),
}

impl LifespanFit {
    pub fn relative_slope_error(&self) -> Option<f64> {
        self.predicted_slope.map(|p| ((self.slope - p) / p).abs())
    }

    pub fn valid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().filter_map(|p| p.lifespan.map(|t| (p.epsilon, t)))
    }
}

fn next_horizon(prediction: &LifespanPrediction, p2: f64, prev: Option<(f64, f64)>, eps: f64, base: f64) -> f64 {
    let Some((e0, t0)) = prev else { return base };
    let guess = match prediction.kind {
        LawKind::PowerLaw => 4.0 * t0 * (eps / e0).powf(prediction.exponent),
        LawKind::ExpLaw => 4.0 * t0 * (eps.powf(-(p2 - 1.0)) - e0.powf(-(p2 - 1.0))).exp(),
        LawKind::None => base,
    };
    if guess.is_finite() {
        base.max(guess)
    } else {
        base
    }
}

/// Lifespan of `eps u0` for each epsilon, with a log-log slope fit.
/// Step collapses are taken as the end of existence.
pub fn lifespan_sweep(
    params: &ProblemParams,
    data: &InitialData,
    epsilons: &[f64],
    domain: &Domain,
    config: &SolverConfig,
    options: &LifespanOptions,
) -> Result<LifespanFit> {
    if classify(params) != Region::BlowUp {
        return Err(invalid(format!(
            "lifespan scaling needs the blow-up region, ({}, {}) is {}",
            params.p1,
            params.p2,
            classify(params)
        )));
    }
    if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(invalid("epsilons must be positive"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("epsilons must be strictly decreasing"));
    }
    let prediction = lifespan_prediction(params, options.kappa)?;
    let mut points = Vec::with_capacity(epsilons.len());
    let mut prev = None;
    for &eps in epsilons {
        let mut horizon = next_horizon(&prediction, params.p2, prev, eps, config.horizon);
        let scaled = data.clone().scaled(eps);
        let mut attempt = 0;
        let status = loop {
            let cfg = SolverConfig {
                horizon,
                ..config.clone()
            };
            let res = run_on(params, domain, &scaled, &cfg)?;
            if res.status.is_singular() || attempt >= options.max_extensions {
                break res.status;
            }
            attempt += 1;
            horizon *= 4.0;
        };
        let lifespan = match status {
            RunStatus::BlewUp { t_star } => Some(t_star),
            RunStatus::StepCollapse { t } => Some(t),
            RunStatus::SurvivedHorizon { .. } => None,
        };
        if let Some(t) = lifespan {
            prev = Some((eps, t));
        }
        points.push(LifespanPoint {
            epsilon: eps,
            status,
            horizon,
            lifespan,
        });
    }

    let (es, ts): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| p.lifespan.map(|t| (p.epsilon, t))).unzip();
    if es.len() < 3 {
        return Err(Error::FitAborted(format!(
            "{} of {} runs blew up; at least 3 are needed",
            es.len(),
            epsilons.len()
        )));
    }
    let fit = log_log_fit(&es, &ts)?;
    let exp_linearity = if prediction.kind == LawKind::ExpLaw {
        let xs: Vec<f64> = es.iter().map(|e| e.powf(-(params.p2 - 1.0))).collect();
        let ys: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        Some(linear_fit(&xs, &ys)?)
    } else {
        None
    };
    Ok(LifespanFit {
        predicted_slope: (prediction.kind == LawKind::PowerLaw).then_some(prediction.exponent),
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        prediction,
        exp_linearity,
        fitted_range: (es[es.len() - 1], es[0]),
        points,
    })
}

pub const LIFESPAN_COLUMNS: [&str; 5] = ["epsilon", "status", "lifespan", "horizon", "in_fit"];

pub fn lifespan_table(fit: &LifespanFit) -> CsvTable {
    let mut table = CsvTable::new(&LIFESPAN_COLUMNS);
    for p in &fit.points {
        table.push(vec![
            fmt_float(p.epsilon),
            p.status.label().to_string(),
            p.lifespan.map(fmt_float).unwrap_or_default(),
            fmt_float(p.horizon),
            p.lifespan.is_some().to_string(),
        ]);
    }
    table
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub steps: usize,
    pub final_time: f64,
    /// Run stopped on the blow-up threshold rather than the horizon.
    pub hit_threshold: bool,
    /// `max (u - v)+` for data `u0 <= v0`.
    pub ordered_violation: f64,
    /// `max (m - v)+` with `m` the memory-only run from `v0`.
    pub memory_truncation_violation: f64,
    /// `max (w - v)+` with `w` the reaction-only run from `v0`.
    pub reaction_truncation_violation: f64,
}

impl ComparisonReport {
    pub fn max_violation(&self) -> f64 {
        self.ordered_violation
            .max(self.memory_truncation_violation)
            .max(self.reaction_truncation_violation)
    }
}

fn excess(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max(x - y))
}

/// Marches `u` (from `u0`), `v` (from `v0`) and the memory-only and
/// reaction-only runs from `v0` in lockstep on one step sequence, tracking
/// the largest order violations over the space-time mesh.
pub fn comparison_check(
    params: &ProblemParams,
    u0: &Field,
    v0: &Field,
    config: &SolverConfig,
) -> Result<ComparisonReport> {
    config.validate()?;
    if u0.grid() != v0.grid() {
        return Err(invalid("comparison data live on different grids"));
    }
    if u0.values().iter().zip(v0.values()).any(|(a, b)| !(0.0 <= *a && a <= b)) {
        return Err(invalid("comparison data must satisfy 0 <= u0 <= v0"));
    }
    let mut runs = [
        Stepper::new(params, u0, config.stencil, Terms::FULL)?,
        Stepper::new(params, v0, config.stencil, Terms::FULL)?,
        Stepper::new(params, v0, config.stencil, Terms::MEMORY_ONLY)?,
        Stepper::new(params, v0, config.stencil, Terms::REACTION_ONLY)?,
    ];
    let sup0 = runs.iter().fold(0.0f64, |m, s| m.max(s.sup()));
    let threshold = config
        .threshold
        .unwrap_or(config.threshold_factor * sup0.max(f64::MIN_POSITIVE));
    let mut dt = config.dt.unwrap_or_else(|| runs[0].heat_dt());
    let mut report = ComparisonReport {
        steps: 0,
        final_time: 0.0,
        hit_threshold: false,
        ordered_violation: 0.0,
        memory_truncation_violation: 0.0,
        reaction_truncation_violation: 0.0,
    };
    let record = |runs: &[Stepper; 4], r: &mut ComparisonReport| {
        let v = runs[1].values();
        r.ordered_violation = r.ordered_violation.max(excess(runs[0].values(), v));
        r.memory_truncation_violation = r.memory_truncation_violation.max(excess(runs[2].values(), v));
        r.reaction_truncation_violation = r.reaction_truncation_violation.max(excess(runs[3].values(), v));
    };
    record(&runs, &mut report);
    loop {
        let t = runs[0].time();
        let remaining = config.horizon - t;
        if remaining <= config.horizon * 1e-12 || runs[0].steps() >= config.max_steps {
            break;
        }
        let trial = dt.min(remaining);
        let props = runs.iter_mut().map(|s| s.propose(trial)).collect::<Result<Vec<_>>>()?;
        if props.iter().any(|p| !p.finite) {
            report.hit_threshold = true;
            break;
        }
        let growth = runs.iter().zip(&props).fold(0.0f64, |m, (s, p)| m.max(s.growth(p)));
        if config.adaptive && growth > config.growth_limit {
            dt = trial / 2.0;
            if dt < config.min_dt {
                break;
            }
            continue;
        }
        for (s, p) in runs.iter_mut().zip(props) {
            s.commit(p)?;
        }
        record(&runs, &mut report);
        if runs.iter().any(|s| s.sup() >= threshold) {
            report.hit_threshold = true;
            break;
        }
    }
    report.steps = runs[0].steps();
    report.final_time = runs[0].time();
    Ok(report)
}
