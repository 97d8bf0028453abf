//! Command-line front end for the heislab experiments.
//!
//! Every command reads a flat config (`--config`, then `--set key=value`
//! overrides), writes its CSV tables and a `manifest.json` into `--out`, and
//! prints a short summary. Exit codes: 0 success, 2 config or usage error,
//! 3 runtime failure.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use heislab::config::{self, Config, Reader};
use heislab::experiments::{
    comparison_check, lifespan_sweep, lifespan_table, phase_sweep, run_on, sweep_table, LifespanOptions, SweepConfig,
};
use heislab::exponents::{classify, compute_exponents, lifespan_prediction, LawKind};
use heislab::mc::validate_kernel;
use heislab::output::{fmt_float, CsvTable, RunDir};
use heislab::solver::{DataKind, Domain};
use heislab::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "heislab", version, about = "Heat flow with memory on the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical exponents, region and lifespan law for one parameter point.
    Exponents(Common),
    /// One run to blow-up or the horizon.
    Simulate(Common),
    /// Phase-diagram sweep over a (p1, p2) lattice.
    Sweep(Common),
    /// Lifespan against data size, with a log-log fit.
    Lifespan(Common),
    /// Monte Carlo checks of the heat kernel.
    KernelValidate(Common),
    /// Comparison-principle check on ordered data.
    Compare(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "heislab-out")]
    out: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let flags = [
            ("params.gamma", self.gamma.map(|v| v.to_string())),
            ("params.n", self.n.map(|v| v.to_string())),
            ("params.p1", self.p1.map(|v| v.to_string())),
            ("params.p2", self.p2.map(|v| v.to_string())),
            ("run.seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v);
            }
        }
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }
}

type Job = Box<dyn FnOnce() -> Result<Outcome>>;

struct Outcome {
    name: &'static str,
    seed: Option<u64>,
    summary: serde_json::Value,
    tables: Vec<(&'static str, CsvTable)>,
}

fn exponents_cmd(r: &Reader) -> Result<Job> {
    let params = config::problem_params(r)?;
    let kappa: Option<f64> = r.opt("lifespan.kappa")?;
    Ok(Box::new(move || {
        let rep = compute_exponents(&params)?;
        let pred = lifespan_prediction(&params, kappa)?;
        println!(
            "gamma = {}  Q = {}  p1 = {}  p2 = {}",
            params.gamma,
            params.q(),
            params.p1,
            params.p2
        );
        let rows = [
            ("p_gamma", rep.p_gamma),
            ("p1_star", rep.p1_star),
            ("p2_star", rep.p2_star),
            ("p2_double_star", rep.p2_double_star),
            ("tilde_p1", rep.tilde_p1),
            ("tilde_p2", rep.tilde_p2),
            ("q_sc", rep.q_sc),
            ("p_sc1", rep.p_sc1),
        ];
        let mut table = CsvTable::new(&["name", "value"]);
        for (name, v) in rows {
            println!("  {name:<15} {v}");
            table.push(vec![
                name.into(),
                v.finite().map(fmt_float).unwrap_or_else(|| v.to_string()),
            ]);
        }
        println!("region: {}", rep.region);
        match pred.kind {
            LawKind::None => println!("lifespan law: none"),
            kind => println!("lifespan law: {kind:?}, exponent {}", pred.exponent),
        }
        Ok(Outcome {
            name: "exponents",
            seed: None,
            summary: json!({ "params": params, "report": rep, "lifespan": pred }),
            tables: vec![("exponents.csv", table)],
        })
    }))
}

fn simulate_cmd(r: &Reader) -> Result<Job> {
    let params = config::problem_params(r)?;
    let domain = config::domain(r)?;
    let data = config::initial_data(r)?;
    let solver = config::solver(r)?;
    Ok(Box::new(move || {
        let res = run_on(&params, &domain, &data, &solver)?;
        let mut table = CsvTable::new(&["t", "sup", "l1"]);
        for p in &res.series {
            table.push(vec![fmt_float(p.t), fmt_float(p.sup), fmt_float(p.l1)]);
        }
        println!("region (predicted): {}", classify(&params));
        println!("status: {:?}", res.status);
        println!(
            "steps: {}  rejected: {}  heat substeps: {}",
            res.steps, res.rejected_steps, res.heat_substeps
        );
        Ok(Outcome {
            name: "simulate",
            seed: None,
            summary: json!({
                "status": res.status,
                "steps": res.steps,
                "rejected_steps": res.rejected_steps,
                "heat_substeps": res.heat_substeps,
                "threshold": res.threshold,
                "params": params,
                "domain": domain,
                "data": data,
                "solver": solver,
            }),
            tables: vec![("series.csv", table)],
        })
    }))
}

fn sweep_cmd(r: &Reader) -> Result<Job> {
    let gamma = r.get("params.gamma", 0.5)?;
    let n = r.get("params.n", 1)?;
    let p1s: Vec<f64> = r.list("sweep.p1")?.unwrap_or_default();
    let p2s: Vec<f64> = r.list("sweep.p2")?.unwrap_or_default();
    let lattice: Vec<(f64, f64)> = p1s.iter().flat_map(|&a| p2s.iter().map(move |&b| (a, b))).collect();
    let cfg = SweepConfig {
        gamma,
        n,
        lattice,
        domain: config::domain(r)?,
        data: config::initial_data(r)?,
        solver: config::solver(r)?,
        threads: r.get("sweep.threads", 0)?,
        seed: r.get("run.seed", 0)?,
    };
    Ok(Box::new(move || {
        let rows = phase_sweep(&cfg)?;
        for row in &rows {
            println!(
                "p1 = {:<6} p2 = {:<6} predicted {:<16} observed {:<16} agree {}",
                row.p1,
                row.p2,
                row.region.to_string(),
                row.status.label(),
                row.agreement.label()
            );
        }
        Ok(Outcome {
            name: "sweep",
            seed: Some(cfg.seed),
            summary: json!({ "points": rows.len(), "sweep": cfg }),
            tables: vec![("sweep.csv", sweep_table(&rows))],
        })
    }))
}

fn lifespan_cmd(r: &Reader) -> Result<Job> {
    let params = config::problem_params(r)?;
    let domain = config::domain(r)?;
    let data = config::initial_data(r)?;
    let solver = config::solver(r)?;
    let epsilons = r.list("lifespan.epsilons")?.unwrap_or_else(|| vec![0.8, 0.4, 0.2, 0.1]);
    let data_kappa = match data.kind {
        DataKind::PowerDecay { kappa, .. } => Some(kappa),
        _ => None,
    };
    let options = LifespanOptions {
        kappa: r.opt("lifespan.kappa")?.or(data_kappa),
        max_extensions: r.get("lifespan.extensions", LifespanOptions::default().max_extensions)?,
    };
    Ok(Box::new(move || {
        let fit = lifespan_sweep(&params, &data, &epsilons, &domain, &solver, &options)?;
        for p in &fit.points {
            println!("eps = {:<8} {:?}", p.epsilon, p.status);
        }
        match fit.predicted_slope {
            Some(s) => println!("slope {:.4} (predicted {s:.4}), R^2 {:.5}", fit.slope, fit.r_squared),
            None => println!("slope {:.4}, R^2 {:.5}", fit.slope, fit.r_squared),
        }
        Ok(Outcome {
            name: "lifespan",
            seed: None,
            summary: json!({ "fit": fit, "params": params, "domain": domain, "data": data, "solver": solver }),
            tables: vec![("lifespan.csv", lifespan_table(&fit))],
        })
    }))
}

fn kernel_cmd(r: &Reader) -> Result<Job> {
    let t = r.get("kernel.t", 0.25)?;
    let samples = r.get("kernel.samples", 200_000)?;
    let bins = r.get("kernel.bins", 8)?;
    let seed = r.get("run.seed", 2024)?;
    Ok(Box::new(move || {
        let v = validate_kernel(t, samples, seed, bins)?;
        let mut table = CsvTable::new(&["check", "x", "y", "tau", "lhs", "rhs", "rel_diff"]);
        for (name, checks) in [("symmetry", &v.symmetry), ("scaling", &v.scaling)] {
            for c in checks {
                table.push(vec![
                    name.into(),
                    fmt_float(c.probe.0),
                    fmt_float(c.probe.1),
                    fmt_float(c.probe.2),
                    fmt_float(c.lhs),
                    fmt_float(c.rhs),
                    fmt_float(c.rel_diff),
                ]);
            }
        }
        println!("mass {:.5} +- {:.5}", v.mass, v.mass_std_error);
        println!("symmetry max rel diff {:.4}", v.max_symmetry_diff());
        println!("scaling max rel diff {:.4}", v.max_scaling_diff());
        println!("semigroup z-score {:.3}", v.semigroup_z);
        Ok(Outcome {
            name: "kernel-validate",
            seed: Some(seed),
            summary: json!(v),
            tables: vec![("kernel.csv", table)],
        })
    }))
}

fn compare_cmd(r: &Reader) -> Result<Job> {
    let params = config::problem_params(r)?;
    let Domain::Grid(grid) = config::domain(r)? else {
        return Err(Error::Config("compare needs grid.kind = box".into()));
    };
    let data = config::initial_data(r)?;
    let solver = config::solver(r)?;
    let ratio: f64 = r.get("compare.ratio", 0.5)?;
    Ok(Box::new(move || {
        let v0 = data.realize(&grid)?;
        let mut u0 = v0.clone();
        u0.scale(ratio);
        let rep = comparison_check(&params, &u0, &v0, &solver)?;
        let mut table = CsvTable::new(&[
            "steps",
            "final_time",
            "hit_threshold",
            "ordered",
            "memory_truncation",
            "reaction_truncation",
        ]);
        table.push(vec![
            rep.steps.to_string(),
            fmt_float(rep.final_time),
            rep.hit_threshold.to_string(),
            fmt_float(rep.ordered_violation),
            fmt_float(rep.memory_truncation_violation),
            fmt_float(rep.reaction_truncation_violation),
        ]);
        println!("steps {}  t = {}", rep.steps, rep.final_time);
        println!("max (u - v)+           {:e}", rep.ordered_violation);
        println!("max (memory-only - v)+ {:e}", rep.memory_truncation_violation);
        println!("max (reaction-only - v)+ {:e}", rep.reaction_truncation_violation);
        Ok(Outcome {
            name: "compare",
            seed: None,
            summary: json!({ "report": rep, "ratio": ratio, "params": params, "data": data, "solver": solver }),
            tables: vec![("compare.csv", table)],
        })
    }))
}

fn execute(cmd: &Command) -> Result<()> {
    let (common, run): (&Common, fn(&Reader) -> Result<Job>) = match cmd {
        Command::Exponents(c) => (c, exponents_cmd),
        Command::Simulate(c) => (c, simulate_cmd),
        Command::Sweep(c) => (c, sweep_cmd),
        Command::Lifespan(c) => (c, lifespan_cmd),
        Command::KernelValidate(c) => (c, kernel_cmd),
        Command::Compare(c) => (c, compare_cmd),
    };
    let cfg = common.load()?;
    let start = Instant::now();
    let reader = cfg.reader();
    let job = run(&reader)?;
    reader.finish()?;
    let outcome = job()?;
    let mut dir = RunDir::create(&common.out)?;
    for (name, table) in &outcome.tables {
        dir.write_csv(name, table)?;
    }
    let manifest = dir.finish(
        outcome.name,
        cfg.entries().clone(),
        outcome.seed,
        start.elapsed().as_secs_f64(),
        outcome.summary,
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
