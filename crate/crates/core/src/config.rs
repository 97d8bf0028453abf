//! Flat `key = value` run configuration.
//!
//! Keys are namespaced (`params.p1`, `grid.n`, `solver.dt`, ...). A command
//! reads what it needs through a [`Reader`], and keys nobody read are
//! reported as errors so typos do not pass silently.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::axisym::AxiGrid;
use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::grid::GridSpec;
use crate::solver::{Domain, InitialData, SolverConfig, Terms};
use crate::stencil::Stencil;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(config_err(format!("line {}: empty key", lineno + 1)));
            }
            if cfg.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(config_err(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| config_err(format!("override `{spec}` is not key=value")))?;
        if k.trim().is_empty() {
            return Err(config_err(format!("override `{spec}` has an empty key")));
        }
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn reader(&self) -> Reader<'_> {
        Reader {
            cfg: self,
            used: RefCell::new(BTreeSet::new()),
        }
    }
}

/// Typed access that remembers which keys were consumed.
#[derive(Debug)]
pub struct Reader<'a> {
    cfg: &'a Config,
    used: RefCell<BTreeSet<String>>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.cfg.get(key)
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| config_err(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.opt(key)?
            .ok_or_else(|| config_err(format!("missing required key `{key}`")))
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| config_err(format!("`{key}`: cannot parse `{s}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Fails on keys that were never read.
    pub fn finish(self) -> Result<()> {
        let used = self.used.into_inner();
        let unknown: Vec<&str> = self
            .cfg
            .entries
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(config_err(format!("unknown key(s): {}", unknown.join(", "))))
        }
    }
}

pub fn problem_params(r: &Reader) -> Result<ProblemParams> {
    ProblemParams::new(
        r.get("params.gamma", 0.5)?,
        r.get("params.p1", 1.5)?,
        r.get("params.p2", 2.5)?,
        r.get("params.n", 1)?,
    )
}

/// `grid.kind = box` (cube `grid.r`, `grid.rtau`, `grid.n`) or
/// `grid.kind = axisymmetric` (`grid.r`, `grid.rtau`, `grid.nr`, `grid.ntau`).
pub fn domain(r: &Reader) -> Result<Domain> {
    let kind = r.string("grid.kind", "box");
    match kind.as_str() {
        "box" => Ok(Domain::Grid(GridSpec::cube(
            r.get("grid.r", 10.0)?,
            r.get("grid.rtau", 40.0)?,
            r.get("grid.n", 61)?,
        )?)),
        "axisymmetric" => Ok(Domain::Axisymmetric(AxiGrid::new(
            r.get("grid.r", 40.0)?,
            r.get("grid.rtau", 2500.0)?,
            r.get("grid.nr", 81)?,
            r.get("grid.ntau", 1001)?,
        )?)),
        other => Err(config_err(format!(
            "grid.kind must be box or axisymmetric, got `{other}`"
        ))),
    }
}

/// `data.kind = bump` (`data.amplitude`, `data.width`) or
/// `data.kind = power` (`data.amplitude`, `data.kappa`); scaled by `data.epsilon`.
pub fn initial_data(r: &Reader) -> Result<InitialData> {
    let kind = r.string("data.kind", "bump");
    let amplitude = r.get("data.amplitude", 1.0)?;
    let data = match kind.as_str() {
        "bump" => InitialData::bump(amplitude, r.get("data.width", 1.0)?),
        "power" => InitialData::power_decay(r.require("data.kappa")?, amplitude),
        "zero" => InitialData::zero(),
        other => {
            return Err(config_err(format!(
                "data.kind must be bump, power or zero, got `{other}`"
            )))
        }
    }
    .scaled(r.get("data.epsilon", 1.0)?);
    data.validate()?;
    Ok(data)
}

pub fn solver(r: &Reader) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let stencil = match r.string("solver.stencil", "monotone").as_str() {
        "monotone" => Stencil::Monotone,
        "centered" => Stencil::Centered,
        other => {
            return Err(config_err(format!(
                "solver.stencil must be monotone or centered, got `{other}`"
            )))
        }
    };
    let terms = match r.string("solver.terms", "full").as_str() {
        "full" => Terms::FULL,
        "memory" => Terms::MEMORY_ONLY,
        "reaction" => Terms::REACTION_ONLY,
        "linear" => Terms::LINEAR,
        other => {
            return Err(config_err(format!(
                "solver.terms must be full, memory, reaction or linear, got `{other}`"
            )))
        }
    };
    let cfg = SolverConfig {
        stencil,
        horizon: r.get("solver.horizon", d.horizon)?,
        dt: r.opt("solver.dt")?,
        threshold_factor: r.get("solver.threshold_factor", d.threshold_factor)?,
        threshold: r.opt("solver.threshold")?,
        adaptive: r.get("solver.adaptive", d.adaptive)?,
        growth_limit: r.get("solver.growth_limit", d.growth_limit)?,
        min_dt: r.get("solver.min_dt", d.min_dt)?,
        max_steps: r.get("solver.max_steps", d.max_steps)?,
        terms,
    };
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let c = Config::parse("# header\n\nparams.p1 = 1.5  # inline\n grid.n=41\n").unwrap();
        assert_eq!(c.get("params.p1"), Some("1.5"));
        assert_eq!(c.get("grid.n"), Some("41"));
        assert_eq!(c.entries().len(), 2);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("params.p1 1.5").unwrap_err().is_config());
        assert!(Config::parse("= 3").is_err());
        assert!(Config::parse("a = 1\na = 2").is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let mut c = Config::parse("params.p1 = 1.5").unwrap();
        c.apply_override("params.p1=2.5").unwrap();
        assert_eq!(c.get("params.p1"), Some("2.5"));
        assert!(c.apply_override("nonsense").is_err());
    }

    #[test]
    fn unknown_keys_are_reported() {
        let c = Config::parse("params.p1 = 2\nparams.pl = 3").unwrap();
        let r = c.reader();
        let p = problem_params(&r).unwrap();
        assert_eq!(p.p1, 2.0);
        let err = r.finish().unwrap_err();
        assert!(err.to_string().contains("params.pl"), "{err}");
    }

    #[test]
    fn bad_values_name_the_key() {
        let c = Config::parse("grid.n = many").unwrap();
        let err = domain(&c.reader()).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("grid.n"));
    }

    #[test]
    fn lists_and_defaults() {
        let c = Config::parse("sweep.p1 = 1.5, 2.0,3").unwrap();
        let r = c.reader();
        assert_eq!(r.list::<f64>("sweep.p1").unwrap(), Some(vec![1.5, 2.0, 3.0]));
        assert_eq!(r.list::<f64>("sweep.p2").unwrap(), None);
        assert_eq!(r.get("x.y", 4usize).unwrap(), 4);
        r.finish().unwrap();
    }

    #[test]
    fn builders_read_every_namespace() {
        let text = "grid.kind = axisymmetric\ngrid.nr = 21\ngrid.ntau = 41\n\
                    data.kind = power\ndata.kappa = 1\ndata.amplitude = 0.01\ndata.epsilon = 0.5\n\
                    solver.stencil = centered\nsolver.terms = memory\nsolver.dt = 0.1\nsolver.horizon = 3";
        let c = Config::parse(text).unwrap();
        let r = c.reader();
        assert!(matches!(domain(&r).unwrap(), Domain::Axisymmetric(g) if g.nr == 21));
        let d = initial_data(&r).unwrap();
        assert_eq!(d.epsilon, 0.5);
        let s = solver(&r).unwrap();
        assert_eq!(s.stencil, Stencil::Centered);
        assert_eq!(s.terms, Terms::MEMORY_ONLY);
        assert_eq!(s.dt, Some(0.1));
        r.finish().unwrap();
    }

    #[test]
    fn invalid_solver_settings_are_config_errors() {
        let c = Config::parse("solver.horizon = -1").unwrap();
        assert!(solver(&c.reader()).unwrap_err().is_config());
        let c = Config::parse("data.kind = power").unwrap();
        assert!(initial_data(&c.reader()).unwrap_err().is_config());
    }
}
