//! `key = value` run configuration shared by the config file and flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_rational::Ratio;
use seglab::manybody::SigmaMode;

use crate::domain_spec::DomainSpec;
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    BulkTable,
    BoundsScan,
    SurfaceEnergy,
    PhaseDiagram,
    FkGround,
    EdRun,
    Scaling,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BulkTable => "bulk-table",
            Command::BoundsScan => "bounds-scan",
            Command::SurfaceEnergy => "surface-energy",
            Command::PhaseDiagram => "phase-diagram",
            Command::FkGround => "fk-ground",
            Command::EdRun => "ed-run",
            Command::Scaling => "scaling",
        }
    }

    pub fn all() -> [Command; 7] {
        use Command::*;
        [BulkTable, BoundsScan, SurfaceEnergy, PhaseDiagram, FkGround, EdRun, Scaling]
    }

    /// Keys the command reads besides the common ones.
    fn keys(&self) -> &'static [&'static str] {
        match self {
            Command::BulkTable => &["dim", "points", "grid"],
            Command::BoundsScan => &["dim", "points", "max_size", "connected", "box_side", "budget"],
            Command::SurfaceEnergy => {
                &["dim", "points", "rho", "max_size", "connected", "box_side", "budget", "eta"]
            }
            Command::PhaseDiagram => &["dim", "points", "rho2", "x_points", "t_points"],
            Command::FkGround => &[
                "domain", "n1", "n2", "u", "strategy", "budget", "chains", "steps", "temp_start", "temp_end",
            ],
            Command::EdRun => &[
                "domain", "n1", "n2", "u", "t", "budget", "tolerance", "max_matvecs", "sigma_mode", "a_estimate", "points",
            ],
            Command::Scaling => &["lengths", "rho1", "rho2", "u", "t", "x", "tolerance", "max_matvecs"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Keys accepted by every command. `output` and `threads` do not affect
/// results and are left out of the echoed configuration.
pub const COMMON_KEYS: &[&str] = &["seed", "output", "threads"];
const UNECHOED: &[&str] = &["output", "threads"];

/// Ordered `key -> value` pairs, keys normalized to `snake_case`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigMap(pub BTreeMap<String, String>);

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = normalize_key(k);
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(CliError::Config(format!("line {}: bad key `{}`", i + 1, k.trim())));
            }
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: key `{key}` given twice", i + 1)));
            }
        }
        Ok(ConfigMap(map))
    }

    /// Entries of `other` replace those of `self`.
    pub fn overlay(mut self, other: ConfigMap) -> Self {
        self.0.extend(other.0);
        self
    }

    pub fn echo(&self) -> BTreeMap<String, String> {
        self.0.iter().filter(|(k, _)| !UNECHOED.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StrategyChoice {
    Exhaustive,
    Anneal,
}

/// Validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub points: Option<usize>,
    pub grid: usize,
    pub max_size: usize,
    pub connected: bool,
    pub box_side: usize,
    pub budget: Option<usize>,
    pub rho: Option<Ratio<usize>>,
    pub eta: Option<f64>,
    pub rho1: Option<Ratio<usize>>,
    pub rho2: Option<f64>,
    pub rho2_ratio: Option<Ratio<usize>>,
    pub x_points: usize,
    pub t_points: usize,
    pub domain: Option<DomainSpec>,
    pub n1: usize,
    pub n2: usize,
    pub u: f64,
    pub t: f64,
    pub strategy: StrategyChoice,
    pub chains: usize,
    pub steps: usize,
    pub temp_start: f64,
    pub temp_end: f64,
    pub tolerance: f64,
    pub max_matvecs: usize,
    pub sigma_mode: SigmaMode,
    pub a_estimate: Option<f64>,
    pub lengths: Vec<usize>,
    pub x: i32,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Echo of the merged key/value pairs.
    pub echo: BTreeMap<String, String>,
}

struct Reader<'a> {
    map: &'a ConfigMap,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.0.get(key).map(String::as_str)
    }

    fn opt<T: FromStr>(&self, key: &str, what: &str) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("`{key}` = `{v}` is not {what}"))),
        }
    }

    fn req<T: FromStr>(&self, key: &str, what: &str, command: Command) -> CliResult<T> {
        self.opt(key, what)?
            .ok_or_else(|| CliError::Config(format!("`{command}` needs `{key}` ({what})")))
    }

    fn positive(&self, key: &str, default: Option<usize>, command: Command) -> CliResult<usize> {
        let v = match default {
            Some(d) => self.opt(key, "a positive integer")?.unwrap_or(d),
            None => self.req(key, "a positive integer", command)?,
        };
        if v == 0 {
            return Err(CliError::Config(format!("`{key}` must be positive")));
        }
        Ok(v)
    }

    fn finite(&self, key: &str) -> CliResult<Option<f64>> {
        let v: Option<f64> = self.opt(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(CliError::Config(format!("`{key}` must be finite"))),
            other => Ok(other),
        }
    }

    fn ratio(&self, key: &str) -> CliResult<Option<Ratio<usize>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse_ratio(v)
                .map(Some)
                .ok_or_else(|| CliError::Config(format!("`{key}` = `{v}` is not a fraction like 1/3"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> CliResult<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(CliError::Config(format!("`{key}` = `{v}` is not true/false"))),
        }
    }
}

pub fn parse_ratio(text: &str) -> Option<Ratio<usize>> {
    let r: Ratio<usize> = text.trim().parse().ok()?;
    (*r.denom() != 0).then_some(r)
}

fn parse_lengths(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&l| l > 0)
                .ok_or_else(|| CliError::Config(format!("`lengths` entry `{}` is not a positive integer", s.trim())))
        })
        .collect()
}

impl RunConfig {
    pub fn from_map(command: Command, map: &ConfigMap) -> CliResult<Self> {
        for key in map.0.keys() {
            if !COMMON_KEYS.contains(&key.as_str()) && !command.keys().contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "`{key}` is not used by `{command}`; accepted keys: {}",
                    command.keys().iter().chain(COMMON_KEYS).copied().collect::<Vec<_>>().join(", ")
                )));
            }
        }
        let r = Reader { map };
        let uses = |k: &str| command.keys().contains(&k);

        let dim = if uses("dim") { r.req("dim", "1, 2 or 3", command)? } else { 1 };
        if !(1..=3).contains(&dim) {
            return Err(CliError::Config(format!("`dim` = {dim} must be 1, 2 or 3")));
        }
        let points = r.opt("points", "a positive integer")?;
        if points == Some(0) {
            return Err(CliError::Config("`points` must be positive".into()));
        }

        let connected = r.flag("connected", true)?;
        let box_side = r.opt("box_side", "a positive integer")?.unwrap_or(0);
        let max_size = if uses("max_size") { r.positive("max_size", None, command)? } else { 0 };
        if uses("connected") && !connected && box_side == 0 {
            return Err(CliError::Config("`connected = false` needs a positive `box_side`".into()));
        }
        if uses("connected") && connected && map.0.contains_key("box_side") {
            return Err(CliError::Config("`box_side` only applies with `connected = false`".into()));
        }

        let rho = r.ratio("rho")?;
        if command == Command::SurfaceEnergy {
            match rho {
                None => return Err(CliError::Config("`surface-energy` needs `rho` (a fraction like 1/24)".into())),
                Some(q) if *q.numer() == 0 || q > Ratio::from_integer(1) => {
                    return Err(CliError::Config(format!("`rho` = {q} must lie in (0, 1]")))
                }
                _ => {}
            }
        }
        let eta = r.finite("eta")?;
        if let Some(e) = eta {
            if !(e > 0.0 && e < 1.0) {
                return Err(CliError::Config(format!("`eta` = {e} must lie in (0, 1)")));
            }
        }

        let (mut rho2, mut rho2_ratio, mut rho1) = (None, None, None);
        match command {
            Command::PhaseDiagram => {
                let v: f64 = r.req("rho2", "a number in (0, 1)", command)?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(CliError::Config(format!("`rho2` = {v} must lie in (0, 1)")));
                }
                rho2 = Some(v);
            }
            Command::Scaling => {
                let need = |k: &str| {
                    r.ratio(k)?.ok_or_else(|| CliError::Config(format!("`scaling` needs `{k}` (a fraction like 1/3)")))
                };
                let (a, b) = (need("rho1")?, need("rho2")?);
                if a + b > Ratio::from_integer(1) {
                    return Err(CliError::Config(format!("`rho1` + `rho2` = {} exceeds 1", a + b)));
                }
                rho1 = Some(a);
                rho2_ratio = Some(b);
                rho2 = Some(*b.numer() as f64 / *b.denom() as f64);
            }
            _ => {}
        }

        let domain = match r.raw("domain") {
            Some(s) => Some(DomainSpec::parse(s)?),
            None if uses("domain") => return Err(CliError::Config(format!("`{command}` needs `domain` (chain:L, box:AxB or file:path)"))),
            None => None,
        };
        let n1 = if uses("n1") { r.req("n1", "a particle number", command)? } else { 0 };
        let n2 = if uses("n2") { r.req("n2", "a particle number", command)? } else { 0 };
        let u: f64 = if uses("u") { r.req("u", "a number", command)? } else { 0.0 };
        if !(u.is_finite() && u >= 0.0) {
            return Err(CliError::Config(format!("`u` = {u} must be finite and nonnegative")));
        }
        let t: f64 = if uses("t") { r.req("t", "a number in [0, 1]", command)? } else { 0.0 };
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Config(format!("`t` = {t} must lie in [0, 1]")));
        }

        let strategy = match r.raw("strategy") {
            None | Some("exhaustive") => StrategyChoice::Exhaustive,
            Some("anneal") => StrategyChoice::Anneal,
            Some(v) => return Err(CliError::Config(format!("`strategy` = `{v}`: use exhaustive or anneal"))),
        };
        let anneal_keys = ["chains", "steps", "temp_start", "temp_end"];
        if strategy == StrategyChoice::Exhaustive {
            if let Some(k) = anneal_keys.iter().find(|k| map.0.contains_key(**k)) {
                return Err(CliError::Config(format!("`{k}` only applies with `strategy = anneal`")));
            }
        }
        let temp_start = r.finite("temp_start")?.unwrap_or(1.0);
        let temp_end = r.finite("temp_end")?.unwrap_or(1e-3);
        if !(temp_start > 0.0 && temp_end > 0.0) {
            return Err(CliError::Config("anneal temperatures must be positive".into()));
        }

        let tolerance = r.finite("tolerance")?.unwrap_or(1e-9);
        if !(tolerance > 0.0) {
            return Err(CliError::Config("`tolerance` must be positive".into()));
        }
        let sigma_mode = match r.raw("sigma_mode") {
            None | Some("zero-extended") => SigmaMode::ZeroExtended,
            Some("restricted") => SigmaMode::Restricted,
            Some(v) => return Err(CliError::Config(format!("`sigma_mode` = `{v}`: use zero-extended or restricted"))),
        };
        let lengths = match r.raw("lengths") {
            Some(v) => parse_lengths(v)?,
            None if uses("lengths") => return Err(CliError::Config("`scaling` needs `lengths` (e.g. 6,9,12)".into())),
            None => Vec::new(),
        };
        let x = r.opt("x", "an integer")?.unwrap_or(1);

        Ok(RunConfig {
            command,
            dim,
            points,
            grid: r.positive("grid", Some(99), command)?,
            max_size,
            connected,
            box_side,
            budget: r.opt("budget", "a positive integer")?,
            rho,
            eta,
            rho1,
            rho2,
            rho2_ratio,
            x_points: r.positive("x_points", Some(50), command)?,
            t_points: r.positive("t_points", Some(50), command)?,
            domain,
            n1,
            n2,
            u,
            t,
            strategy,
            chains: r.positive("chains", Some(8), command)?,
            steps: r.positive("steps", Some(2000), command)?,
            temp_start,
            temp_end,
            tolerance,
            max_matvecs: r.positive("max_matvecs", Some(200_000), command)?,
            sigma_mode,
            a_estimate: r.finite("a_estimate")?,
            lengths,
            x,
            seed: r.opt("seed", "a nonnegative integer")?.unwrap_or(0),
            output: r.raw("output").map(PathBuf::from),
            threads: match r.opt::<usize>("threads", "a positive integer")? {
                Some(0) => return Err(CliError::Config("`threads` must be positive".into())),
                other => other,
            },
            echo: map.echo(),
        })
    }
}
