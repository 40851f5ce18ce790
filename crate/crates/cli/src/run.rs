//! Command execution and output formatting.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

use serde::Serialize;

use seglab::bounds::{check_surface_coefficient, estimate_a, scan_sandwich, write_scan_csv, SurfaceEnergyEstimate, SurfaceCoefficientReport};
use seglab::bulk::{Bulk, BulkTable, Quadrature};
use seglab::lattice::Enumeration;
use seglab::manybody::{
    fk_ground, ground_state, report, sigma_scaling, write_scaling_csv, AnnealSchedule, FockSector,
    HubbardOperator, SolverOptions, Strategy,
};
use seglab::segregation::{boundary_offsets, phase_diagram, write_phase_csv, PhaseGrid};

use crate::config::{Command, RunConfig, StrategyChoice};
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "seglab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const QUADRATURE_RULE: &str = "split-gauss-legendre";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureMeta {
    pub rule: &'static str,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: BTreeMap<String, String>,
    pub quadrature: Option<QuadratureMeta>,
    pub seed: u64,
}

impl Meta {
    fn new(cfg: &RunConfig, quadrature: Option<usize>) -> Self {
        Meta {
            tool: TOOL,
            version: VERSION,
            command: cfg.command.name(),
            config: cfg.echo.clone(),
            quadrature: quadrature.map(|points| QuadratureMeta { rule: QUADRATURE_RULE, points }),
            seed: cfg.seed,
        }
    }

    fn csv_preamble(&self, extra: &[(&str, String)]) -> String {
        let mut s = format!("# {} {}\n# command={}\n", self.tool, self.version, self.command);
        for (k, v) in &self.config {
            s.push_str(&format!("# config.{k}={v}\n"));
        }
        match &self.quadrature {
            Some(q) => s.push_str(&format!("# quadrature={} points={}\n", q.rule, q.points)),
            None => s.push_str("# quadrature=none\n"),
        }
        s.push_str(&format!("# seed={}\n", self.seed));
        for (k, v) in extra {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s
    }
}

#[derive(Serialize)]
struct JsonOutput<'a, T: Serialize> {
    meta: &'a Meta,
    result: T,
}

fn json<T: Serialize>(meta: &Meta, result: T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&JsonOutput { meta, result })
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn csv(meta: &Meta, extra: &[(&str, String)], body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<String> {
    let mut buf = meta.csv_preamble(extra).into_bytes();
    body(&mut buf).map_err(|e| CliError::Io("buffer".into(), e))?;
    Ok(String::from_utf8(buf).expect("utf-8 output"))
}

fn quadrature_points(cfg: &RunConfig) -> usize {
    cfg.points.unwrap_or_else(|| Quadrature::default_points(cfg.dim))
}

fn family(cfg: &RunConfig) -> Enumeration {
    Enumeration {
        dim: cfg.dim,
        max_size: cfg.max_size,
        connected: cfg.connected,
        box_side: cfg.box_side,
        budget: cfg.budget.unwrap_or(Enumeration::DEFAULT_BUDGET),
    }
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions { tolerance: cfg.tolerance, max_matvecs: cfg.max_matvecs, seed: cfg.seed, ..SolverOptions::default() }
}

#[derive(Serialize)]
struct SurfaceEnergyResult {
    estimate: SurfaceEnergyEstimate,
    coefficient_check: Option<SurfaceCoefficientReport>,
}

/// Runs the command and returns the output file contents.
pub fn execute(cfg: &RunConfig) -> CliResult<String> {
    match cfg.command {
        Command::BulkTable => {
            let points = quadrature_points(cfg);
            let table = BulkTable::build(cfg.dim, points, &BulkTable::uniform_grid(cfg.grid))?;
            csv(&Meta::new(cfg, Some(points)), &[], |w| table.write_csv(w))
        }
        Command::BoundsScan => {
            let points = quadrature_points(cfg);
            let bulk = Bulk::with_points(cfg.dim, points)?;
            let domains = family(cfg).run()?;
            let rows = scan_sandwich(&bulk, &domains)?;
            let violations = rows.iter().filter(|r| !r.1.holds()).count();
            let extra = [("domains", domains.len().to_string()), ("records", rows.len().to_string()), ("violations", violations.to_string())];
            csv(&Meta::new(cfg, Some(points)), &extra, |w| write_scan_csv(w, &rows))
        }
        Command::SurfaceEnergy => {
            let points = quadrature_points(cfg);
            let bulk = Bulk::with_points(cfg.dim, points)?;
            let rho = cfg.rho.expect("validated");
            let estimate = estimate_a(&bulk, rho, &family(cfg))?;
            let coefficient_check = cfg.eta.map(|eta| check_surface_coefficient(&bulk, &estimate, eta)).transpose()?;
            json(&Meta::new(cfg, Some(points)), SurfaceEnergyResult { estimate, coefficient_check })
        }
        Command::PhaseDiagram => {
            let points = quadrature_points(cfg);
            let bulk = Bulk::with_points(cfg.dim, points)?;
            let grid = PhaseGrid { x_points: cfg.x_points, t_points: cfg.t_points, rho2: cfg.rho2.expect("validated") };
            let rows = phase_diagram(&bulk, &grid)?;
            let worst = boundary_offsets(&bulk, &grid, &rows)?.into_iter().map(|o| o.1).fold(0.0, f64::max);
            csv(&Meta::new(cfg, Some(points)), &[("max_boundary_offset_cells", worst.to_string())], |w| {
                write_phase_csv(w, cfg.dim, &rows)
            })
        }
        Command::FkGround => {
            let dom = cfg.domain.as_ref().expect("validated").resolve()?;
            let strategy = match cfg.strategy {
                StrategyChoice::Exhaustive => Strategy::Exhaustive { budget: cfg.budget.unwrap_or(Strategy::DEFAULT_BUDGET) },
                StrategyChoice::Anneal => Strategy::Anneal(AnnealSchedule {
                    seed: cfg.seed,
                    chains: cfg.chains,
                    steps: cfg.steps,
                    temp_start: cfg.temp_start,
                    temp_end: cfg.temp_end,
                }),
            };
            let result = fk_ground(&dom, cfg.n1, cfg.n2, cfg.u, &strategy)?;
            json(&Meta::new(cfg, None), result)
        }
        Command::EdRun => {
            let dom = cfg.domain.as_ref().expect("validated").resolve()?;
            let budget = cfg.budget.unwrap_or(FockSector::DEFAULT_BUDGET);
            let op = HubbardOperator::new(FockSector::with_budget(&dom, cfg.n1, cfg.n2, budget)?, cfg.u, cfg.t)?;
            let gs = ground_state(&op, &solver_options(cfg))?;
            let points = cfg.a_estimate.map(|_| quadrature_points(cfg));
            let bulk = points.map(|p| Bulk::with_points(dom.dim(), p)).transpose()?;
            let bound = bulk.as_ref().zip(cfg.a_estimate);
            let result = report(&gs, cfg.sigma_mode, bound)?;
            json(&Meta::new(cfg, points), result)
        }
        Command::Scaling => {
            let table = sigma_scaling(
                &cfg.lengths,
                cfg.rho1.expect("validated"),
                cfg.rho2_ratio.expect("validated"),
                cfg.u,
                cfg.t,
                cfg.x,
                &SolverOptions { probe_degeneracy: false, ..solver_options(cfg) },
            )?;
            let exponent = table.exponent.map_or("none".to_string(), |e| e.to_string());
            csv(&Meta::new(cfg, None), &[("exponent", exponent)], |w| write_scaling_csv(w, &table))
        }
    }
}

/// Runs the command and writes its output to the configured path or stdout.
pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let text = execute(cfg)?;
    match &cfg.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io("stdout".into(), e)),
    }
}
