//! Energy of segregated states and the restricted phase diagram.
//!
//! Light particles (density `ρ1`) occupy a fraction `1-ν` of the volume and
//! heavy particles (density `ρ2`, hopping `t`) the fraction `ν`, with
//! `ρ2 ≤ ν ≤ 1-ρ1`. Neglecting interfaces the energy per site is
//!
//! ```text
//! e(ρ1, ρ2; ν) = (1-ν) e(ρ1/(1-ν)) + t ν e(ρ2/ν),
//! ```
//!
//! which is convex in `ν` with derivative `ξ(ρ1/(1-ν)) - t ξ(ρ2/ν)`.

use std::io;

use rayon::prelude::*;
use serde::Serialize;

use crate::bulk::Bulk;
use crate::{Error, Result};

/// Bisection tolerance on `ν`.
pub const NU_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegPoint {
    pub rho1: f64,
    pub rho2: f64,
    pub t: f64,
}

impl SegPoint {
    pub fn new(rho1: f64, rho2: f64, t: f64) -> Result<Self> {
        let finite = rho1.is_finite() && rho2.is_finite() && t.is_finite();
        if !finite || rho1 <= 0.0 || rho2 <= 0.0 || rho1 + rho2 > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "densities ρ1 = {rho1}, ρ2 = {rho2} need ρ1, ρ2 > 0 and ρ1 + ρ2 ≤ 1"
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("hopping ratio t = {t} not in [0, 1]")));
        }
        Ok(SegPoint { rho1, rho2, t })
    }

    /// Admissible range `[ρ2, 1-ρ1]` of the heavy volume fraction.
    pub fn nu_range(&self) -> (f64, f64) {
        (self.rho2, (1.0 - self.rho1).max(self.rho2))
    }

    /// `ρ2 / (ρ1 + ρ2)`: heavy fraction with equal densities in both phases.
    pub fn uniform_nu(&self) -> f64 {
        self.rho2 / (self.rho1 + self.rho2)
    }

    /// `ρ1 / (1 - ρ2)`: light density when heavy particles are fully packed.
    pub fn packed_light_density(&self) -> f64 {
        (self.rho1 / (1.0 - self.rho2)).min(1.0)
    }

    fn check_nu(&self, nu: f64) -> Result<()> {
        let (lo, hi) = self.nu_range();
        if !(nu >= lo - 1e-12 && nu <= hi + 1e-12) {
            return Err(Error::InvalidArgument(format!("ν = {nu} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn densities(&self, nu: f64) -> (f64, f64) {
        let light = if nu >= 1.0 { 1.0 } else { (self.rho1 / (1.0 - nu)).min(1.0) };
        let heavy = (self.rho2 / nu).min(1.0);
        (light, heavy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// `ν* = ρ2`: heavy particles at density 1.
    HeavySaturated,
    /// `ρ2 < ν* < ρ2/(ρ1+ρ2)`.
    HeavyPartial,
    /// `t = 1`, `ν* = ρ2/(ρ1+ρ2)`: equal densities in both phases.
    HeavyUniformDensity,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::HeavySaturated => "heavy-saturated",
            Phase::HeavyPartial => "heavy-partial",
            Phase::HeavyUniformDensity => "heavy-uniform-density",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegResult {
    pub nu: f64,
    pub energy: f64,
    pub phase: Phase,
    /// `ρ2 / ν*`.
    pub heavy_density: f64,
}

/// `e(ρ1, ρ2; ν)`.
pub fn seg_energy(bulk: &Bulk, p: &SegPoint, nu: f64) -> Result<f64> {
    p.check_nu(nu)?;
    let (light, heavy) = p.densities(nu);
    Ok((1.0 - nu) * bulk.energy(light)? + p.t * nu * bulk.energy(heavy)?)
}

/// `ξ(ρ1/(1-ν)) - t ξ(ρ2/ν)`.
pub fn seg_energy_derivative(bulk: &Bulk, p: &SegPoint, nu: f64) -> Result<f64> {
    p.check_nu(nu)?;
    let (light, heavy) = p.densities(nu);
    Ok(bulk.xi(light)? - p.t * bulk.xi(heavy)?)
}

/// `t_c = ξ(ρ1/(1-ρ2)) / 2d`.
pub fn critical_hopping(bulk: &Bulk, rho1: f64, rho2: f64) -> Result<f64> {
    let p = SegPoint::new(rho1, rho2, 0.0)?;
    Ok(bulk.xi(p.packed_light_density())? / (2.0 * bulk.dim() as f64))
}

/// Minimizes the segregated energy over `ν`. The derivative is increasing,
/// so either it is nonnegative at `ν = ρ2` or it has a root in
/// `(ρ2, ρ2/(ρ1+ρ2)]`, located by bisection.
pub fn minimize_nu(bulk: &Bulk, p: &SegPoint) -> Result<SegResult> {
    let (lo, _) = p.nu_range();
    let slope_at_packed = seg_energy_derivative(bulk, p, lo)?;
    if slope_at_packed >= 0.0 {
        return finish(bulk, p, lo, Phase::HeavySaturated);
    }
    let (mut a, mut b) = (lo, p.uniform_nu());
    while b - a > NU_TOL {
        let mid = 0.5 * (a + b);
        if seg_energy_derivative(bulk, p, mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let nu = 0.5 * (a + b);
    let phase = if p.t >= 1.0 { Phase::HeavyUniformDensity } else { Phase::HeavyPartial };
    finish(bulk, p, nu, phase)
}

fn finish(bulk: &Bulk, p: &SegPoint, nu: f64, phase: Phase) -> Result<SegResult> {
    Ok(SegResult { nu, energy: seg_energy(bulk, p, nu)?, phase, heavy_density: p.rho2 / nu })
}

/// Phase label recomputed from the minimizer alone.
pub fn classify(p: &SegPoint, nu: f64) -> Phase {
    if nu <= p.rho2 {
        Phase::HeavySaturated
    } else if p.t >= 1.0 {
        Phase::HeavyUniformDensity
    } else {
        Phase::HeavyPartial
    }
}

/// Grid over `x = ρ1/(1-ρ2) ∈ (0, 1)` and `t ∈ (0, 1]` at fixed `ρ2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub x_points: usize,
    pub t_points: usize,
    pub rho2: f64,
}

impl PhaseGrid {
    pub fn xs(&self) -> Vec<f64> {
        (1..=self.x_points).map(|i| i as f64 / (self.x_points + 1) as f64).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (1..=self.t_points).map(|j| j as f64 / self.t_points as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub rho1: f64,
    pub rho2: f64,
    pub x: f64,
    pub t: f64,
    pub nu_star: f64,
    pub heavy_density: f64,
    pub phase: Phase,
}

pub fn phase_diagram(bulk: &Bulk, grid: &PhaseGrid) -> Result<Vec<PhaseRow>> {
    if grid.x_points == 0 || grid.t_points == 0 {
        return Err(Error::InvalidArgument("phase grid needs at least one point per axis".into()));
    }
    if !(grid.rho2 > 0.0 && grid.rho2 < 1.0) {
        return Err(Error::InvalidArgument(format!("ρ2 = {} not in (0, 1)", grid.rho2)));
    }
    let xs = grid.xs();
    let ts = grid.ts();
    let cells: Vec<(f64, f64)> =
        xs.iter().flat_map(|&x| ts.iter().map(move |&t| (x, t))).collect();
    cells
        .par_iter()
        .map(|&(x, t)| {
            let rho1 = x * (1.0 - grid.rho2);
            let p = SegPoint::new(rho1, grid.rho2, t)?;
            let r = minimize_nu(bulk, &p)?;
            Ok(PhaseRow {
                rho1,
                rho2: grid.rho2,
                x,
                t,
                nu_star: r.nu,
                heavy_density: r.heavy_density,
                phase: r.phase,
            })
        })
        .collect()
}

pub const PHASE_CSV_HEADER: &str = "d,rho1,rho2,x,t,nu_star,heavy_density,phase";

pub fn write_phase_csv<W: io::Write>(mut w: W, dim: usize, rows: &[PhaseRow]) -> io::Result<()> {
    writeln!(w, "{PHASE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{dim},{},{},{},{},{},{},{}",
            r.rho1,
            r.rho2,
            r.x,
            r.t,
            r.nu_star,
            r.heavy_density,
            r.phase.label()
        )?;
    }
    Ok(())
}

/// For each `x` column, the largest distance (in `t` grid cells) between
/// the computed saturated/partial boundary and `t_c(x) = ξ(x)/2d`.
pub fn boundary_offsets(bulk: &Bulk, grid: &PhaseGrid, rows: &[PhaseRow]) -> Result<Vec<(f64, f64)>> {
    let dt = 1.0 / grid.t_points as f64;
    let mut out = Vec::new();
    for x in grid.xs() {
        let column: Vec<&PhaseRow> = rows.iter().filter(|r| r.x == x).collect();
        let tc = bulk.xi(x)? / (2.0 * bulk.dim() as f64);
        let last_saturated = column
            .iter()
            .filter(|r| r.phase == Phase::HeavySaturated)
            .map(|r| r.t)
            .fold(0.0, f64::max);
        let first_other = column
            .iter()
            .filter(|r| r.phase != Phase::HeavySaturated)
            .map(|r| r.t)
            .fold(1.0 + dt, f64::min);
        // The computed boundary lies between these two grid values.
        let computed = 0.5 * (last_saturated + first_other);
        out.push((x, (computed - tc).abs() / dt));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn e1(rho: f64) -> f64 {
        2.0 * rho - 2.0 / PI * (PI * rho).sin()
    }

    fn xi1(rho: f64) -> f64 {
        rho * (2.0 - 2.0 * (PI * rho).cos()) - e1(rho)
    }

    #[test]
    fn point_validation() {
        assert!(SegPoint::new(0.0, 0.3, 0.5).is_err());
        assert!(SegPoint::new(0.6, 0.6, 0.5).is_err());
        assert!(SegPoint::new(0.3, 0.3, 1.5).is_err());
        let p = SegPoint::new(0.25, 0.25, 0.5).unwrap();
        assert!(seg_energy(&Bulk::with_default(1).unwrap(), &p, 0.1).is_err());
    }

    #[test]
    fn energy_at_packed_heavy_phase() {
        let bulk = Bulk::with_default(1).unwrap();
        let p = SegPoint::new(0.2, 0.3, 0.4).unwrap();
        let e = seg_energy(&bulk, &p, 0.3).unwrap();
        let expected = 0.7 * e1(0.2 / 0.7) + 2.0 * 0.4 * 0.3;
        assert!((e - expected).abs() < 1e-12);
    }

    #[test]
    fn symmetric_point_in_one_dimension() {
        let bulk = Bulk::with_default(1).unwrap();
        let p = SegPoint::new(0.25, 0.25, 1.0).unwrap();
        for nu in [0.3, 0.4, 0.45] {
            let a = seg_energy(&bulk, &p, nu).unwrap();
            let b = seg_energy(&bulk, &p, 1.0 - nu).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        assert!((seg_energy(&bulk, &p, 0.5).unwrap() - e1(0.5)).abs() < 1e-12);
        assert!((seg_energy(&bulk, &p, 0.5).unwrap() - 0.36338).abs() < 1e-5);
    }

    #[test]
    fn derivative_endpoints() {
        let bulk = Bulk::with_default(2).unwrap();
        let p = SegPoint::new(0.3, 0.2, 0.7).unwrap();
        let at_packed = seg_energy_derivative(&bulk, &p, 0.2).unwrap();
        let expected = bulk.xi(0.3 / 0.8).unwrap() - 4.0 * 0.7;
        assert!((at_packed - expected).abs() < 1e-12);
        let q = SegPoint::new(0.3, 0.2, 1.0).unwrap();
        assert!(seg_energy_derivative(&bulk, &q, q.uniform_nu()).unwrap().abs() < 1e-12);
        assert!(seg_energy_derivative(&bulk, &p, 0.7).unwrap() >= 0.0);
    }

    #[test]
    fn critical_hopping_values() {
        let b1 = Bulk::with_default(1).unwrap();
        let tc = critical_hopping(&b1, 0.25, 0.25).unwrap();
        assert!((tc - xi1(1.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((tc - 0.10900).abs() < 1e-5);
        assert!(critical_hopping(&b1, 1e-6, 0.25).unwrap() < 1e-12);

        let b2 = Bulk::with_default(2).unwrap();
        let tc = critical_hopping(&b2, 0.25, 0.5).unwrap();
        assert!((tc - 2.0 / (PI * PI)).abs() < 1e-9);
        assert!((tc - 0.20264).abs() < 1e-5);
    }

    #[test]
    fn three_regimes() {
        let bulk = Bulk::with_default(1).unwrap();
        let tc = critical_hopping(&bulk, 0.25, 0.25).unwrap();

        let low = minimize_nu(&bulk, &SegPoint::new(0.25, 0.25, 0.5 * tc).unwrap()).unwrap();
        assert_eq!(low.phase, Phase::HeavySaturated);
        assert_eq!(low.nu, 0.25);
        assert_eq!(low.heavy_density, 1.0);

        let at = minimize_nu(&bulk, &SegPoint::new(0.25, 0.25, 0.0).unwrap()).unwrap();
        assert_eq!(at.phase, Phase::HeavySaturated);

        let mid = minimize_nu(&bulk, &SegPoint::new(0.25, 0.25, 0.5).unwrap()).unwrap();
        assert_eq!(mid.phase, Phase::HeavyPartial);
        assert!(mid.nu > 0.25 && mid.nu < 0.5);
        assert!(mid.heavy_density > 0.5 && mid.heavy_density < 1.0);

        let top = minimize_nu(&bulk, &SegPoint::new(0.25, 0.25, 1.0).unwrap()).unwrap();
        assert_eq!(top.phase, Phase::HeavyUniformDensity);
        assert!((top.nu - 0.5).abs() < 1e-8);
    }

    #[test]
    fn classification_from_minimizer() {
        let bulk = Bulk::with_default(1).unwrap();
        for t in [0.0, 0.05, 0.2, 0.6, 1.0] {
            let p = SegPoint::new(0.3, 0.2, t).unwrap();
            let r = minimize_nu(&bulk, &p).unwrap();
            assert_eq!(classify(&p, r.nu), r.phase);
        }
    }

    #[test]
    fn phase_grid_and_csv() {
        let bulk = Bulk::with_default(1).unwrap();
        let grid = PhaseGrid { x_points: 5, t_points: 4, rho2: 0.3 };
        let rows = phase_diagram(&bulk, &grid).unwrap();
        assert_eq!(rows.len(), 20);
        let offsets = boundary_offsets(&bulk, &grid, &rows).unwrap();
        assert!(offsets.iter().all(|(_, o)| *o <= 1.0));
        let mut buf = Vec::new();
        write_phase_csv(&mut buf, 1, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(PHASE_CSV_HEADER));
        assert_eq!(text.lines().count(), 21);
        assert!(phase_diagram(&bulk, &PhaseGrid { x_points: 0, t_points: 2, rho2: 0.3 }).is_err());
    }

    #[test]
    fn critical_curve_reaches_corner() {
        let bulk = Bulk::with_default(2).unwrap();
        let tc = bulk.xi(1.0).unwrap() / 4.0;
        assert_eq!(tc, 1.0);
    }
}
