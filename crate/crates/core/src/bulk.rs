//! Bulk free-fermion quantities on `Z^d`.
//!
//! With the band `ε_k = 2d - 2 Σ cos k_i`, the occupied measure and energy
//! below a level `c` are
//!
//! ```text
//! F_d(c) = (2π)^{-d} ∫ 1[ε_k < c] dk,     G_d(c) = (2π)^{-d} ∫ ε_k 1[ε_k < c] dk.
//! ```
//!
//! The last momentum axis is integrated in closed form (`F_1`, `G_1` are
//! elementary). The remaining axes are integrated recursively with
//! Gauss-Legendre rules on segments split at every momentum where the inner
//! integrand loses smoothness, after a polynomial change of variables that
//! flattens the square-root behaviour at segment ends. In one dimension
//! everything is exact up to rounding.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `ε_k = 2d - 2 Σ cos k_i`.
pub fn band_energy(k: &[f64]) -> f64 {
    k.iter().map(|ki| 2.0 - 2.0 * ki.cos()).sum()
}

/// Gauss-Legendre rule on `[0, 1]` used per integration segment.
#[derive(Clone, Debug)]
pub struct Quadrature {
    points: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub const MIN_POINTS: usize = 16;

    pub fn new(points: usize) -> Result<Self> {
        if points < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs at least {} points per axis segment, got {points}",
                Self::MIN_POINTS
            )));
        }
        if points > 4096 {
            return Err(Error::ResourceLimit(format!("{points} quadrature points per segment")));
        }
        let (nodes, weights) = gauss_legendre_unit(points);
        Ok(Quadrature { points, nodes, weights })
    }

    pub fn default_points(dim: usize) -> usize {
        match dim {
            1 => 16,
            2 => 64,
            _ => 32,
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }
}

// Newton iteration on P_n from the Chebyshev initial guesses.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Bulk values at one density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkPoint {
    pub rho: f64,
    pub fermi: f64,
    pub energy: f64,
}

impl BulkPoint {
    /// `ξ(ρ) = ρ ε_F(ρ) - e(ρ)`.
    pub fn xi(&self) -> f64 {
        self.rho * self.fermi - self.energy
    }

    /// `b(ρ) = ρ - e(ρ)/2d`.
    pub fn upper_coeff(&self, dim: usize) -> f64 {
        self.rho - self.energy / (2.0 * dim as f64)
    }
}

/// Free fermions on `Z^d` with a fixed quadrature; values are memoized per
/// density.
#[derive(Debug)]
pub struct Bulk {
    dim: usize,
    quad: Quadrature,
    cache: Mutex<HashMap<u64, BulkPoint>>,
}

const MAX_BISECTION: usize = 400;

impl Bulk {
    pub fn new(dim: usize, quad: Quadrature) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not in 1..=3")));
        }
        Ok(Bulk { dim, quad, cache: Mutex::new(HashMap::new()) })
    }

    pub fn with_points(dim: usize, points: usize) -> Result<Self> {
        Bulk::new(dim, Quadrature::new(points)?)
    }

    pub fn with_default(dim: usize) -> Result<Self> {
        Bulk::with_points(dim, Quadrature::default_points(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    /// `(F_d(c), G_d(c))`: occupied measure and energy per site below `c`.
    pub fn occupied(&self, level: f64) -> (f64, f64) {
        self.occupied_rec(self.dim, level)
    }

    fn occupied_rec(&self, m: usize, c: f64) -> (f64, f64) {
        let full = 4.0 * m as f64;
        if c <= 0.0 {
            return (0.0, 0.0);
        }
        if c >= full {
            return (1.0, 2.0 * m as f64);
        }
        if m == 1 {
            let theta = (1.0 - 0.5 * c).clamp(-1.0, 1.0).acos();
            let excess = if theta < 1e-2 {
                let t2 = theta * theta;
                theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
            } else {
                theta - theta.sin()
            };
            return (theta / PI, 2.0 * excess / PI);
        }
        // F_{m-1} and G_{m-1} are smooth except where their level crosses a
        // multiple of 4.
        let mut cuts = [0.0; 5];
        let mut ncuts = 0;
        cuts[ncuts] = 0.0;
        ncuts += 1;
        for j in 0..m {
            let r = c - 4.0 * j as f64;
            if r > 0.0 && r < 4.0 {
                cuts[ncuts] = (1.0 - 0.5 * r).acos();
                ncuts += 1;
            }
        }
        cuts[ncuts] = PI;
        ncuts += 1;
        let cuts = &mut cuts[..ncuts];
        cuts.sort_by(f64::total_cmp);
        let (mut f_acc, mut g_acc) = (0.0, 0.0);
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = b - a;
            if len <= 0.0 {
                continue;
            }
            for (&u, &w) in self.quad.nodes.iter().zip(&self.quad.weights) {
                let s = u * u * (3.0 - 2.0 * u);
                let jac = w * 6.0 * u * (1.0 - u) * len;
                let k = a + len * s;
                let r = 2.0 - 2.0 * k.cos();
                let (f, g) = self.occupied_rec(m - 1, c - r);
                f_acc += jac * f;
                g_acc += jac * (g + r * f);
            }
        }
        (f_acc / PI, g_acc / PI)
    }

    fn check_rho(rho: f64) -> Result<f64> {
        if !rho.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&rho) {
            return Err(Error::InvalidArgument(format!("density {rho} not in [0, 1]")));
        }
        Ok(rho.clamp(0.0, 1.0))
    }

    /// Fermi level, bulk energy and density at `rho`.
    pub fn point(&self, rho: f64) -> Result<BulkPoint> {
        let rho = Self::check_rho(rho)?;
        let full = 4.0 * self.dim as f64;
        if rho == 0.0 {
            return Ok(BulkPoint { rho, fermi: 0.0, energy: 0.0 });
        }
        if rho == 1.0 {
            return Ok(BulkPoint { rho, fermi: full, energy: 2.0 * self.dim as f64 });
        }
        let key = rho.to_bits();
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(*p);
        }
        // Largest level whose occupied measure does not exceed rho.
        let (mut lo, mut hi) = (0.0, full);
        let mut iterations = 0;
        while hi - lo > full * 1e-15 {
            if iterations == MAX_BISECTION {
                return Err(Error::NoConvergence(format!("Fermi level at density {rho}")));
            }
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.occupied(mid).0 <= rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let fermi = lo;
        let (measure, energy) = self.occupied(fermi);
        // Correct for the residual measure mismatch at the bracket end.
        let energy = energy + (rho - measure) * fermi;
        let p = BulkPoint { rho, fermi, energy };
        self.cache.lock().unwrap().insert(key, p);
        Ok(p)
    }

    /// `ε_F(ρ)`.
    pub fn fermi_level(&self, rho: f64) -> Result<f64> {
        Ok(self.point(rho)?.fermi)
    }

    /// `e(ρ)`.
    pub fn energy(&self, rho: f64) -> Result<f64> {
        Ok(self.point(rho)?.energy)
    }

    /// `ξ(ρ)`.
    pub fn xi(&self, rho: f64) -> Result<f64> {
        Ok(self.point(rho)?.xi())
    }

    /// `b(ρ)`.
    pub fn upper_coeff(&self, rho: f64) -> Result<f64> {
        Ok(self.point(rho)?.upper_coeff(self.dim))
    }

    /// Compares a central difference of `ε_F` with the low-density slope bound.
    pub fn fermi_slope_check(&self, rho: f64) -> Result<FermiSlopeReport> {
        if !(rho > 0.0 && rho <= 0.2) {
            return Err(Error::InvalidArgument(format!("slope check needs 0 < ρ ≤ 0.2, got {rho}")));
        }
        let step = rho * 1e-4;
        let up = self.fermi_level(rho + step)?;
        let down = self.fermi_level(rho - step)?;
        let derivative = (up - down) / (2.0 * step);
        let bound = fermi_slope_bound(rho, self.dim);
        let noise = 4.0 * self.dim as f64 * 1e-14 / step;
        Ok(FermiSlopeReport {
            rho,
            dim: self.dim,
            step,
            derivative,
            bound,
            ratio: derivative / bound,
            holds: derivative <= bound,
            noisy: noise > 1e-6 * derivative.abs(),
        })
    }

    /// Low-density lower coefficient `(2/(3d)^3)(1-η) ξ(ρ)`, available when
    /// `6 ε_F(ρ / (1 - 4/(27 d²))) < η/2`.
    pub fn low_density_lower_coeff(&self, rho: f64, eta: f64) -> Result<LowDensityCoeff> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidArgument(format!("η = {eta} not in (0, 1)")));
        }
        let rho = Self::check_rho(rho)?;
        let d = self.dim as f64;
        let shifted = rho / (1.0 - 4.0 / (27.0 * d * d));
        let probe = if shifted >= 1.0 { f64::INFINITY } else { 6.0 * self.fermi_level(shifted)? };
        let admissible = rho > 0.0 && probe < 0.5 * eta;
        let coefficient =
            admissible.then(|| lower_prefactor(self.dim) * (1.0 - eta) * self.xi(rho).unwrap());
        Ok(LowDensityCoeff { rho, eta, probe, admissible, coefficient })
    }
}

/// `2 / (3d)^3`.
pub fn lower_prefactor(dim: usize) -> f64 {
    2.0 / (3.0 * dim as f64).powi(3)
}

/// `(8π/d) Γ(d/2 + 1)^{2/d} ρ^{-1+2/d}`.
pub fn fermi_slope_bound(rho: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let gamma = match dim {
        1 => PI.sqrt() / 2.0,
        2 => 1.0,
        3 => 0.75 * PI.sqrt(),
        _ => f64::NAN,
    };
    8.0 * PI / d * gamma.powf(2.0 / d) * rho.powf(-1.0 + 2.0 / d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FermiSlopeReport {
    pub rho: f64,
    pub dim: usize,
    pub step: f64,
    pub derivative: f64,
    pub bound: f64,
    pub ratio: f64,
    pub holds: bool,
    /// The step is small enough that rounding in `ε_F` may dominate.
    pub noisy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowDensityCoeff {
    pub rho: f64,
    pub eta: f64,
    /// `6 ε_F(ρ / (1 - 4/(27d²)))`, compared against `η/2`.
    pub probe: f64,
    pub admissible: bool,
    pub coefficient: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkRow {
    pub rho: f64,
    pub fermi: f64,
    pub e: f64,
    pub xi: f64,
    pub b: f64,
    /// `|e_M(ρ) - e_{2M}(ρ)|`.
    pub err_estimate: f64,
}

/// Tabulated bulk quantities for one dimension and quadrature resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkTable {
    pub dim: usize,
    pub points: usize,
    pub rows: Vec<BulkRow>,
}

pub const BULK_CSV_HEADER: &str = "d,rho,fermi,e,xi,b,err_estimate";

impl BulkTable {
    pub fn build(dim: usize, points: usize, rhos: &[f64]) -> Result<Self> {
        let fine = Bulk::with_points(dim, points)?;
        let doubled = Bulk::with_points(dim, 2 * points)?;
        let rows = rhos
            .par_iter()
            .map(|&rho| {
                let p = fine.point(rho)?;
                let p2 = doubled.point(rho)?;
                Ok(BulkRow {
                    rho: p.rho,
                    fermi: p.fermi,
                    e: p.energy,
                    xi: p.xi(),
                    b: p.upper_coeff(dim),
                    err_estimate: (p.energy - p2.energy).abs(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BulkTable { dim, points, rows })
    }

    /// `n` interior points `i/(n+1)` plus both endpoints.
    pub fn uniform_grid(n: usize) -> Vec<f64> {
        (0..=n + 1).map(|i| i as f64 / (n + 1) as f64).collect()
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{BULK_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.dim, r.rho, r.fermi, r.e, r.xi, r.b, r.err_estimate
            )?;
        }
        Ok(())
    }

    /// Parses CSV written by [`BulkTable::write_csv`]; `#` lines are metadata.
    pub fn parse_csv(text: &str, points: usize) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h == BULK_CSV_HEADER => {}
            Some((n, _)) => return Err(Error::parse(n, "unexpected header")),
            None => return Err(Error::parse(0, "empty table")),
        }
        let mut dim = None;
        let mut rows = Vec::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::parse(n, format!("expected 7 fields, got {}", fields.len())));
            }
            let d: usize = fields[0].parse().map_err(|_| Error::parse(n, "bad dimension"))?;
            if !(1..=3).contains(&d) || dim.is_some_and(|x| x != d) {
                return Err(Error::parse(n, format!("inconsistent dimension {d}")));
            }
            dim = Some(d);
            let mut v = [0.0; 6];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(n, format!("bad number `{f}`")))?;
            }
            rows.push(BulkRow { rho: v[0], fermi: v[1], e: v[2], xi: v[3], b: v[4], err_estimate: v[5] });
        }
        let dim = dim.ok_or_else(|| Error::parse(0, "table has no rows"))?;
        Ok(BulkTable { dim, points, rows })
    }

    /// Reads `<dir>/bulk_d{d}_M{M}.csv` when it holds exactly the requested
    /// grid, otherwise builds the table and writes it there.
    pub fn load_or_build(dir: &Path, dim: usize, points: usize, rhos: &[f64]) -> Result<Self> {
        let path = dir.join(format!("bulk_d{dim}_M{points}.csv"));
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(t) = BulkTable::parse_csv(&text, points) {
                let same_grid = t.dim == dim
                    && t.rows.len() == rhos.len()
                    && t.rows.iter().zip(rhos).all(|(r, &x)| r.rho == x);
                if same_grid {
                    return Ok(t);
                }
            }
        }
        let t = BulkTable::build(dim, points, rhos)?;
        let mut buf = Vec::new();
        t.write_csv(&mut buf).expect("writing to memory");
        let _ = fs::create_dir_all(dir).and_then(|_| fs::write(&path, buf));
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn band_energy_values() {
        assert_eq!(band_energy(&[0.0, 0.0]), 0.0);
        assert!(close(band_energy(&[PI, PI, PI]), 12.0, 1e-12));
        assert!(close(band_energy(&[PI / 2.0]), 2.0, 1e-12));
    }

    #[test]
    fn band_energy_quartic_window() {
        let samples = [[0.3, -1.2], [2.0, 0.1], [-3.0, 3.1], [0.0, 0.7]];
        for k in samples {
            let e = band_energy(&k);
            let k2: f64 = k.iter().map(|x| x * x).sum();
            assert!(e <= k2 + 1e-12 && e >= k2 - k2 * k2 / 12.0 - 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit(16);
        let sum: f64 = w.iter().sum();
        assert!(close(sum, 1.0, 1e-14));
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(31)).sum();
        assert!(close(m, 1.0 / 32.0, 1e-14));
    }

    #[test]
    fn quadrature_minimum() {
        assert!(Quadrature::new(8).is_err());
        assert!(Quadrature::new(16).is_ok());
    }

    #[test]
    fn endpoints_exact() {
        for d in 1..=3 {
            let b = Bulk::with_default(d).unwrap();
            let p1 = b.point(1.0).unwrap();
            assert_eq!(p1.fermi, 4.0 * d as f64);
            assert_eq!(p1.energy, 2.0 * d as f64);
            assert_eq!(p1.xi(), 2.0 * d as f64);
            assert_eq!(p1.upper_coeff(d), 0.0);
            assert_eq!(b.xi(0.0).unwrap(), 0.0);
            assert!(b.point(1.5).is_err());
        }
    }

    #[test]
    fn one_dimensional_half_filling() {
        let b = Bulk::with_default(1).unwrap();
        let p = b.point(0.5).unwrap();
        assert!(close(p.fermi, 2.0, 1e-12));
        assert!(close(p.energy, 1.0 - 2.0 / PI, 1e-12));
        assert!(close(p.xi(), 2.0 / PI, 1e-12));
        assert!(close(p.upper_coeff(1), 1.0 / PI, 1e-12));
    }

    #[test]
    fn two_dimensional_half_filling() {
        let b = Bulk::with_default(2).unwrap();
        let p = b.point(0.5).unwrap();
        assert!(close(p.fermi, 4.0, 1e-9));
        assert!(close(p.energy, 2.0 - 8.0 / (PI * PI), 1e-9));
    }

    #[test]
    fn upper_coeff_low_density_limit() {
        // ε_F ~ ρ^{2/d}, so three dimensions need a smaller density.
        for (d, rho) in [(1, 1e-3), (2, 1e-3), (3, 1e-4)] {
            let b = Bulk::with_default(d).unwrap();
            let r = b.upper_coeff(rho).unwrap() / rho;
            assert!((0.99..=1.0).contains(&r), "d={d} ratio {r}");
        }
    }

    #[test]
    fn slope_check_one_dimension() {
        let b = Bulk::with_default(1).unwrap();
        let r = b.fermi_slope_check(0.1).unwrap();
        assert!(close(r.derivative, 2.0 * PI * (0.1 * PI).sin(), 1e-7));
        assert!(close(r.bound, 2.0 * PI * PI * 0.1, 1e-12));
        assert!(r.holds && !r.noisy);
        assert!(b.fermi_slope_check(0.3).is_err());
    }

    #[test]
    fn low_density_coefficient_admissibility() {
        let b1 = Bulk::with_default(1).unwrap();
        let c = b1.low_density_lower_coeff(0.01, 0.5).unwrap();
        assert!(c.admissible);
        let shifted: f64 = 0.01 / (1.0 - 4.0 / 27.0);
        assert!(close(c.probe, 6.0 * (2.0 - 2.0 * (PI * shifted).cos()), 1e-12));
        let xi = b1.xi(0.01).unwrap();
        assert!(close(c.coefficient.unwrap(), 2.0 / 27.0 * 0.5 * xi, 1e-20));

        let near_one = b1.low_density_lower_coeff(1e-3, 0.999).unwrap();
        assert!(near_one.coefficient.unwrap() > 0.0);

        let b2 = Bulk::with_default(2).unwrap();
        let c = b2.low_density_lower_coeff(0.4, 0.1).unwrap();
        assert!(!c.admissible && c.coefficient.is_none());
        assert!(b2.low_density_lower_coeff(0.1, 1.0).is_err());
    }

    #[test]
    fn table_csv_round_trip_and_cache() {
        let t = BulkTable::build(1, 16, &BulkTable::uniform_grid(3)).unwrap();
        assert_eq!(t.rows.len(), 5);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(BulkTable::parse_csv(&text, 16).unwrap(), t);
        assert!(BulkTable::parse_csv("d,rho\n", 16).is_err());
        assert!(BulkTable::parse_csv(&format!("{BULK_CSV_HEADER}\n1,0.5,x,0,0,0,0\n"), 16).is_err());

        let dir = std::env::temp_dir().join(format!("seglab-bulk-{}", std::process::id()));
        let grid = BulkTable::uniform_grid(3);
        let a = BulkTable::load_or_build(&dir, 1, 16, &grid).unwrap();
        assert!(dir.join("bulk_d1_M16.csv").exists());
        let b = BulkTable::load_or_build(&dir, 1, 16, &grid).unwrap();
        assert_eq!(a, b);
        let _ = std::fs::remove_dir_all(&dir);
    }
}
