//! Heavy-configuration marginals, the correlation `σ_Λ(x)` and the
//! coefficient bound on `Σ a² B(Λ2)`.

use std::io;

use num_rational::Ratio;
use serde::Serialize;

use super::basis::HeavyConfig;
use super::operator::HubbardOperator;
use super::solver::{ground_state, ManyBodyGroundState, Method, SolverOptions};
use super::FockSector;
use crate::bulk::Bulk;
use crate::lattice::{Domain, Site};
use crate::{Error, Result};

/// Treatment of `y + x ∉ Λ` in the correlation sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// Heavy occupation extended by zero outside `Λ`.
    #[default]
    ZeroExtended,
    /// Terms with `y + x ∉ Λ` are dropped.
    Restricted,
}

/// Displacement vector from `dim` coordinates.
pub fn displacement(dim: usize, coords: &[i32]) -> Result<Site> {
    if coords.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "displacement has {} coordinates, expected {dim}",
            coords.len()
        )));
    }
    Site::new(coords)
}

/// All displacements with `|x|_∞ ≤ radius`, lexicographic.
pub fn displacements(dim: usize, radius: i32) -> Vec<Site> {
    let side = (2 * radius + 1) as usize;
    (0..side.pow(dim as u32))
        .map(|mut idx| {
            let mut c = [0i32; 3];
            for k in (0..dim).rev() {
                c[k] = (idx % side) as i32 - radius;
                idx /= side;
            }
            Site(c)
        })
        .collect()
}

/// `B(Λ2)`: bonds from `Λ2` to sites of `Z^d` outside `Λ2`.
pub fn heavy_bond_count(dom: &Domain, config: HeavyConfig) -> usize {
    let dim = dom.dim();
    config
        .indices()
        .into_iter()
        .map(|i| {
            dom.sites()[i]
                .neighbors(dim)
                .filter(|s| !dom.index_of(s).is_some_and(|j| config.contains(j)))
                .count()
        })
        .sum()
}

/// `(1/|Λ|) Σ_{y∈Λ} [n_y - n_{y+x}]²` for a classical configuration.
pub fn sigma_classical(dom: &Domain, config: HeavyConfig, x: &Site, mode: SigmaMode) -> f64 {
    if *x == Site::ORIGIN {
        return 0.0;
    }
    let mut count = 0usize;
    for (y, site) in dom.sites().iter().enumerate() {
        let here = config.contains(y);
        let there = match dom.index_of(&site.add(x)) {
            Some(j) => config.contains(j),
            None if mode == SigmaMode::Restricted => continue,
            None => false,
        };
        count += (here != there) as usize;
    }
    count as f64 / dom.len() as f64
}

/// `Σ_{y∈Λ} χ_{Λ2}(y) χ_{Λ2^c}(y + x)`.
pub fn mismatch_count(dom: &Domain, config: HeavyConfig, x: &Site, mode: SigmaMode) -> usize {
    config
        .indices()
        .into_iter()
        .filter(|&y| match dom.index_of(&dom.sites()[y].add(x)) {
            Some(j) => !config.contains(j),
            None => mode == SigmaMode::ZeroExtended,
        })
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Marginal {
    pub config: HeavyConfig,
    /// `a²_{Λ2}`.
    pub weight: f64,
}

/// `a²_{Λ2} = Σ_{Λ1} |a_{Λ1,Λ2}|²`, by increasing configuration word.
pub fn heavy_marginals(gs: &ManyBodyGroundState) -> Vec<Marginal> {
    let nl = gs.sector.light_words().len();
    let mut out: Vec<Marginal> = gs
        .sector
        .heavy_words()
        .iter()
        .zip(gs.vector.chunks(nl))
        .map(|(&w, block)| Marginal {
            config: HeavyConfig(gs.sector.canonical(w)),
            weight: block.iter().map(|c| c * c).sum(),
        })
        .collect();
    out.sort_by_key(|m| m.config);
    out
}

/// `(2/|Λ|) Σ_{Λ2} a² Σ_y χ_{Λ2}(y) χ_{Λ2^c}(y + x)`; zero at `x = 0`.
pub fn sigma_from_marginals(dom: &Domain, marginals: &[Marginal], x: &Site, mode: SigmaMode) -> f64 {
    if *x == Site::ORIGIN {
        return 0.0;
    }
    let total: f64 = marginals
        .iter()
        .filter(|m| m.weight > 0.0)
        .map(|m| m.weight * mismatch_count(dom, m.config, x, mode) as f64)
        .sum();
    2.0 * total / dom.len() as f64
}

pub fn sigma_expectation(gs: &ManyBodyGroundState, x: &Site, mode: SigmaMode) -> f64 {
    sigma_from_marginals(gs.sector.domain(), &heavy_marginals(gs), x, mode)
}

/// `Σ_{Λ2} a² B(Λ2)`.
pub fn boundary_weight(dom: &Domain, marginals: &[Marginal]) -> f64 {
    marginals.iter().map(|m| m.weight * heavy_bond_count(dom, m.config) as f64).sum()
}

/// Large-`U` proxy `8d²/U` for the constant `γ(U)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaProxy {
    pub u: f64,
    pub dim: usize,
    pub value: f64,
}

impl GammaProxy {
    pub fn new(u: f64, dim: usize) -> Result<Self> {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::InvalidArgument(format!("γ proxy needs U > 0, got {u}")));
        }
        Ok(GammaProxy { u, dim, value: 8.0 * (dim * dim) as f64 / u })
    }
}

pub const COEFFICIENT_CAUTION: &str = "diagnostic only: γ is the large-U proxy 8d²/U and an a-estimate above a(ρ) makes the bound smaller than the proven one";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientBoundReport {
    pub rho1: f64,
    pub rho2: f64,
    /// `ρ1 / (1 - ρ2)`.
    pub light_density: f64,
    pub gamma: GammaProxy,
    pub t: f64,
    pub a_estimate: f64,
    /// `b(ρ1/(1-ρ2))`.
    pub b: f64,
    /// `Σ a² B(Λ2)`.
    pub lhs: f64,
    /// `a_estimate > γ + t`.
    pub admissible: bool,
    /// `4d b ρ2^{1-1/d} |Λ|^{1-1/d} / (a - γ - t)`, when admissible.
    pub rhs: Option<f64>,
    pub within: Option<bool>,
    pub caution: &'static str,
}

pub fn coefficient_bound_report(gs: &ManyBodyGroundState, bulk: &Bulk, a_estimate: f64) -> Result<CoefficientBoundReport> {
    let dom = gs.sector.domain();
    if bulk.dim() != dom.dim() {
        return Err(Error::InvalidArgument("bulk table dimension differs from the lattice".into()));
    }
    let n = dom.len() as f64;
    let (rho1, rho2) = (gs.sector.n_light() as f64 / n, gs.sector.n_heavy() as f64 / n);
    if gs.sector.n_light() + gs.sector.n_heavy() >= dom.len() {
        return Err(Error::InvalidArgument(format!(
            "coefficient bound needs ρ1 + ρ2 < 1 (got {}); apply the particle-hole map to one or both species first",
            rho1 + rho2
        )));
    }
    if !a_estimate.is_finite() {
        return Err(Error::InvalidArgument("a-estimate must be finite".into()));
    }
    let d = dom.dim() as f64;
    let gamma = GammaProxy::new(gs.u, dom.dim())?;
    let light_density = rho1 / (1.0 - rho2);
    let b = bulk.upper_coeff(light_density)?;
    let lhs = boundary_weight(dom, &heavy_marginals(gs));
    let gap = a_estimate - gamma.value - gs.t;
    let admissible = gap > 0.0;
    let exponent = 1.0 - 1.0 / d;
    let rhs = admissible.then(|| 4.0 * d * b * rho2.powf(exponent) * n.powf(exponent) / gap);
    Ok(CoefficientBoundReport {
        rho1,
        rho2,
        light_density,
        gamma,
        t: gs.t,
        a_estimate,
        b,
        lhs,
        admissible,
        rhs,
        within: rhs.map(|r| lhs <= r),
        caution: COEFFICIENT_CAUTION,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalEntry {
    pub word: u64,
    pub sites: Vec<Vec<i32>>,
    pub weight: f64,
    pub bond_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaEntry {
    pub x: Vec<i32>,
    pub sigma: f64,
}

/// Serializable summary of a ground state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundStateReport {
    pub dim: usize,
    pub sites: usize,
    pub n_light: usize,
    pub n_heavy: usize,
    pub u: f64,
    pub t: f64,
    pub basis_size: usize,
    pub energy: f64,
    pub degeneracy: usize,
    pub residual: f64,
    pub method: Method,
    pub matvecs: usize,
    pub marginal_sum: f64,
    pub boundary_weight: f64,
    pub top_marginals: Vec<MarginalEntry>,
    pub sigma_mode: SigmaMode,
    pub sigma_profile: Vec<SigmaEntry>,
    pub coefficient_bound: Option<CoefficientBoundReport>,
}

pub const TOP_MARGINALS: usize = 20;
pub const PROFILE_RADIUS: i32 = 4;

pub fn report(
    gs: &ManyBodyGroundState,
    mode: SigmaMode,
    bound: Option<(&Bulk, f64)>,
) -> Result<GroundStateReport> {
    let dom = gs.sector.domain();
    let dim = dom.dim();
    let marginals = heavy_marginals(gs);
    let mut ranked = marginals.clone();
    ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.config.cmp(&b.config)));
    let top_marginals = ranked
        .iter()
        .take(TOP_MARGINALS)
        .map(|m| MarginalEntry {
            word: m.config.0,
            sites: m.config.indices().iter().map(|&i| dom.sites()[i].coords(dim).to_vec()).collect(),
            weight: m.weight,
            bond_count: heavy_bond_count(dom, m.config),
        })
        .collect();
    let sigma_profile = displacements(dim, PROFILE_RADIUS)
        .iter()
        .map(|x| SigmaEntry { x: x.coords(dim).to_vec(), sigma: sigma_from_marginals(dom, &marginals, x, mode) })
        .collect();
    let coefficient_bound = match bound {
        Some((bulk, a)) => Some(coefficient_bound_report(gs, bulk, a)?),
        None => None,
    };
    Ok(GroundStateReport {
        dim,
        sites: dom.len(),
        n_light: gs.sector.n_light(),
        n_heavy: gs.sector.n_heavy(),
        u: gs.u,
        t: gs.t,
        basis_size: gs.sector.size(),
        energy: gs.energy,
        degeneracy: gs.degeneracy,
        residual: gs.residual,
        method: gs.method,
        matvecs: gs.matvecs,
        marginal_sum: marginals.iter().map(|m| m.weight).sum(),
        boundary_weight: boundary_weight(dom, &marginals),
        top_marginals,
        sigma_mode: mode,
        sigma_profile,
        coefficient_bound,
    })
}

/// Ground state of the chain sector closest to `(ρ1, ρ2)`.
pub fn chain_ground_state(len: usize, n_light: usize, n_heavy: usize, u: f64, t: f64, opts: &SolverOptions) -> Result<ManyBodyGroundState> {
    let dom = Domain::segment(len)?;
    let op = HubbardOperator::new(FockSector::new(&dom, n_light, n_heavy)?, u, t)?;
    ground_state(&op, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub len: usize,
    pub n_light: usize,
    pub n_heavy: usize,
    pub u: f64,
    pub t: f64,
    pub x: i32,
    pub sigma: f64,
    pub sum_a2b: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln σ` against `ln L`.
    pub exponent: Option<f64>,
}

/// `σ(x)` on chains of the given lengths at fixed densities.
pub fn sigma_scaling(
    lengths: &[usize],
    rho1: Ratio<usize>,
    rho2: Ratio<usize>,
    u: f64,
    t: f64,
    x: i32,
    opts: &SolverOptions,
) -> Result<ScalingTable> {
    if lengths.is_empty() {
        return Err(Error::InvalidArgument("no chain lengths given".into()));
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let count = |rho: Ratio<usize>| {
            let n = rho * Ratio::from_integer(len);
            if n.is_integer() {
                Ok(n.to_integer())
            } else {
                Err(Error::InvalidArgument(format!("density {rho} is not realizable on {len} sites")))
            }
        };
        let (n1, n2) = (count(rho1)?, count(rho2)?);
        let gs = chain_ground_state(len, n1, n2, u, t, opts)?;
        let dom = gs.sector.domain();
        let marginals = heavy_marginals(&gs);
        let shift = displacement(1, &[x])?;
        rows.push(ScalingRow {
            len,
            n_light: n1,
            n_heavy: n2,
            u,
            t,
            x,
            sigma: sigma_from_marginals(dom, &marginals, &shift, SigmaMode::ZeroExtended),
            sum_a2b: boundary_weight(dom, &marginals),
            energy: gs.energy,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sigma > 0.0)
        .map(|r| ((r.len as f64).ln(), r.sigma.ln()))
        .collect();
    let exponent = (points.len() >= 2).then(|| {
        let k = points.len() as f64;
        let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / k, b + p.1 / k));
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ScalingTable { rows, exponent })
}

pub const SCALING_CSV_HEADER: &str = "L,N1,N2,U,t,x,sigma,sum_a2B";

pub fn write_scaling_csv<W: io::Write>(mut w: W, table: &ScalingTable) -> io::Result<()> {
    writeln!(w, "{SCALING_CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(w, "{},{},{},{},{},{},{},{}", r.len, r.n_light, r.n_heavy, r.u, r.t, r.x, r.sigma, r.sum_a2b)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::fk::{fk_energy, fk_ground, Strategy};

    fn x1() -> Site {
        displacement(1, &[1]).unwrap()
    }

    #[test]
    fn classical_sigma_examples() {
        let dom = Domain::segment(8).unwrap();
        let block = HeavyConfig::from_indices(&[0, 1, 2, 3]).unwrap();
        let alt = HeavyConfig::from_indices(&[0, 2, 4, 6]).unwrap();
        assert_eq!(sigma_classical(&dom, block, &x1(), SigmaMode::ZeroExtended), 0.125);
        assert_eq!(sigma_classical(&dom, alt, &x1(), SigmaMode::ZeroExtended), 0.875);
        assert_eq!(sigma_classical(&dom, alt, &Site::ORIGIN, SigmaMode::ZeroExtended), 0.0);
        assert_eq!(sigma_classical(&dom, alt, &x1(), SigmaMode::Restricted), 0.875);
        let right = HeavyConfig::from_indices(&[4, 5, 6, 7]).unwrap();
        assert_eq!(sigma_classical(&dom, right, &x1(), SigmaMode::ZeroExtended), 0.25);
        assert_eq!(sigma_classical(&dom, right, &x1(), SigmaMode::Restricted), 0.125);
    }

    #[test]
    fn bond_counts() {
        let dom = Domain::boxed(&[3, 3]).unwrap();
        assert_eq!(heavy_bond_count(&dom, HeavyConfig(0)), 0);
        assert_eq!(heavy_bond_count(&dom, HeavyConfig(1)), 4);
        let square = HeavyConfig::from_indices(&[0, 1, 3, 4]).unwrap();
        assert_eq!(heavy_bond_count(&dom, square), 8);
        let chain = Domain::segment(10).unwrap();
        let block = HeavyConfig::from_indices(&[2, 3, 4]).unwrap();
        assert_eq!(heavy_bond_count(&chain, block), 2);
    }

    #[test]
    fn mismatch_bounded_by_boundary() {
        use crate::manybody::basis::words;
        let dom = Domain::boxed(&[3, 3]).unwrap();
        for k in 0..=9 {
            for w in words(9, k) {
                let c = HeavyConfig(w);
                let b = heavy_bond_count(&dom, c);
                for x in displacements(2, 3) {
                    assert!(mismatch_count(&dom, c, &x, SigmaMode::ZeroExtended) as i64 <= b as i64 * x.linf_norm());
                }
            }
        }
    }

    #[test]
    fn single_config_state() {
        // At t = 0 with a unique FK minimizer, all weight sits on it.
        let dom = Domain::segment(8).unwrap();
        let fk = fk_ground(&dom, 2, 3, 50.0, &Strategy::exhaustive()).unwrap();
        let opts = SolverOptions::default();
        let gs = chain_ground_state(8, 2, 3, 50.0, 0.0, &opts).unwrap();
        assert!((gs.energy - fk.energy).abs() < 1e-8);
        let m = heavy_marginals(&gs);
        assert!((m.iter().map(|m| m.weight).sum::<f64>() - 1.0).abs() < 1e-10);
        if fk.configs.len() == 1 && gs.degeneracy == 1 {
            let c = HeavyConfig(fk.configs[0].word);
            let top = m.iter().max_by(|a, b| a.weight.total_cmp(&b.weight)).unwrap();
            assert_eq!(top.config, c);
            assert!((top.weight - 1.0).abs() < 1e-10);
            let x = x1();
            let sigma = sigma_expectation(&gs, &x, SigmaMode::ZeroExtended);
            assert!((sigma - 2.0 * mismatch_count(&dom, c, &x, SigmaMode::ZeroExtended) as f64 / 8.0).abs() < 1e-10);
            assert!((boundary_weight(&dom, &m) - heavy_bond_count(&dom, c) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn two_sided_sum_identity() {
        // Over all of Z^d the two terms of [n_y - n_{y+x}]² agree, which ties
        // the zero-extended sums to the classical σ.
        let dom = Domain::segment(8).unwrap();
        for w in crate::manybody::basis::words(8, 3) {
            let c = HeavyConfig(w);
            for x in displacements(1, 3) {
                if x == Site::ORIGIN {
                    continue;
                }
                let entering = c
                    .indices()
                    .into_iter()
                    .filter(|&z| dom.index_of(&dom.sites()[z].sub(&x)).is_none())
                    .count();
                let lhs = 2 * mismatch_count(&dom, c, &x, SigmaMode::ZeroExtended);
                let rhs = sigma_classical(&dom, c, &x, SigmaMode::ZeroExtended) * 8.0 + entering as f64;
                assert!((lhs as f64 - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_chessboards_carry_all_weight() {
        let gs = chain_ground_state(6, 3, 3, 10.0, 0.0, &SolverOptions::default()).unwrap();
        assert_eq!(gs.degeneracy, 2);
        let m = heavy_marginals(&gs);
        let on_boards: f64 = m
            .iter()
            .filter(|m| m.config.0 == 0b010101 || m.config.0 == 0b101010)
            .map(|m| m.weight)
            .sum();
        assert!((on_boards - 1.0).abs() < 1e-10);
        let dom = Domain::segment(6).unwrap();
        let e = fk_energy(&dom, HeavyConfig(0b010101), 3, 10.0).unwrap();
        assert!((gs.energy - e).abs() < 1e-10);
    }

    #[test]
    fn coefficient_report_modes() {
        let bulk = Bulk::with_default(1).unwrap();
        let gs = chain_ground_state(8, 2, 3, 1.0, 0.5, &SolverOptions::default()).unwrap();
        let r = coefficient_bound_report(&gs, &bulk, 0.2).unwrap();
        assert!(!r.admissible && r.rhs.is_none());
        let gs = chain_ground_state(8, 2, 2, 400.0, 0.0, &SolverOptions::default()).unwrap();
        let r = coefficient_bound_report(&gs, &bulk, 0.5).unwrap();
        assert!(r.admissible);
        assert!(r.rhs.unwrap() > 0.0);
        let half = chain_ground_state(6, 3, 3, 10.0, 0.0, &SolverOptions::default()).unwrap();
        assert!(coefficient_bound_report(&half, &bulk, 0.5).is_err());
    }

    #[test]
    fn report_shape() {
        let bulk = Bulk::with_default(1).unwrap();
        let gs = chain_ground_state(6, 2, 2, 8.0, 0.2, &SolverOptions::default()).unwrap();
        let r = report(&gs, SigmaMode::ZeroExtended, Some((&bulk, 0.5))).unwrap();
        assert_eq!(r.sigma_profile.len(), 9);
        assert_eq!(r.top_marginals.len(), 15);
        assert!((r.marginal_sum - 1.0).abs() < 1e-10);
        assert_eq!(r.sigma_profile[4].sigma, 0.0);
        assert!(r.top_marginals.windows(2).all(|w| w[0].weight >= w[1].weight));
    }

    #[test]
    fn scaling_rejects_unrealizable_density() {
        let opts = SolverOptions::default();
        let r = sigma_scaling(&[7], Ratio::new(1, 3), Ratio::new(1, 3), 10.0, 0.1, 1, &opts);
        assert!(r.is_err());
        let t = sigma_scaling(&[6, 9], Ratio::new(1, 3), Ratio::new(1, 3), 64.0, 0.05, 1, &opts).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.exponent.is_some());
        let mut buf = Vec::new();
        write_scaling_csv(&mut buf, &t).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(SCALING_CSV_HEADER));
    }
}
