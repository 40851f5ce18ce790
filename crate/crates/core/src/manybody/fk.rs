//! Falicov-Kimball (`t = 0`) ground states: light fermions in the potential
//! `U χ_{Λ2}` of a frozen heavy configuration.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::basis::{binomial, check_sites, unrank, HeavyConfig};
use super::observables::heavy_bond_count;
use crate::lattice::Domain;
use crate::spectral::{build_matrix, eigen_symmetric, Convention};
use crate::{Error, Result};

/// Energies within this distance of the minimum are ties.
pub const TIE_TOL: f64 = 1e-9;

fn validate(dom: &Domain, n_light: usize, n_heavy: usize, u: f64) -> Result<()> {
    check_sites(dom)?;
    if n_light > dom.len() || n_heavy > dom.len() {
        return Err(Error::InvalidArgument(format!(
            "N1 = {n_light}, N2 = {n_heavy} exceed |Λ| = {}",
            dom.len()
        )));
    }
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::InvalidArgument(format!("U = {u} must be finite and nonnegative")));
    }
    Ok(())
}

fn energy_with(base: &DMatrix<f64>, config: HeavyConfig, n_light: usize, u: f64) -> Result<f64> {
    let mut m = base.clone();
    for i in config.indices() {
        m[(i, i)] += u;
    }
    eigen_symmetric(&m, false)?.sum_lowest(n_light)
}

/// Sum of the `N1` lowest eigenvalues of `t_Λ + U diag(χ_{Λ2})`.
pub fn fk_energy(dom: &Domain, config: HeavyConfig, n_light: usize, u: f64) -> Result<f64> {
    validate(dom, n_light, config.count(), u)?;
    if config.indices().iter().any(|&i| i >= dom.len()) {
        return Err(Error::InvalidArgument("heavy configuration has sites outside the domain".into()));
    }
    energy_with(&build_matrix(dom, Convention::Hopping).matrix, config, n_light, u)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnnealSchedule {
    pub seed: u64,
    /// Independent chains, seeded `seed + chain`. The result is the best
    /// over chains, so more chains never give a higher energy.
    pub chains: usize,
    pub steps: usize,
    pub temp_start: f64,
    pub temp_end: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule { seed: 0, chains: 8, steps: 2000, temp_start: 1.0, temp_end: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    Exhaustive { budget: usize },
    Anneal(AnnealSchedule),
}

impl Strategy {
    pub const DEFAULT_BUDGET: usize = 1_000_000;

    pub fn exhaustive() -> Self {
        Strategy::Exhaustive { budget: Self::DEFAULT_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FkConfig {
    pub word: u64,
    pub sites: Vec<Vec<i32>>,
    pub energy: f64,
    /// `B(Λ2)`.
    pub bond_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FkGround {
    pub n_light: usize,
    pub n_heavy: usize,
    pub u: f64,
    pub strategy: Strategy,
    /// Distinct configurations whose energy was computed.
    pub evaluated: usize,
    pub energy: f64,
    /// All minimizing configurations found, by increasing word.
    pub configs: Vec<FkConfig>,
}

impl FkGround {
    pub fn words(&self) -> Vec<u64> {
        self.configs.iter().map(|c| c.word).collect()
    }
}

fn describe(dom: &Domain, word: u64, energy: f64) -> FkConfig {
    let config = HeavyConfig(word);
    FkConfig {
        word,
        sites: config.indices().iter().map(|&i| dom.sites()[i].coords(dom.dim()).to_vec()).collect(),
        energy,
        bond_count: heavy_bond_count(dom, config),
    }
}

fn collect_minima(dom: &Domain, scored: &[(u64, f64)]) -> (f64, Vec<FkConfig>) {
    let min = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let mut best: Vec<(u64, f64)> = scored.iter().copied().filter(|s| s.1 <= min + TIE_TOL).collect();
    best.sort_by_key(|s| s.0);
    best.dedup_by_key(|s| s.0);
    (min, best.into_iter().map(|(w, e)| describe(dom, w, e)).collect())
}

pub fn fk_ground(dom: &Domain, n_light: usize, n_heavy: usize, u: f64, strategy: &Strategy) -> Result<FkGround> {
    validate(dom, n_light, n_heavy, u)?;
    let base = build_matrix(dom, Convention::Hopping).matrix;
    let n = dom.len();
    let scored: Vec<(u64, f64)> = match strategy {
        Strategy::Exhaustive { budget } => {
            let count = binomial(n, n_heavy);
            if count > *budget as u64 {
                return Err(Error::ResourceLimit(format!(
                    "{count} heavy configurations exceed the exhaustive budget {budget}; use the anneal strategy"
                )));
            }
            (0..count)
                .into_par_iter()
                .map(|r| {
                    let w = unrank(r, n, n_heavy);
                    energy_with(&base, HeavyConfig(w), n_light, u).map(|e| (w, e))
                })
                .collect::<Result<_>>()?
        }
        Strategy::Anneal(s) => {
            if s.chains == 0 || !(s.temp_start > 0.0 && s.temp_end > 0.0) {
                return Err(Error::InvalidArgument("anneal needs chains ≥ 1 and positive temperatures".into()));
            }
            let adjacency = dom.adjacency();
            let visited: Vec<HashMap<u64, f64>> = (0..s.chains)
                .into_par_iter()
                .map(|c| anneal_chain(&base, &adjacency, n_light, n_heavy, u, s, c as u64))
                .collect::<Result<_>>()?;
            let mut all: HashMap<u64, f64> = HashMap::new();
            for v in visited {
                all.extend(v);
            }
            all.into_iter().collect()
        }
    };
    let (energy, configs) = collect_minima(dom, &scored);
    Ok(FkGround { n_light, n_heavy, u, strategy: strategy.clone(), evaluated: scored.len(), energy, configs })
}

fn anneal_chain(
    base: &DMatrix<f64>,
    adjacency: &[Vec<usize>],
    n_light: usize,
    n_heavy: usize,
    u: f64,
    s: &AnnealSchedule,
    chain: u64,
) -> Result<HashMap<u64, f64>> {
    let n = adjacency.len();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(chain));
    let mut word = sample(&mut rng, n, n_heavy).into_iter().fold(0u64, |w, i| w | (1 << i));
    let mut seen: HashMap<u64, f64> = HashMap::new();
    let mut energy = energy_with(base, HeavyConfig(word), n_light, u)?;
    seen.insert(word, energy);
    if n_heavy == 0 || n_heavy == n {
        return Ok(seen);
    }
    let steps = s.steps.max(1);
    let ratio = s.temp_end / s.temp_start;
    for k in 0..steps {
        let temp = s.temp_start * ratio.powf(k as f64 / (steps.max(2) - 1) as f64);
        let occupied = HeavyConfig(word).indices();
        let from = occupied[rng.gen_range(0..occupied.len())];
        if adjacency[from].is_empty() {
            continue;
        }
        let to = adjacency[from][rng.gen_range(0..adjacency[from].len())];
        if word & (1 << to) != 0 {
            continue;
        }
        let candidate = word ^ (1 << from) ^ (1 << to);
        let e = match seen.get(&candidate) {
            Some(&e) => e,
            None => {
                let e = energy_with(base, HeavyConfig(candidate), n_light, u)?;
                seen.insert(candidate, e);
                e
            }
        };
        if e <= energy || rng.gen::<f64>() < ((energy - e) / temp).exp() {
            word = candidate;
            energy = e;
        }
    }
    Ok(seen)
}
