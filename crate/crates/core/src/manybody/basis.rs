//! Occupation words, combinadic ranking and two-species Fock sectors.

use serde::Serialize;

use crate::lattice::Domain;
use crate::{Error, Result};

/// Occupation words are `u64`, one bit per site.
pub const MAX_SITES: usize = 64;

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Colex rank of a word among words of the same popcount. Colex order
/// coincides with numeric order.
pub fn rank(word: u64) -> u64 {
    let mut r = 0;
    let mut w = word;
    let mut k = 0;
    while w != 0 {
        let pos = w.trailing_zeros() as usize;
        k += 1;
        r += binomial(pos, k);
        w &= w - 1;
    }
    r
}

/// Inverse of [`rank`] for words with `k` bits among `n` sites.
pub fn unrank(mut r: u64, n: usize, k: usize) -> u64 {
    let mut word = 0u64;
    let mut top = n;
    for i in (1..=k).rev() {
        let mut p = top - 1;
        while binomial(p, i) > r {
            p -= 1;
        }
        word |= 1 << p;
        r -= binomial(p, i);
        top = p;
    }
    word
}

/// All words with `k` bits among `n` sites, in increasing order.
pub fn words(n: usize, k: usize) -> Vec<u64> {
    assert!(n <= MAX_SITES && k <= n);
    let count = binomial(n, k) as usize;
    let mut out = Vec::with_capacity(count);
    if k == 0 {
        out.push(0);
        return out;
    }
    let limit: u128 = 1u128 << n;
    let mut w: u128 = (1u128 << k) - 1;
    while w < limit {
        out.push(w as u64);
        // Gosper's hack.
        let c = w & w.wrapping_neg();
        let r = w + c;
        w = (((r ^ w) >> 2) / c) | r;
    }
    out
}

/// A heavy-particle configuration `Λ2`, as an occupation word over the
/// canonical site order of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct HeavyConfig(pub u64);

impl HeavyConfig {
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut w = 0u64;
        for &i in indices {
            if i >= MAX_SITES || w & (1 << i) != 0 {
                return Err(Error::InvalidArgument(format!("bad or repeated site index {i}")));
            }
            w |= 1 << i;
        }
        Ok(HeavyConfig(w))
    }

    pub fn count(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(&self, i: usize) -> bool {
        i < MAX_SITES && self.0 & (1 << i) != 0
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..MAX_SITES).filter(|&i| self.contains(i)).collect()
    }

    /// `Λ2` as a domain (translated to the origin).
    pub fn to_domain(&self, dom: &Domain) -> Result<Domain> {
        Domain::new(dom.dim(), self.indices().into_iter().map(|i| dom.sites()[i]))
    }

    /// Sites as a string of `0`/`1`, site 0 first.
    pub fn pattern(&self, n: usize) -> String {
        (0..n).map(|i| if self.contains(i) { '1' } else { '0' }).collect()
    }
}

pub(crate) fn check_sites(dom: &Domain) -> Result<()> {
    if dom.len() > MAX_SITES {
        return Err(Error::ResourceLimit(format!(
            "{} sites exceed the {MAX_SITES}-site word size",
            dom.len()
        )));
    }
    Ok(())
}

/// Basis of `F(Λ; N1) ⊗ F(Λ; N2)`. State `(l, h)` has index `h * nl + l`
/// where `l`, `h` are the colex ranks of the light and heavy words.
#[derive(Clone, Debug)]
pub struct FockSector {
    domain: Domain,
    n_light: usize,
    n_heavy: usize,
    /// `order[i]` is the bit position used for canonical site `i`.
    order: Vec<usize>,
    bonds: Vec<(usize, usize)>,
    light: Vec<u64>,
    heavy: Vec<u64>,
}

impl FockSector {
    pub const DEFAULT_BUDGET: usize = 5_000_000;

    pub fn new(dom: &Domain, n_light: usize, n_heavy: usize) -> Result<Self> {
        Self::with_budget(dom, n_light, n_heavy, Self::DEFAULT_BUDGET)
    }

    pub fn with_budget(dom: &Domain, n_light: usize, n_heavy: usize, budget: usize) -> Result<Self> {
        let order: Vec<usize> = (0..dom.len()).collect();
        Self::build(dom, n_light, n_heavy, order, budget)
    }

    /// Same sector with bit positions permuted: canonical site `i` uses bit
    /// `order[i]`. Only the fermionic signs depend on this choice.
    pub fn with_site_order(dom: &Domain, n_light: usize, n_heavy: usize, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; dom.len()];
        if order.len() != dom.len() || order.iter().any(|&p| p >= dom.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("site order is not a permutation".into()));
        }
        Self::build(dom, n_light, n_heavy, order.to_vec(), Self::DEFAULT_BUDGET)
    }

    fn build(dom: &Domain, n_light: usize, n_heavy: usize, order: Vec<usize>, budget: usize) -> Result<Self> {
        check_sites(dom)?;
        let n = dom.len();
        if n_light > n || n_heavy > n {
            return Err(Error::InvalidArgument(format!(
                "particle numbers N1 = {n_light}, N2 = {n_heavy} exceed |Λ| = {n}"
            )));
        }
        let size = binomial(n, n_light).saturating_mul(binomial(n, n_heavy));
        if size > budget as u64 {
            return Err(Error::ResourceLimit(format!("sector dimension {size} exceeds budget {budget}")));
        }
        let bonds = dom
            .bonds()
            .into_iter()
            .map(|(a, b)| {
                let (p, q) = (order[a], order[b]);
                (p.min(q), p.max(q))
            })
            .collect();
        Ok(FockSector {
            domain: dom.clone(),
            n_light,
            n_heavy,
            order,
            bonds,
            light: words(n, n_light),
            heavy: words(n, n_heavy),
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn sites(&self) -> usize {
        self.domain.len()
    }

    pub fn n_light(&self) -> usize {
        self.n_light
    }

    pub fn n_heavy(&self) -> usize {
        self.n_heavy
    }

    pub fn size(&self) -> usize {
        self.light.len() * self.heavy.len()
    }

    pub fn light_words(&self) -> &[u64] {
        &self.light
    }

    pub fn heavy_words(&self) -> &[u64] {
        &self.heavy
    }

    /// Bonds in bit positions, `p < q`.
    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    pub fn index(&self, light: u64, heavy: u64) -> Option<usize> {
        if light.count_ones() as usize != self.n_light || heavy.count_ones() as usize != self.n_heavy {
            return None;
        }
        let (l, h) = (rank(light) as usize, rank(heavy) as usize);
        (l < self.light.len() && h < self.heavy.len()).then(|| h * self.light.len() + l)
    }

    pub fn state(&self, index: usize) -> (u64, u64) {
        let nl = self.light.len();
        (self.light[index % nl], self.heavy[index / nl])
    }

    /// Converts a word over bit positions to canonical site order.
    pub fn canonical(&self, word: u64) -> u64 {
        let mut out = 0;
        for (i, &p) in self.order.iter().enumerate() {
            if word & (1 << p) != 0 {
                out |= 1 << i;
            }
        }
        out
    }

    /// Converts a word in canonical site order to bit positions.
    pub fn positional(&self, word: u64) -> u64 {
        let mut out = 0;
        for (i, &p) in self.order.iter().enumerate() {
            if word & (1 << i) != 0 {
                out |= 1 << p;
            }
        }
        out
    }
}
