//! Finite domains of the hypercubic lattice `Z^d`, `d ∈ {1, 2, 3}`.
//!
//! A [`Domain`] is stored in canonical form: its minimal corner is translated
//! to the origin and its sites are sorted lexicographically. Every quantity
//! computed here is translation invariant, so two domains are the same
//! object exactly when their canonical forms agree.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::io;

use rand::Rng;

use crate::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Coordinates accepted from text input are bounded so that translations
/// and neighbor steps never overflow `i32`.
pub const COORD_LIMIT: i32 = 1 << 30;

/// A lattice site. Coordinates beyond the ambient dimension are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn new(coords: &[i32]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "site must have 1..={MAX_DIM} coordinates, got {}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site(c))
    }

    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }

    pub fn offset(&self, axis: usize, step: i32) -> Site {
        let mut c = self.0;
        c[axis] += step;
        Site(c)
    }

    pub fn add(&self, other: &Site) -> Site {
        Site([self.0[0] + other.0[0], self.0[1] + other.0[1], self.0[2] + other.0[2]])
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site([self.0[0] - other.0[0], self.0[1] - other.0[1], self.0[2] - other.0[2]])
    }

    /// The `2d` nearest neighbors, in the order `-e_1, +e_1, -e_2, ...`.
    pub fn neighbors(&self, dim: usize) -> impl Iterator<Item = Site> + '_ {
        (0..dim).flat_map(move |axis| [self.offset(axis, -1), self.offset(axis, 1)])
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).sum()
    }

    pub fn linf_norm(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).max().unwrap_or(0)
    }
}

/// Inner boundary and exterior bond count of a domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryData {
    pub bond_count: usize,
    pub inner_boundary: Vec<Site>,
}

/// A nonempty finite subset of `Z^d` in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    dim: usize,
    sites: Vec<Site>,
}

impl Domain {
    /// Builds a domain from arbitrary sites; the result is canonical.
    pub fn new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        check_dim(dim)?;
        let mut sites: Vec<Site> = sites.into_iter().collect();
        if sites.is_empty() {
            return Err(Error::InvalidDomain("domain must be nonempty".into()));
        }
        for s in &sites {
            if s.0[dim..].iter().any(|&c| c != 0) {
                return Err(Error::InvalidDomain(format!(
                    "site {:?} has coordinates beyond dimension {dim}",
                    s.0
                )));
            }
        }
        sites.sort_unstable();
        let before = sites.len();
        sites.dedup();
        if sites.len() != before {
            return Err(Error::InvalidDomain("duplicate sites".into()));
        }
        let mut corner = sites[0];
        for s in &sites {
            for a in 0..dim {
                corner.0[a] = corner.0[a].min(s.0[a]);
            }
        }
        if corner != Site::ORIGIN {
            for s in sites.iter_mut() {
                *s = s.sub(&corner);
            }
            // Translation preserves lexicographic order.
        }
        Ok(Domain { dim, sites })
    }

    pub fn from_coords(dim: usize, coords: &[&[i32]]) -> Result<Self> {
        let sites = coords.iter().map(|c| {
            if c.len() != dim {
                return Err(Error::InvalidDomain(format!(
                    "site {c:?} does not have {dim} coordinates"
                )));
            }
            Site::new(c)
        });
        Domain::new(dim, sites.collect::<Result<Vec<_>>>()?)
    }

    /// The segment `{0, ..., len-1}` of `Z`.
    pub fn segment(len: usize) -> Result<Self> {
        Domain::boxed(&[len])
    }

    /// A rectangular box with the given side lengths.
    pub fn boxed(sides: &[usize]) -> Result<Self> {
        let dim = sides.len();
        check_dim(dim)?;
        if sides.contains(&0) {
            return Err(Error::InvalidDomain("box sides must be positive".into()));
        }
        let mut sites = Vec::new();
        let mut sides3 = [1usize; MAX_DIM];
        sides3[..dim].copy_from_slice(sides);
        for x in 0..sides3[0] {
            for y in 0..sides3[1] {
                for z in 0..sides3[2] {
                    sites.push(Site([x as i32, y as i32, z as i32]));
                }
            }
        }
        Domain::new(dim, sites)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.index_of(site).is_some()
    }

    /// Position of `site` in the canonical order.
    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    /// Number of nearest neighbors of each site lying outside the domain.
    pub fn exterior_counts(&self) -> Vec<usize> {
        self.sites
            .iter()
            .map(|s| s.neighbors(self.dim).filter(|n| !self.contains(n)).count())
            .collect()
    }

    /// Interior bonds `(i, j)` with `i < j` in canonical site order.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds = Vec::new();
        for (i, s) in self.sites.iter().enumerate() {
            for axis in 0..self.dim {
                if let Some(j) = self.index_of(&s.offset(axis, 1)) {
                    bonds.push((i, j));
                }
            }
        }
        bonds.sort_unstable();
        bonds
    }

    /// Neighbor lists in canonical index space.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.sites
            .iter()
            .map(|s| s.neighbors(self.dim).filter_map(|n| self.index_of(&n)).collect())
            .collect()
    }

    pub fn boundary(&self) -> BoundaryData {
        let counts = self.exterior_counts();
        BoundaryData {
            bond_count: counts.iter().sum(),
            inner_boundary: self
                .sites
                .iter()
                .zip(&counts)
                .filter(|(_, &c)| c > 0)
                .map(|(s, _)| *s)
                .collect(),
        }
    }

    /// Largest coordinate along each axis (the smallest is always zero).
    pub fn extent(&self) -> [i32; MAX_DIM] {
        let mut max = [0; MAX_DIM];
        for s in &self.sites {
            for a in 0..self.dim {
                max[a] = max[a].max(s.0[a]);
            }
        }
        max
    }

    /// Whether the nearest-neighbor graph on the domain is connected.
    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.len()
    }

    /// Ordering used for deterministic tie breaking: by size, then sites.
    pub fn order_key(&self) -> (usize, &[Site]) {
        (self.len(), &self.sites)
    }

    /// Serializes to the text format: `d=<dim>` then one site per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("d={}\n", self.dim);
        for s in &self.sites {
            let coords: Vec<String> = s.coords(self.dim).iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{}", coords.join(","));
        }
        out
    }

    /// Parses the text format written by [`Domain::to_text`]. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut sites = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(d) = dim else {
                let value = line
                    .strip_prefix("d=")
                    .ok_or_else(|| Error::parse(lineno, "expected header `d=<dim>`"))?;
                let d: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad dimension `{value}`")))?;
                if !(1..=MAX_DIM).contains(&d) {
                    return Err(Error::parse(lineno, format!("dimension {d} not in 1..=3")));
                }
                dim = Some(d);
                continue;
            };
            let mut coords = [0i32; MAX_DIM];
            let mut count = 0;
            for field in line.split(',') {
                if count == d {
                    return Err(Error::parse(lineno, format!("more than {d} coordinates")));
                }
                let v: i32 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad coordinate `{field}`")))?;
                if v.abs() > COORD_LIMIT {
                    return Err(Error::parse(lineno, format!("coordinate {v} out of range")));
                }
                coords[count] = v;
                count += 1;
            }
            if count != d {
                return Err(Error::parse(lineno, format!("expected {d} coordinates, got {count}")));
            }
            sites.push(Site(coords));
        }
        let dim = dim.ok_or_else(|| Error::parse(0, "missing header `d=<dim>`"))?;
        Domain::new(dim, sites)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .sites
            .iter()
            .map(|s| {
                let c: Vec<String> = s.coords(self.dim).iter().map(|c| c.to_string()).collect();
                format!("({})", c.join(","))
            })
            .collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

/// Domains serialize as their text form.
impl serde::Serialize for Domain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dimension {dim} not in 1..=3")))
    }
}

/// `B(Λ)`: number of bonds joining the domain to its complement.
pub fn boundary_bond_count(dom: &Domain) -> usize {
    dom.exterior_counts().iter().sum()
}

/// `∂Λ`: sites of the domain with at least one exterior neighbor.
pub fn inner_boundary(dom: &Domain) -> Vec<Site> {
    dom.boundary().inner_boundary
}

/// Adds `m` isolated sites on the first axis beyond the bounding box, two
/// lattice units apart from the domain and from each other.
pub fn add_isolated_sites(dom: &Domain, m: usize) -> Domain {
    let start = dom.extent()[0] + 2;
    let extra = (0..m).map(|i| Site([start + 2 * i as i32, 0, 0]));
    Domain::new(dom.dim(), dom.sites().iter().copied().chain(extra))
        .expect("isolated sites are distinct from the domain")
}

/// A box-like domain of `n` sites: a full cube of side `⌊n^{1/d}⌋` followed
/// by face layers filled in lexicographic order.
pub fn quasi_cube(dim: usize, n: usize) -> Result<Domain> {
    check_dim(dim)?;
    if n == 0 {
        return Err(Error::InvalidArgument("quasi-cube needs n >= 1".into()));
    }
    let mut side = (n as f64).powf(1.0 / dim as f64).floor() as usize;
    while (side + 1).pow(dim as u32) <= n {
        side += 1;
    }
    while side.pow(dim as u32) > n {
        side -= 1;
    }
    let mut sides = [1usize; MAX_DIM];
    sides[..dim].iter_mut().for_each(|s| *s = side);
    let mut sites: Vec<Site> = Domain::boxed(&sides[..dim])?.sites().to_vec();
    // Grow one axis at a time; each face layer spans the current extent.
    let mut axis = 0;
    while sites.len() < n {
        let layer: Vec<Site> = {
            let mut layer = Vec::new();
            let mut ranges = [0..1, 0..1, 0..1];
            for (a, r) in ranges.iter_mut().enumerate().take(dim) {
                *r = if a == axis { sides[a]..sides[a] + 1 } else { 0..sides[a] };
            }
            for x in ranges[0].clone() {
                for y in ranges[1].clone() {
                    for z in ranges[2].clone() {
                        layer.push(Site([x as i32, y as i32, z as i32]));
                    }
                }
            }
            layer
        };
        let take = (n - sites.len()).min(layer.len());
        sites.extend_from_slice(&layer[..take]);
        sides[axis] += 1;
        axis = (axis + 1) % dim;
    }
    Domain::new(dim, sites)
}

/// Which domains an enumeration visits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    pub dim: usize,
    pub max_size: usize,
    /// Only edge-connected domains (fixed polyominoes and their analogues).
    pub connected: bool,
    /// Side of the bounding box for the disconnected family.
    pub box_side: usize,
    /// Maximum number of domains (or raw subsets) visited.
    pub budget: usize,
}

impl Enumeration {
    pub const DEFAULT_BUDGET: usize = 2_000_000;

    pub fn connected(dim: usize, max_size: usize) -> Self {
        Enumeration { dim, max_size, connected: true, box_side: 0, budget: Self::DEFAULT_BUDGET }
    }

    pub fn in_box(dim: usize, max_size: usize, box_side: usize) -> Self {
        Enumeration { dim, max_size, connected: false, box_side, budget: Self::DEFAULT_BUDGET }
    }

    /// All domains of size `1..=max_size` in the family, each once up to
    /// translation, sorted by size and then lexicographically.
    pub fn run(&self) -> Result<Vec<Domain>> {
        check_dim(self.dim)?;
        if self.max_size == 0 {
            return Err(Error::InvalidArgument("max_size must be >= 1".into()));
        }
        let mut out = if self.connected {
            let mut g = Redelmeier {
                dim: self.dim,
                max_size: self.max_size,
                budget: self.budget,
                seen: HashSet::new(),
                poly: Vec::new(),
                out: Vec::new(),
            };
            g.run()?;
            g.out
        } else {
            enumerate_box_subsets(self.dim, self.max_size, self.box_side, self.budget)?
        };
        out.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        Ok(out)
    }
}

/// Shorthand for [`Enumeration::run`]; the disconnected family uses a box of
/// side `n_max`.
pub fn enumerate_domains(dim: usize, n_max: usize, connected: bool) -> Result<Vec<Domain>> {
    if connected {
        Enumeration::connected(dim, n_max).run()
    } else {
        Enumeration::in_box(dim, n_max, n_max).run()
    }
}

// Redelmeier's method: every connected set is grown exactly once from its
// lexicographically smallest cell, which sits at the origin.
struct Redelmeier {
    dim: usize,
    max_size: usize,
    budget: usize,
    seen: HashSet<Site>,
    poly: Vec<Site>,
    out: Vec<Domain>,
}

impl Redelmeier {
    fn allowed(&self, s: &Site) -> bool {
        s.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
    }

    fn run(&mut self) -> Result<()> {
        self.seen.insert(Site::ORIGIN);
        let mut untried = vec![Site::ORIGIN];
        self.grow(&mut untried)
    }

    fn grow(&mut self, untried: &mut Vec<Site>) -> Result<()> {
        while let Some(cell) = untried.pop() {
            self.poly.push(cell);
            if self.out.len() >= self.budget {
                return Err(Error::ResourceLimit(format!(
                    "domain enumeration exceeded budget of {}",
                    self.budget
                )));
            }
            self.out.push(Domain::new(self.dim, self.poly.iter().copied())?);
            if self.poly.len() < self.max_size {
                let fresh: Vec<Site> = cell
                    .neighbors(self.dim)
                    .filter(|n| self.allowed(n) && !self.seen.contains(n))
                    .collect();
                for n in &fresh {
                    self.seen.insert(*n);
                }
                let mut next = untried.clone();
                next.extend_from_slice(&fresh);
                self.grow(&mut next)?;
                for n in &fresh {
                    self.seen.remove(n);
                }
            }
            self.poly.pop();
        }
        Ok(())
    }
}

fn enumerate_box_subsets(
    dim: usize,
    max_size: usize,
    side: usize,
    budget: usize,
) -> Result<Vec<Domain>> {
    if side == 0 {
        return Err(Error::InvalidArgument("box_side must be >= 1".into()));
    }
    let cells = Domain::boxed(&vec![side; dim])?.sites().to_vec();
    let mut found = BTreeSet::new();
    let mut chosen = Vec::new();
    let mut visited = 0usize;
    fn rec(
        cells: &[Site],
        start: usize,
        chosen: &mut Vec<Site>,
        max_size: usize,
        dim: usize,
        budget: usize,
        visited: &mut usize,
        found: &mut BTreeSet<(usize, Vec<Site>)>,
    ) -> Result<()> {
        for i in start..cells.len() {
            chosen.push(cells[i]);
            *visited += 1;
            if *visited > budget {
                return Err(Error::ResourceLimit(format!(
                    "subset enumeration exceeded budget of {budget}"
                )));
            }
            let d = Domain::new(dim, chosen.iter().copied())?;
            found.insert((d.len(), d.sites));
            if chosen.len() < max_size {
                rec(cells, i + 1, chosen, max_size, dim, budget, visited, found)?;
            }
            chosen.pop();
        }
        Ok(())
    }
    rec(&cells, 0, &mut chosen, max_size, dim, budget, &mut visited, &mut found)?;
    Ok(found.into_iter().map(|(_, sites)| Domain { dim, sites }).collect())
}

/// A uniformly random `size`-subset of the box `[0, side)^d`.
pub fn random_box_subset<R: Rng + ?Sized>(
    dim: usize,
    side: usize,
    size: usize,
    rng: &mut R,
) -> Result<Domain> {
    let cells = Domain::boxed(&vec![side; dim])?.sites().to_vec();
    if size == 0 || size > cells.len() {
        return Err(Error::InvalidArgument(format!(
            "subset size {size} not in 1..={}",
            cells.len()
        )));
    }
    let picked = rand::seq::index::sample(rng, cells.len(), size);
    Domain::new(dim, picked.into_iter().map(|i| cells[i]))
}

/// Writes `(id, size, B, |∂Λ|)` rows, ids being positions in `domains`.
pub fn write_summary_csv<W: io::Write>(mut w: W, domains: &[Domain]) -> io::Result<()> {
    writeln!(w, "id,size,B,inner_boundary")?;
    for (id, d) in domains.iter().enumerate() {
        let b = d.boundary();
        writeln!(w, "{id},{},{},{}", d.len(), b.bond_count, b.inner_boundary.len())?;
    }
    Ok(())
}
