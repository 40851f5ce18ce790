//! Matrix-free two-species Hubbard operator
//! `H = -Σ c†_{x1}c_{y1} - t Σ c†_{x2}c_{y2} + U Σ n_{x1}n_{x2}`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::basis::{rank, FockSector};
use crate::{Error, Result};

/// Largest sector converted to a dense matrix.
pub const DENSE_LIMIT: usize = 4096;

/// Hops out of each word, in compressed-row form.
#[derive(Clone, Debug)]
struct HopTable {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    signs: Vec<f64>,
}

impl HopTable {
    fn new(words: &[u64], bonds: &[(usize, usize)]) -> Self {
        let mut offsets = Vec::with_capacity(words.len() + 1);
        let mut targets = Vec::new();
        let mut signs = Vec::new();
        offsets.push(0);
        for &w in words {
            for &(p, q) in bonds {
                let (bp, bq) = ((w >> p) & 1, (w >> q) & 1);
                if bp == bq {
                    continue;
                }
                let moved = w ^ (1 << p) ^ (1 << q);
                let between = ((1u64 << q) - 1) & !((1u64 << (p + 1)) - 1);
                let sign = if (w & between).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                targets.push(rank(moved) as u32);
                signs.push(sign);
            }
            offsets.push(targets.len());
        }
        HopTable { offsets, targets, signs }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().map(|&t| t as usize).zip(self.signs[r].iter().copied())
    }
}

#[derive(Clone, Debug)]
pub struct HubbardOperator {
    sector: FockSector,
    u: f64,
    t: f64,
    light_hops: HopTable,
    heavy_hops: HopTable,
}

impl HubbardOperator {
    pub fn new(sector: FockSector, u: f64, t: f64) -> Result<Self> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(Error::InvalidArgument(format!("U = {u} must be finite and nonnegative")));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("heavy hopping t = {t} not in [0, 1]")));
        }
        let light_hops = HopTable::new(sector.light_words(), sector.bonds());
        let heavy_hops = HopTable::new(sector.heavy_words(), sector.bonds());
        Ok(HubbardOperator { sector, u, t, light_hops, heavy_hops })
    }

    pub fn sector(&self) -> &FockSector {
        &self.sector
    }

    pub fn size(&self) -> usize {
        self.sector.size()
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn diagonal(&self, index: usize) -> f64 {
        let (l, h) = self.sector.state(index);
        self.u * (l & h).count_ones() as f64
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nl = self.sector.light_words().len();
        let light = self.sector.light_words();
        let heavy = self.sector.heavy_words();
        assert_eq!(x.len(), self.size());
        assert_eq!(y.len(), self.size());
        y.par_chunks_mut(nl).enumerate().for_each(|(h, out)| {
            let hw = heavy[h];
            let xs = &x[h * nl..(h + 1) * nl];
            for (l, o) in out.iter_mut().enumerate() {
                let mut acc = self.u * (light[l] & hw).count_ones() as f64 * xs[l];
                for (m, s) in self.light_hops.row(l) {
                    acc -= s * xs[m];
                }
                *o = acc;
            }
            if self.t != 0.0 {
                for (g, s) in self.heavy_hops.row(h) {
                    let amp = self.t * s;
                    let src = &x[g * nl..(g + 1) * nl];
                    for (o, v) in out.iter_mut().zip(src) {
                        *o -= amp * v;
                    }
                }
            }
        });
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.size();
        if n > DENSE_LIMIT {
            return Err(Error::ResourceLimit(format!("dense matrix of size {n} exceeds {DENSE_LIMIT}")));
        }
        let nl = self.sector.light_words().len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal(i);
            let (l, h) = (i % nl, i / nl);
            for (k, s) in self.light_hops.row(l) {
                m[(h * nl + k, i)] -= s;
            }
            for (g, s) in self.heavy_hops.row(h) {
                m[(g * nl + l, i)] -= self.t * s;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Domain;
    use crate::spectral::eigen_symmetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op(dom: &Domain, n1: usize, n2: usize, u: f64, t: f64) -> HubbardOperator {
        HubbardOperator::new(FockSector::new(dom, n1, n2).unwrap(), u, t).unwrap()
    }

    #[test]
    fn single_site() {
        let dom = Domain::segment(1).unwrap();
        let m = op(&dom, 1, 1, 3.5, 0.2).to_dense().unwrap();
        assert_eq!(m.nrows(), 1);
        assert_eq!(m[(0, 0)], 3.5);
    }

    #[test]
    fn symmetric_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (dom, n1, n2) in [
            (Domain::segment(7).unwrap(), 3, 2),
            (Domain::boxed(&[2, 3]).unwrap(), 2, 3),
            (Domain::from_coords(2, &[&[0, 0], &[1, 0], &[1, 1], &[2, 1], &[1, 2]]).unwrap(), 2, 2),
        ] {
            let h = op(&dom, n1, n2, 4.0, 0.3);
            let n = h.size();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (mut hv, mut hw) = (vec![0.0; n], vec![0.0; n]);
            h.apply(&v, &mut hv);
            h.apply(&w, &mut hw);
            let a: f64 = v.iter().zip(&hw).map(|(x, y)| x * y).sum();
            let b: f64 = hv.iter().zip(&w).map(|(x, y)| x * y).sum();
            assert!((a - b).abs() < 1e-12);
            let d = h.to_dense().unwrap();
            assert!((&d - d.transpose()).amax() == 0.0);
            let dv = &d * nalgebra::DVector::from_vec(v.clone());
            assert!(dv.iter().zip(&hv).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn spectrum_independent_of_site_order() {
        let dom = Domain::boxed(&[2, 3]).unwrap();
        let plain = op(&dom, 2, 2, 5.0, 0.4).to_dense().unwrap();
        let reversed: Vec<usize> = (0..6).rev().collect();
        let s = FockSector::with_site_order(&dom, 2, 2, &reversed).unwrap();
        let flipped = HubbardOperator::new(s, 5.0, 0.4).unwrap().to_dense().unwrap();
        let a = eigen_symmetric(&plain, false).unwrap().eigenvalues;
        let b = eigen_symmetric(&flipped, false).unwrap().eigenvalues;
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
    }

    #[test]
    fn two_fermions_on_a_square() {
        // Bonds 0-2 and 1-3 skip over an index and pick up the parity sign.
        let dom = Domain::boxed(&[2, 2]).unwrap();
        let h = op(&dom, 2, 0, 0.0, 0.0).to_dense().unwrap();
        let e = eigen_symmetric(&h, false).unwrap().eigenvalues;
        // Free fermions on a 4-cycle: one-particle levels -2, 0, 0, 2.
        assert!((e[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let dom = Domain::segment(3).unwrap();
        let s = FockSector::new(&dom, 1, 1).unwrap();
        assert!(HubbardOperator::new(s.clone(), -1.0, 0.5).is_err());
        assert!(HubbardOperator::new(s, 1.0, 1.5).is_err());
    }
}
