//! Lowest eigenpair of a sector: dense for small bases, otherwise a
//! thick-restart Lanczos iteration with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::basis::FockSector;
use super::operator::HubbardOperator;
use crate::{Error, Result};

/// Eigenvalues this close to the minimum count towards the degeneracy.
pub const DEGENERACY_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Residual bound relative to the spectral scale.
    pub tolerance: f64,
    pub max_matvecs: usize,
    /// Sectors smaller than this are diagonalized densely.
    pub dense_below: usize,
    /// Search for further ground vectors by deflation.
    pub probe_degeneracy: bool,
    pub max_degeneracy: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-9,
            max_matvecs: 200_000,
            dense_below: 500,
            probe_degeneracy: true,
            max_degeneracy: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Krylov,
}

#[derive(Clone, Debug)]
pub struct ManyBodyGroundState {
    pub sector: FockSector,
    pub u: f64,
    pub t: f64,
    pub energy: f64,
    /// Normalized coefficients in sector order.
    pub vector: Vec<f64>,
    /// Lower bound when probing stops at `max_degeneracy`; 1 when not probed.
    pub degeneracy: usize,
    pub residual: f64,
    pub method: Method,
    pub matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Classical Gram-Schmidt against every set, repeated while a pass removes
/// more than half of the norm. Returns the final norm.
fn orthogonalize(v: &mut [f64], sets: &[&[Vec<f64>]]) -> f64 {
    let mut before = norm(v);
    for _ in 0..4 {
        for b in sets.iter().flat_map(|s| s.iter()) {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
        let after = norm(v);
        if after > 0.5 * before {
            return after;
        }
        before = after;
    }
    before
}

pub fn ground_state(op: &HubbardOperator, opts: &SolverOptions) -> Result<ManyBodyGroundState> {
    if !(opts.tolerance > 0.0) || opts.max_matvecs == 0 {
        return Err(Error::InvalidArgument("solver needs a positive tolerance and matvec cap".into()));
    }
    if op.size() < opts.dense_below {
        dense_ground_state(op)
    } else {
        krylov_ground_state(op, opts)
    }
}

fn residual_of(op: &HubbardOperator, x: &[f64], energy: f64) -> f64 {
    let mut ax = vec![0.0; x.len()];
    op.apply(x, &mut ax);
    axpy(-energy, x, &mut ax);
    norm(&ax)
}

fn dense_ground_state(op: &HubbardOperator) -> Result<ManyBodyGroundState> {
    let m = op.to_dense()?;
    let eig = SymmetricEigen::new(m);
    let (imin, &energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidArgument("empty sector".into()))?;
    let degeneracy = eig.eigenvalues.iter().filter(|&&e| e <= energy + DEGENERACY_TOL).count();
    let mut vector: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
    let nv = norm(&vector);
    vector.iter_mut().for_each(|c| *c /= nv);
    let residual = residual_of(op, &vector, energy);
    Ok(ManyBodyGroundState {
        sector: op.sector().clone(),
        u: op.u(),
        t: op.t(),
        energy,
        vector,
        degeneracy,
        residual,
        method: Method::Dense,
        matvecs: 1,
    })
}

struct Eigenpair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    matvecs: usize,
}

fn krylov_ground_state(op: &HubbardOperator, opts: &SolverOptions) -> Result<ManyBodyGroundState> {
    let first = lowest_deflated(op, opts, &[], opts.seed)?;
    let mut matvecs = first.matvecs;
    let mut degeneracy = 1;
    if opts.probe_degeneracy {
        let mut locked = vec![first.vector.clone()];
        while degeneracy < opts.max_degeneracy && locked.len() < op.size() {
            let next = match lowest_deflated(op, opts, &locked, opts.seed.wrapping_add(locked.len() as u64)) {
                Ok(p) => p,
                Err(Error::NoConvergence(_)) => break,
                Err(e) => return Err(e),
            };
            matvecs += next.matvecs;
            if next.value > first.value + DEGENERACY_TOL {
                break;
            }
            degeneracy += 1;
            locked.push(next.vector);
        }
    }
    Ok(ManyBodyGroundState {
        sector: op.sector().clone(),
        u: op.u(),
        t: op.t(),
        energy: first.value,
        vector: first.vector,
        degeneracy,
        residual: first.residual,
        method: Method::Krylov,
        matvecs,
    })
}

/// Lowest eigenpair of `H` restricted to the orthogonal complement of
/// `locked` (orthonormal).
fn lowest_deflated(op: &HubbardOperator, opts: &SolverOptions, locked: &[Vec<f64>], seed: u64) -> Result<Eigenpair> {
    let n = op.size();
    let free = n - locked.len();
    let m_max = (8_000_000 / n).clamp(24, 120).min(free).max(1);
    let keep = (m_max / 3).max(1).min(m_max.saturating_sub(1)).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut proj = DMatrix::<f64>::zeros(m_max, m_max);
    let mut matvecs = 0;

    loop {
        let mut exhausted = false;
        while basis.len() < m_max && matvecs < opts.max_matvecs {
            let before = norm(&next);
            let nrm = orthogonalize(&mut next, &[locked, &basis]);
            if nrm <= 1e-12 * before || nrm == 0.0 {
                exhausted = true;
                break;
            }
            // Only the newest basis vector has an image leaving the span, so
            // `nrm |s_k|` estimates the lowest Ritz residual. The exact check
            // below still decides convergence.
            let k = basis.len();
            if k >= 8 && k.is_multiple_of(4) {
                let eig = SymmetricEigen::new(proj.view((0, 0), (k, k)).into_owned());
                let (low, _) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("nonempty");
                let scale = eig.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));
                if nrm * eig.eigenvectors[(k - 1, low)].abs() <= 0.1 * opts.tolerance * scale {
                    break;
                }
            }
            next.iter_mut().for_each(|c| *c /= nrm);
            let mut image = vec![0.0; n];
            op.apply(&next, &mut image);
            matvecs += 1;
            let k = basis.len();
            for (i, b) in basis.iter().enumerate() {
                let c = dot(b, &image);
                proj[(i, k)] = c;
                proj[(k, i)] = c;
            }
            proj[(k, k)] = dot(&next, &image);
            basis.push(next);
            images.push(image.clone());
            next = image;
        }
        let k = basis.len();
        if k == 0 {
            return Err(Error::NoConvergence("start vector lies in the deflated space".into()));
        }
        let eig = SymmetricEigen::new(proj.view((0, 0), (k, k)).into_owned());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let theta = eig.eigenvalues[order[0]];
        let scale = eig.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));

        let combine = |vs: &[Vec<f64>], col: usize| {
            let mut out = vec![0.0; n];
            for (i, v) in vs.iter().enumerate() {
                axpy(eig.eigenvectors[(i, col)], v, &mut out);
            }
            out
        };
        let x = combine(&basis, order[0]);
        let mut r = combine(&images, order[0]);
        axpy(-theta, &x, &mut r);
        let residual = orthogonalize(&mut r, &[locked]);

        if residual <= opts.tolerance * scale || exhausted {
            let nx = norm(&x);
            let vector = x.into_iter().map(|c| c / nx).collect();
            return Ok(Eigenpair { value: theta, vector, residual, matvecs });
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::NoConvergence(format!(
                "Krylov solver stopped after {matvecs} products with residual {residual:.3e}"
            )));
        }

        let kept = keep.min(k - 1).max(1);
        let new_basis: Vec<Vec<f64>> = order[..kept].iter().map(|&c| combine(&basis, c)).collect();
        let new_images: Vec<Vec<f64>> = order[..kept].iter().map(|&c| combine(&images, c)).collect();
        proj.fill(0.0);
        for (j, &c) in order[..kept].iter().enumerate() {
            proj[(j, j)] = eig.eigenvalues[c];
        }
        basis = new_basis;
        images = new_images;
        next = r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Domain;

    fn operator(dom: &Domain, n1: usize, n2: usize, u: f64, t: f64) -> HubbardOperator {
        HubbardOperator::new(FockSector::new(dom, n1, n2).unwrap(), u, t).unwrap()
    }

    #[test]
    fn trivial_sector() {
        let dom = Domain::segment(1).unwrap();
        let gs = ground_state(&operator(&dom, 1, 1, 2.0, 0.5), &SolverOptions::default()).unwrap();
        assert_eq!(gs.energy, 2.0);
        assert_eq!(gs.vector.len(), 1);
        assert_eq!(gs.degeneracy, 1);
    }

    #[test]
    fn krylov_matches_dense() {
        let dense = SolverOptions { dense_below: crate::manybody::DENSE_LIMIT, ..SolverOptions::default() };
        let krylov = SolverOptions { dense_below: 0, ..SolverOptions::default() };
        for (dom, n1, n2, u, t) in [
            (Domain::segment(8).unwrap(), 3, 2, 6.0, 0.3),
            (Domain::boxed(&[2, 3]).unwrap(), 2, 2, 1.0, 1.0),
            (Domain::segment(6).unwrap(), 3, 3, 10.0, 0.0),
        ] {
            let op = operator(&dom, n1, n2, u, t);
            let a = ground_state(&op, &dense).unwrap();
            let b = ground_state(&op, &krylov).unwrap();
            assert_eq!(a.method, Method::Dense);
            assert_eq!(b.method, Method::Krylov);
            assert!((a.energy - b.energy).abs() < 1e-9, "{} vs {}", a.energy, b.energy);
            assert_eq!(a.degeneracy, b.degeneracy, "{dom}");
            assert!((norm(&b.vector) - 1.0).abs() < 1e-10);
            assert!(b.residual <= 1e-9 * 100.0);
        }
    }

    #[test]
    fn deterministic_output() {
        let dom = Domain::segment(9).unwrap();
        let op = operator(&dom, 3, 3, 16.0, 0.1);
        let opts = SolverOptions { dense_below: 0, probe_degeneracy: false, ..SolverOptions::default() };
        let a = ground_state(&op, &opts).unwrap();
        let b = ground_state(&op, &opts).unwrap();
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert_eq!(a.vector, b.vector);
    }

    #[test]
    fn iteration_cap() {
        let dom = Domain::segment(10).unwrap();
        let op = operator(&dom, 4, 3, 8.0, 0.2);
        let opts = SolverOptions { dense_below: 0, max_matvecs: 5, ..SolverOptions::default() };
        assert!(matches!(ground_state(&op, &opts), Err(Error::NoConvergence(_))));
    }
}
