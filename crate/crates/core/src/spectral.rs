//! Single-particle operators on a finite domain.
//!
//! Two conventions are kept apart on purpose. The discrete Laplacian
//! `h_Λ` carries `2d` on the diagonal and has spectrum in `[0, 4d]`; the
//! hopping matrix `t_Λ = h_Λ - 2d` is the kinetic term of the many-body
//! Hamiltonian. Every function that consumes a spectrum says which one.

use std::f64::consts::PI;
use std::io;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::lattice::{Domain, Site};
use crate::{Error, Result};

/// Dense eigensolver ceiling on the matrix dimension.
pub const DENSE_CEILING: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Convention {
    /// `h_Λ`: diagonal `2d`, off-diagonal `-1` on bonds.
    Laplacian,
    /// `t_Λ`: zero diagonal, off-diagonal `-1` on bonds.
    Hopping,
}

#[derive(Clone, Debug)]
pub struct SingleParticleMatrix {
    pub convention: Convention,
    pub dim: usize,
    pub matrix: DMatrix<f64>,
}

impl SingleParticleMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn build_matrix(dom: &Domain, convention: Convention) -> SingleParticleMatrix {
    let n = dom.len();
    let diag = match convention {
        Convention::Laplacian => 2.0 * dom.dim() as f64,
        Convention::Hopping => 0.0,
    };
    let mut m = DMatrix::from_diagonal_element(n, n, diag);
    for (i, j) in dom.bonds() {
        m[(i, j)] = -1.0;
        m[(j, i)] = -1.0;
    }
    SingleParticleMatrix { convention, dim: dom.dim(), matrix: m }
}

/// Ascending eigenvalues, optionally with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

impl Spectrum {
    /// `S_N`: sum of the `n` lowest eigenvalues.
    pub fn sum_lowest(&self, n: usize) -> Result<f64> {
        if n > self.eigenvalues.len() {
            return Err(Error::InvalidArgument(format!(
                "N = {n} exceeds matrix size {}",
                self.eigenvalues.len()
            )));
        }
        Ok(self.eigenvalues[..n].iter().sum())
    }

    /// `[S_0, S_1, ..., S_n]`.
    pub fn partial_sums(&self) -> Vec<f64> {
        let mut sums = Vec::with_capacity(self.eigenvalues.len() + 1);
        let mut acc = 0.0;
        sums.push(acc);
        for e in &self.eigenvalues {
            acc += e;
            sums.push(acc);
        }
        sums
    }
}

/// Full symmetric eigendecomposition, sorted ascending.
pub fn eigen_symmetric(m: &DMatrix<f64>, vectors: bool) -> Result<Spectrum> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if n > DENSE_CEILING {
        return Err(Error::ResourceLimit(format!(
            "dense eigensolver limited to size {DENSE_CEILING}, got {n}"
        )));
    }
    if n == 0 {
        return Ok(Spectrum { eigenvalues: Vec::new(), eigenvectors: vectors.then(|| m.clone()) });
    }
    if !vectors {
        let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        return Ok(Spectrum { eigenvalues: ev, eigenvectors: None });
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { eigenvalues, eigenvectors: Some(vecs) })
}

pub fn eigen_ascending(m: &SingleParticleMatrix, vectors: bool) -> Result<Spectrum> {
    eigen_symmetric(&m.matrix, vectors)
}

/// Spectrum of the domain in the given convention (eigenvalues only).
pub fn spectrum(dom: &Domain, convention: Convention) -> Result<Spectrum> {
    eigen_ascending(&build_matrix(dom, convention), false)
}

/// `S_{Λ,N}` in the given convention.
pub fn sum_lowest(dom: &Domain, n: usize, convention: Convention) -> Result<f64> {
    if n > dom.len() {
        return Err(Error::InvalidArgument(format!("N = {n} exceeds |Λ| = {}", dom.len())));
    }
    spectrum(dom, convention)?.sum_lowest(n)
}

/// Boundary vector `b_k`, supported on the inner boundary.
#[derive(Clone, Debug)]
pub struct BoundaryVector {
    pub k: Vec<f64>,
    /// Amplitudes at inner-boundary sites, in canonical site order.
    pub values: Vec<(Site, Complex64)>,
}

impl BoundaryVector {
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|(_, v)| v.norm_sqr()).sum()
    }

    /// Whether the window `B ≤ ‖b_k‖² ≤ 2d B` is asserted at this `k`; the
    /// lower edge is only guaranteed for `|k|_∞ ≤ π/4`.
    pub fn window_asserted(&self) -> bool {
        self.k.iter().all(|c| c.abs() <= PI / 4.0)
    }

    /// Both edges of the norm window; `(lower_ok, upper_ok)`.
    pub fn window(&self, bond_count: usize, dim: usize, tol: f64) -> (bool, bool) {
        let n2 = self.norm_sqr();
        let b = bond_count as f64;
        (n2 >= b - tol, n2 <= 2.0 * dim as f64 * b + tol)
    }
}

/// `b_k(x) = χ_∂Λ(x) e^{-ikx} Σ_{e: x+e ∉ Λ} e^{-ike}`.
pub fn boundary_vector(dom: &Domain, k: &[f64]) -> Result<BoundaryVector> {
    let d = dom.dim();
    if k.len() != d {
        return Err(Error::InvalidArgument(format!("k must have {d} components")));
    }
    if k.iter().any(|c| !c.is_finite() || c.abs() > PI) {
        return Err(Error::InvalidArgument(format!("k = {k:?} outside [-π, π]^{d}")));
    }
    let mut values = Vec::new();
    for site in dom.sites() {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut any = false;
        for axis in 0..d {
            for step in [-1, 1] {
                if !dom.contains(&site.offset(axis, step)) {
                    any = true;
                    acc += Complex64::from_polar(1.0, -k[axis] * step as f64);
                }
            }
        }
        if any {
            let kx: f64 = site.coords(d).iter().zip(k).map(|(&x, &kk)| x as f64 * kk).sum();
            values.push((*site, Complex64::from_polar(1.0, -kx) * acc));
        }
    }
    Ok(BoundaryVector { k: k.to_vec(), values })
}

/// Writes `(domain_id, index, eigenvalue)` rows.
pub fn write_spectrum_csv<W: io::Write>(mut w: W, rows: &[(usize, &Spectrum)]) -> io::Result<()> {
    writeln!(w, "domain_id,index,eigenvalue")?;
    for (id, s) in rows {
        for (i, e) in s.eigenvalues.iter().enumerate() {
            writeln!(w, "{id},{},{e}", i + 1)?;
        }
    }
    Ok(())
}

/// Writes `(domain_id, N, S)` rows for `N = 0..=|Λ|`.
pub fn write_partial_sums_csv<W: io::Write>(
    mut w: W,
    rows: &[(usize, &Spectrum)],
) -> io::Result<()> {
    writeln!(w, "domain_id,N,S")?;
    for (id, s) in rows {
        for (n, sum) in s.partial_sums().iter().enumerate() {
            writeln!(w, "{id},{n},{sum}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{add_isolated_sites, boundary_bond_count, Enumeration};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_site_and_pair() {
        for d in 1..=3 {
            let single = Domain::new(d, [Site::ORIGIN]).unwrap();
            let m = build_matrix(&single, Convention::Laplacian);
            assert_eq!(m.matrix[(0, 0)], 2.0 * d as f64);
            assert_eq!(spectrum(&single, Convention::Laplacian).unwrap().eigenvalues, vec![2.0 * d as f64]);
        }
        let pair = Domain::segment(2).unwrap();
        let m = build_matrix(&pair, Convention::Laplacian).matrix;
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
        let s = spectrum(&pair, Convention::Laplacian).unwrap();
        assert!(close(s.eigenvalues[0], 1.0, 1e-12) && close(s.eigenvalues[1], 3.0, 1e-12));
        assert!(close(sum_lowest(&pair, 1, Convention::Laplacian).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn convention_identity() {
        for dom in Enumeration::connected(2, 5).run().unwrap() {
            let h = build_matrix(&dom, Convention::Laplacian).matrix;
            let t = build_matrix(&dom, Convention::Hopping).matrix;
            let diff = h - t;
            assert_eq!(diff, DMatrix::from_diagonal_element(dom.len(), dom.len(), 4.0));
        }
    }

    #[test]
    fn path_graph_closed_form() {
        for l in 2..=8 {
            let s = spectrum(&Domain::segment(l).unwrap(), Convention::Laplacian).unwrap();
            for (j, e) in s.eigenvalues.iter().enumerate() {
                let exact = 2.0 - 2.0 * ((j + 1) as f64 * PI / (l + 1) as f64).cos();
                assert!(close(*e, exact, 1e-12), "L={l} j={j}");
            }
        }
    }

    #[test]
    fn eigenvector_residuals_small() {
        let dom = Domain::boxed(&[3, 4]).unwrap();
        let m = build_matrix(&dom, Convention::Laplacian);
        let s = eigen_ascending(&m, true).unwrap();
        let v = s.eigenvectors.as_ref().unwrap();
        let norm_est = 8.0;
        for (j, &e) in s.eigenvalues.iter().enumerate() {
            let col = v.column(j);
            let r = &m.matrix * col - col * e;
            assert!(r.norm() <= 1e-10 * norm_est);
        }
        let gram = v.transpose() * v;
        assert!((gram - DMatrix::identity(12, 12)).norm() < 1e-10);
    }

    #[test]
    fn trace_and_invalid_n() {
        let dom = Domain::boxed(&[2, 3]).unwrap();
        assert!(close(sum_lowest(&dom, 6, Convention::Laplacian).unwrap(), 24.0, 1e-10));
        assert_eq!(sum_lowest(&dom, 0, Convention::Laplacian).unwrap(), 0.0);
        assert!(sum_lowest(&dom, 7, Convention::Laplacian).is_err());
    }

    #[test]
    fn ceiling_enforced() {
        let m = DMatrix::<f64>::zeros(DENSE_CEILING + 1, DENSE_CEILING + 1);
        assert!(matches!(eigen_symmetric(&m, false), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn boundary_vector_examples() {
        let seg = Domain::segment(5).unwrap();
        let b = boundary_vector(&seg, &[0.0]).unwrap();
        assert_eq!(b.values.len(), 2);
        assert!(b.values.iter().all(|(_, v)| close(v.re, 1.0, 1e-15) && v.im == 0.0));
        assert!(close(b.norm_sqr(), 2.0, 1e-12));

        for d in 1..=3 {
            let single = Domain::new(d, [Site::ORIGIN]).unwrap();
            let b = boundary_vector(&single, &vec![0.0; d]).unwrap();
            assert!(close(b.values[0].1.re, 2.0 * d as f64, 1e-12));
            assert!(close(b.norm_sqr(), 4.0 * (d * d) as f64, 1e-12));
        }

        let sq = Domain::boxed(&[2, 2]).unwrap();
        let b = boundary_vector(&sq, &[0.0, 0.0]).unwrap();
        assert!(b.values.iter().all(|(_, v)| close(v.re, 2.0, 1e-12)));
        assert!(close(b.norm_sqr(), 16.0, 1e-12));
        assert_eq!(b.window(8, 2, 1e-12), (true, true));

        assert!(boundary_vector(&sq, &[4.0, 0.0]).is_err());
        assert!(boundary_vector(&sq, &[0.0]).is_err());
    }

    #[test]
    fn isolated_sites_lower_partial_sums() {
        let base = Domain::boxed(&[2, 3]).unwrap();
        let aug = add_isolated_sites(&base, 4);
        let s0 = spectrum(&base, Convention::Laplacian).unwrap();
        let s1 = spectrum(&aug, Convention::Laplacian).unwrap();
        for n in 0..=base.len() {
            assert!(s0.sum_lowest(n).unwrap() >= s1.sum_lowest(n).unwrap() - 1e-12);
        }
        // Equality when N/|Λ| ≤ 1/2: the extra eigenvalues all equal 2d.
        assert!(close(s0.sum_lowest(3).unwrap(), s1.sum_lowest(3).unwrap(), 1e-10));
        assert_eq!(boundary_bond_count(&aug), boundary_bond_count(&base) + 16);
    }

    #[test]
    fn csv_writers() {
        let s = spectrum(&Domain::segment(2).unwrap(), Convention::Laplacian).unwrap();
        let mut buf = Vec::new();
        write_partial_sums_csv(&mut buf, &[(7, &s)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("domain_id,N,S\n7,0,0\n7,1,"));
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &[(0, &s)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
