use std::f64::consts::PI;

use seglab::bulk::{band_energy, Bulk, BulkTable};

/// Brute-force oracle: sort band energies on a midpoint grid and fill the
/// lowest `ρ M^d` states. Returns `(ε_F, e)`.
fn grid_oracle(dim: usize, m: usize, rho: f64) -> (f64, f64) {
    let axis: Vec<f64> = (0..m).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / m as f64).collect();
    let mut energies = Vec::with_capacity(m.pow(dim as u32));
    let mut k = vec![0.0; dim];
    let total = m.pow(dim as u32);
    for idx in 0..total {
        let mut rest = idx;
        for c in k.iter_mut() {
            *c = axis[rest % m];
            rest /= m;
        }
        energies.push(band_energy(&k));
    }
    energies.sort_by(f64::total_cmp);
    let n = (rho * total as f64).round() as usize;
    let e: f64 = energies[..n].iter().sum::<f64>() / total as f64;
    (0.5 * (energies[n - 1] + energies[n]), e)
}

#[test]
fn one_dimensional_closed_forms_on_a_fine_grid() {
    let bulk = Bulk::with_default(1).unwrap();
    for i in 1..=99 {
        let rho = i as f64 / 100.0;
        let p = bulk.point(rho).unwrap();
        let fermi = 2.0 - 2.0 * (PI * rho).cos();
        let e = 2.0 * rho - 2.0 / PI * (PI * rho).sin();
        assert!((p.fermi - fermi).abs() < 1e-8, "ρ={rho}");
        assert!((p.energy - e).abs() < 1e-8, "ρ={rho}");
        assert!((p.xi() - (rho * fermi - e)).abs() < 1e-8);
        assert!((p.upper_coeff(1) - (rho - e / 2.0)).abs() < 1e-8);
    }
}

#[test]
fn two_dimensional_values_match_grid_oracle() {
    let bulk = Bulk::with_default(2).unwrap();
    for rho in [0.05, 0.2, 0.35, 0.5, 0.7] {
        let (fermi, e) = grid_oracle(2, 1024, rho);
        let p = bulk.point(rho).unwrap();
        assert!((p.fermi - fermi).abs() < 2e-3, "ρ={rho}: {} vs {fermi}", p.fermi);
        assert!((p.energy - e).abs() < 1e-4, "ρ={rho}: {} vs {e}", p.energy);
    }
    // Half filling: e = 2 - 8/π².
    let (_, e) = grid_oracle(2, 1024, 0.5);
    assert!((e - (2.0 - 8.0 / (PI * PI))).abs() < 1e-5);
    assert!((bulk.energy(0.5).unwrap() - (2.0 - 8.0 / (PI * PI))).abs() < 1e-9);
}

#[test]
fn three_dimensional_values_match_grid_oracle() {
    let bulk = Bulk::with_default(3).unwrap();
    for rho in [0.1, 0.3, 0.5] {
        let (fermi, e) = grid_oracle(3, 96, rho);
        let p = bulk.point(rho).unwrap();
        assert!((p.fermi - fermi).abs() < 1e-2, "ρ={rho}: {} vs {fermi}", p.fermi);
        assert!((p.energy - e).abs() < 1e-3, "ρ={rho}: {} vs {e}", p.energy);
    }
    assert!((bulk.fermi_level(0.5).unwrap() - 6.0).abs() < 1e-9);
}

#[test]
fn small_density_fermi_level_two_dimensions() {
    let bulk = Bulk::with_default(2).unwrap();
    let f = bulk.fermi_level(0.01).unwrap();
    let disk = 4.0 * PI * 0.01;
    assert!((f - disk).abs() / disk < 0.03, "{f} vs {disk}");
}

#[test]
fn self_convergence_in_resolution() {
    for (dim, m) in [(2, 64), (3, 32)] {
        let a = Bulk::with_points(dim, m).unwrap();
        let b = Bulk::with_points(dim, 2 * m).unwrap();
        for i in 1..20 {
            let rho = i as f64 / 20.0;
            let diff = (a.energy(rho).unwrap() - b.energy(rho).unwrap()).abs();
            assert!(diff <= 1e-6, "d={dim} ρ={rho} diff {diff}");
        }
    }
}

#[test]
fn particle_hole_symmetry_of_bulk_energy() {
    for dim in 1..=3 {
        let bulk = Bulk::with_default(dim).unwrap();
        for i in 1..10 {
            let rho = i as f64 / 20.0;
            let lhs = bulk.energy(1.0 - rho).unwrap();
            let rhs = bulk.energy(rho).unwrap() + 2.0 * dim as f64 * (1.0 - 2.0 * rho);
            assert!((lhs - rhs).abs() < 1e-8, "d={dim} ρ={rho}");
        }
    }
}

#[test]
fn table_invariants() {
    for dim in 1..=3 {
        let t = BulkTable::build(dim, Bulk::with_default(dim).unwrap().quadrature().points(), &BulkTable::uniform_grid(39)).unwrap();
        let d2 = 2.0 * dim as f64;
        assert_eq!(t.rows[0].e, 0.0);
        assert_eq!(t.rows.last().unwrap().e, d2);
        for w in t.rows.windows(2) {
            assert!(w[1].fermi >= w[0].fermi);
            assert!(w[1].xi >= w[0].xi - 1e-12, "ξ not increasing in d={dim}");
        }
        for r in &t.rows {
            assert!(r.e >= -1e-15 && r.e <= d2 * r.rho + 1e-12);
            assert!(r.xi >= -1e-15 && r.b >= -1e-15);
            assert!(r.err_estimate <= 1e-6);
        }
    }
}

#[test]
fn xi_scaling_at_low_density() {
    for dim in 1..=3 {
        let bulk = Bulk::with_default(dim).unwrap();
        let ratios: Vec<f64> = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
            .iter()
            .map(|&rho| bulk.xi(rho).unwrap() / f64::powf(rho, 1.0 + 2.0 / dim as f64))
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(lo > 0.0 && hi / lo < 2.0, "d={dim}: {ratios:?}");
    }
}

#[test]
fn fermi_slope_bound_is_asymptotically_tight() {
    for dim in 1..=3 {
        let bulk = Bulk::with_default(dim).unwrap();
        for rho in [1e-3, 1e-2, 0.1, 0.2] {
            let r = bulk.fermi_slope_check(rho).unwrap();
            assert!(r.holds, "d={dim} ρ={rho}: {r:?}");
        }
        let r = bulk.fermi_slope_check(1e-3).unwrap();
        assert!(r.ratio > 0.8 && r.ratio <= 1.0, "d={dim}: {r:?}");
    }
    let r = Bulk::with_default(1).unwrap().fermi_slope_check(0.1).unwrap();
    assert!((r.derivative - 1.9416).abs() < 1e-4 && (r.bound - 1.9739).abs() < 1e-4);
}
