mod common;

use common::*;
use ionring::barrier::{barrier_profile, BarrierOptions};
use ionring::consts::{DEFAULT_DIAMETER, DEFAULT_RADIAL_OMEGA, ELEMENTARY_CHARGE, MASS_CA40_ION};
use ionring::equilibrium::{find_equilibrium, EquilibriumOptions};
use ionring::model::*;
use ionring::modes::tangential_modes;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

const D: f64 = DEFAULT_DIAMETER;

fn random_field(rng: &mut impl Rng) -> InPlaneField {
    InPlaneField::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)).unwrap()
}

#[test]
fn energy_matches_pair_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let field = random_field(&mut rng);
        let th = random_angles(&mut rng, n, 0.05);
        let ring = RingSpec::calcium(D, n).unwrap();
        let got = ring_energy(&CrystalState1D::new(th.clone()).unwrap(), &ring, &field).unwrap();
        let want = pair_energy(&th, D, field.ex, field.ey);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-30), "{got} vs {want}");
    }
}

#[test]
fn documented_point_values() {
    let r1 = RingSpec::calcium(D, 1).unwrap();
    let v = ring_energy(&CrystalState1D::new(vec![0.0]).unwrap(), &r1, &InPlaneField::along_y(2.0)).unwrap();
    assert!((v - (-0.5 * 2.0 * ELEMENTARY_CHARGE * D)).abs() < 1e-12 * v.abs());
    assert!((v + 1.442e-23).abs() < 0.001e-23);
    let r2 = RingSpec::calcium(D, 2).unwrap();
    let v = ring_energy(&CrystalState1D::new(vec![0.0, PI]).unwrap(), &r2, &InPlaneField::ZERO).unwrap();
    assert!((v - 2.563e-24).abs() < 0.001e-24);
    let g = ring_gradient(&CrystalState1D::new(vec![PI / 2.0]).unwrap(), &r1, &InPlaneField::along_y(2.0)).unwrap();
    assert!((g[0] - 1.442e-23).abs() < 0.001e-23);
}

#[test]
fn ring_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let field = random_field(&mut rng);
        let th = random_angles(&mut rng, n, 0.2);
        let ring = RingSpec::calcium(D, n).unwrap();
        let s = CrystalState1D::new(th.clone()).unwrap();
        let g = ring_gradient(&s, &ring, &field).unwrap();
        let fd = fd_gradient(&|x: &[f64]| pair_energy(x, D, field.ex, field.ey), &th, 1e-6);
        assert!(max_rel_error(&g, &fd) <= 1e-5, "gradient N={n}: {}", max_rel_error(&g, &fd));

        let h = ring_hessian(&s, &ring, &field).unwrap();
        assert_eq!(h, h.transpose());
        let jac = fd_jacobian(
            &|x: &[f64]| ring_gradient(&CrystalState1D::new(x.to_vec()).unwrap(), &ring, &field).unwrap(),
            &th,
            1e-6,
        );
        let flat_h: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| h[(i, j)]).collect();
        let flat_fd: Vec<f64> = jac.iter().flatten().copied().collect();
        assert!(max_rel_error(&flat_h, &flat_fd) <= 1e-5, "hessian N={n}");
    }
}

#[test]
fn planar_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r0 = D / 2.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let field = random_field(&mut rng);
        let th = random_angles(&mut rng, n, 0.2);
        let radii: Vec<f64> = (0..n).map(|_| r0 * rng.random_range(0.9..1.1)).collect();
        let ring = RingSpec::calcium(D, n).unwrap();
        let state = |x: &[f64]| {
            let angles: Vec<f64> = x[n..].iter().map(|s| s / r0).collect();
            CrystalState2D::new(x[..n].to_vec(), angles, DEFAULT_RADIAL_OMEGA, r0).unwrap()
        };
        let mut x: Vec<f64> = radii.clone();
        x.extend(th.iter().map(|t| t * r0));
        let g = planar_gradient(&state(&x), &ring, &field).unwrap();
        let fd = fd_gradient(&|y: &[f64]| planar_energy(&state(y), &ring, &field).unwrap(), &x, 1e-6 * r0);
        assert!(max_rel_error(&g, &fd) <= 1e-5, "planar gradient N={n}: {}", max_rel_error(&g, &fd));
        let h = planar_hessian(&state(&x), &ring, &field).unwrap();
        let jac = fd_jacobian(&|y: &[f64]| planar_gradient(&state(y), &ring, &field).unwrap(), &x, 1e-6 * r0);
        let m = 2 * n;
        let flat_h: Vec<f64> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| h[(i, j)]).collect();
        let flat_fd: Vec<f64> = jac.iter().flatten().copied().collect();
        assert!(max_rel_error(&flat_h, &flat_fd) <= 1e-5, "planar hessian N={n}");
    }
}

#[test]
fn two_ions_are_antipodal_without_field() {
    let ring = RingSpec::calcium(D, 2).unwrap();
    let eq = find_equilibrium(&ring, &InPlaneField::ZERO, &EquilibriumOptions::default()).unwrap();
    let a = eq.state.angles();
    assert!((wrap_pi(a[1] - a[0]).abs() - PI).abs() < 1e-9);
}

fn check_equilibrium_against_grid(n: usize, ex: f64, ey: f64, step: f64) {
    let ring = RingSpec::calcium(D, n).unwrap();
    let field = InPlaneField::new(ex, ey).unwrap();
    let eq = find_equilibrium(&ring, &field, &EquilibriumOptions::default()).unwrap();
    assert!(eq.converged);
    let (_, e_oracle) = brute_force_equilibrium(n, D, ex, ey, step);
    let rel = (eq.energy - e_oracle).abs() / e_oracle.abs();
    assert!(rel <= 1e-8, "N={n} E=({ex},{ey}): {} vs {e_oracle}, rel {rel:e}", eq.energy);
}

#[test]
fn three_ions_match_fine_grid() {
    let ring = RingSpec::calcium(D, 3).unwrap();
    let field = InPlaneField::along_y(2.0);
    let eq = find_equilibrium(&ring, &field, &EquilibriumOptions::default()).unwrap();
    let (angles, e_oracle) = brute_force_three(D, 0.0, 2.0, 1e-3);
    let rel = (eq.energy - e_oracle).abs() / e_oracle.abs();
    assert!(rel <= 1e-12, "{} vs {e_oracle}, rel {rel:e}", eq.energy);
    for x in &angles {
        let nearest = eq.state.angles().iter().map(|y| wrap_pi(x - y).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-6, "{angles:?} vs {:?}", eq.state.angles());
    }
}

#[test]
fn equilibria_match_brute_force() {
    check_equilibrium_against_grid(2, 0.0, 2.0, 2e-3);
    check_equilibrium_against_grid(2, 1.3, -0.7, 2e-3);
    check_equilibrium_against_grid(3, 0.0, 2.0, 0.02);
    check_equilibrium_against_grid(3, -1.1, 0.4, 0.02);
}

#[test]
fn constrained_barrier_points_match_brute_force() {
    let ring = RingSpec::calcium(D, 3).unwrap();
    let field = InPlaneField::along_y(1.0);
    let prof = barrier_profile(&ring, &field, &BarrierOptions::default()).unwrap();
    assert!(prof.is_complete());
    let n = prof.len();
    for k in [0, n / 4, n / 2, 3 * n / 4, n - 1] {
        let probe = prof.probe_angles[k];
        let want = brute_force_constrained3(probe, D, 0.0, 1.0, 2e-3);
        let rel = (prof.energies[k] - want).abs() / want.abs();
        assert!(rel <= 1e-8, "point {k}: {} vs {want}, rel {rel:e}", prof.energies[k]);
    }
}

#[test]
fn mode_frequencies_match_finite_difference_hessian() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ring = RingSpec::calcium(D, 5).unwrap();
    for _ in 0..3 {
        let field = random_field(&mut rng);
        let eq = find_equilibrium(&ring, &field, &EquilibriumOptions::default()).unwrap();
        let th = eq.state.angles().to_vec();
        let spectrum = tangential_modes(&eq.state, &ring, &field).unwrap();
        let jac = fd_jacobian(&|x: &[f64]| fd_gradient(&|y: &[f64]| pair_energy(y, D, field.ex, field.ey), x, 1e-5), &th, 1e-5);
        let r = D / 2.0;
        let m = DMatrix::from_fn(5, 5, |i, j| 0.5 * (jac[i][j] + jac[j][i]) / (r * r * MASS_CA40_ION));
        let mut lam: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        lam.sort_by(f64::total_cmp);
        for (w, l) in spectrum.omegas.iter().zip(&lam) {
            let w2 = w * w.abs();
            assert!((w2 - l).abs() <= 1e-4 * l.abs(), "{w2} vs {l}");
        }
    }
}

#[test]
fn single_ion_pendulum_frequency() {
    let ring = RingSpec::calcium(D, 1).unwrap();
    let field = InPlaneField::along_y(2.0);
    let eq = find_equilibrium(&ring, &field, &EquilibriumOptions::default()).unwrap();
    let spectrum = tangential_modes(&eq.state, &ring, &field).unwrap();
    let want = (2.0 * ELEMENTARY_CHARGE * 2.0 / (MASS_CA40_ION * D)).sqrt();
    assert!((spectrum.omegas[0] - want).abs() < 1e-9 * want);
    assert!((want / TAU - 52.1e3).abs() < 0.05e3);
}
