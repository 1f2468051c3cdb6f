mod common;

use ionring::barrier::*;
use ionring::consts::{DEFAULT_DIAMETER, DEFAULT_RADIAL_OMEGA};
use ionring::equilibrium::*;
use ionring::model::*;
use ionring::modes::*;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

const D: f64 = DEFAULT_DIAMETER;

fn ring(n: usize) -> RingSpec {
    RingSpec::calcium(D, n).unwrap()
}

/// Field vector turned counter-clockwise in the x-y plane.
fn ccw(field: &InPlaneField, alpha: f64) -> InPlaneField {
    let (s, c) = alpha.sin_cos();
    InPlaneField::new(field.ex * c - field.ey * s, field.ex * s + field.ey * c).unwrap()
}

fn sorted_norm(a: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().map(|x| normalize_angle(*x)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest angular distance between two angle sets, matched after sorting with a cyclic shift.
fn set_distance(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted_norm(a), sorted_norm(b));
    let n = a.len();
    (0..n)
        .map(|shift| (0..n).map(|i| wrap_pi(a[i] - b[(i + shift) % n]).abs()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn state_strategy() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (2usize..=8)
        .prop_flat_map(|n| (prop::collection::vec(0.0..TAU, n), -5.0..5.0f64, -5.0..5.0f64))
        .prop_filter("ions too close", |(a, _, _)| {
            let s = sorted_norm(a);
            let n = s.len();
            (0..n).all(|i| {
                let gap = if i + 1 < n { s[i + 1] - s[i] } else { s[0] + TAU - s[n - 1] };
                gap > 0.02
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_field_energy_is_rotation_invariant((angles, _, _) in state_strategy(), phi in 0.0..TAU) {
        let r = ring(angles.len());
        let s = CrystalState1D::new(angles).unwrap();
        let e0 = ring_energy(&s, &r, &InPlaneField::ZERO).unwrap();
        let e1 = ring_energy(&s.rotated(phi), &r, &InPlaneField::ZERO).unwrap();
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
    }

    #[test]
    fn field_rotation_covariance((angles, ex, ey) in state_strategy(), alpha in 0.0..TAU) {
        // Turning the field counter-clockwise by alpha equals turning the ions by -alpha in theta.
        let r = ring(angles.len());
        let field = InPlaneField::new(ex, ey).unwrap();
        let s = CrystalState1D::new(angles).unwrap();
        let a = ring_energy(&s.rotated(-alpha), &r, &ccw(&field, alpha)).unwrap();
        let b = ring_energy(&s, &r, &field).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(a.abs()));
    }

    #[test]
    fn coulomb_term_diverges_monotonically(n in 2usize..=8, base in 0.0..TAU) {
        let r = ring(n);
        let start = TAU / (10.0 * n as f64);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..40 {
            let sep = start * 0.8f64.powi(k);
            let mut a: Vec<f64> = (0..n).map(|i| base + PI + i as f64 * 0.5 / n as f64).collect();
            a[0] = base;
            a[1] = base + sep;
            let e = ring_energy(&CrystalState1D::new(a).unwrap(), &r, &InPlaneField::ZERO).unwrap();
            prop_assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn hessian_is_exactly_symmetric((angles, ex, ey) in state_strategy()) {
        let r = ring(angles.len());
        let h = ring_hessian(&CrystalState1D::new(angles).unwrap(), &r, &InPlaneField::new(ex, ey).unwrap()).unwrap();
        prop_assert_eq!(h.clone(), h.transpose());
    }
}

#[test]
fn zero_field_equilibria_are_uniform() {
    for n in 1..=12 {
        let eq = find_equilibrium(&ring(n), &InPlaneField::ZERO, &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged);
        assert!(eq.state.angles()[0].abs() < 1e-12 || (eq.state.angles()[0] - TAU).abs() < 1e-12, "gauge");
        if n > 1 {
            for g in eq.state.gaps() {
                assert!((g - TAU / n as f64).abs() < 1e-8, "N={n}: gap {g}");
            }
        }
    }
}

#[test]
fn converged_equilibria_are_minima() {
    let opts = EquilibriumOptions::default();
    for n in 2..=15 {
        for field in [InPlaneField::along_y(2.0), InPlaneField::new(-1.0, 0.3).unwrap(), InPlaneField::ZERO] {
            let r = ring(n);
            let eq = find_equilibrium(&r, &field, &opts).unwrap();
            assert!(eq.converged && eq.gradient_norm <= opts.tolerance);
            let h = ring_hessian(&eq.state, &r, &field).unwrap();
            let ev = SymmetricEigen::new(h).eigenvalues;
            let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(ev.iter().all(|v| *v >= -1e-10 * top), "N={n}: {ev:?}");
        }
    }
}

#[test]
fn equilibrium_follows_field_rotation() {
    let field = InPlaneField::new(0.4, 1.7).unwrap();
    for n in [3, 7, 10] {
        let r = ring(n);
        let base = find_equilibrium(&r, &field, &EquilibriumOptions::default()).unwrap();
        for alpha in [0.3, 1.9, 4.0] {
            let turned = find_equilibrium(&r, &ccw(&field, alpha), &EquilibriumOptions::default()).unwrap();
            let expect: Vec<f64> = base.state.angles().iter().map(|a| a - alpha).collect();
            let dist = set_distance(turned.state.angles(), &expect);
            assert!(dist <= 1e-6, "N={n} alpha={alpha}: {dist}");
        }
    }
}

#[test]
fn more_starts_never_raise_the_energy() {
    for (n, field) in [(6, InPlaneField::along_y(3.0)), (11, InPlaneField::new(2.0, -1.0).unwrap())] {
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let eq = find_equilibrium(&ring(n), &field, &EquilibriumOptions { multistart: k, ..Default::default() }).unwrap();
            assert!(eq.energy <= prev);
            prev = eq.energy;
        }
    }
}

#[test]
fn equilibrium_is_deterministic_for_a_seed() {
    let opts = EquilibriumOptions { multistart: 5, seed: 42, ..Default::default() };
    let a = find_equilibrium(&ring(9), &InPlaneField::along_y(1.3), &opts).unwrap();
    let b = find_equilibrium(&ring(9), &InPlaneField::along_y(1.3), &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pinned_ten_ion_ring_is_mirror_symmetric_and_dense_at_pole() {
    let field = InPlaneField::along_y(-2.0);
    let eq = find_equilibrium(&ring(10), &field, &EquilibriumOptions::default()).unwrap();
    let pole = field.favored_angle();
    assert!((pole - PI).abs() < 1e-12);
    // mirror about the y axis: theta -> -theta maps the set onto itself
    let mirrored: Vec<f64> = eq.state.angles().iter().map(|a| -a).collect();
    assert!(set_distance(eq.state.angles(), &mirrored) < 1e-6);
    let gaps = eq.state.gaps();
    let s = eq.state.angles();
    let gap_at = |k: usize| (gaps[k], wrap_pi(s[k] + 0.5 * gaps[k] - pole).abs());
    let (near, far): (Vec<_>, Vec<_>) = (0..10).map(gap_at).partition(|(_, d)| *d < PI / 2.0);
    let mean = |v: &[(f64, f64)]| v.iter().map(|x| x.0).sum::<f64>() / v.len() as f64;
    assert!(mean(&near) < mean(&far), "gaps near the pole should be smaller");
}

#[test]
fn planar_zero_field_ring_is_uniform_at_force_balance_radius() {
    use common::{E_CHARGE, EPS0};
    let n = 4;
    let r = ring(n);
    let eq = find_equilibrium_planar(&r, &InPlaneField::ZERO, DEFAULT_RADIAL_OMEGA, &EquilibriumOptions::default()).unwrap();
    assert_eq!(eq.zigzag, Some(false));
    // m w^2 (rho - r0) = sum_j e^2 / (16 pi eps0 rho^2 sin(pi j / N))
    let r0 = D / 2.0;
    let k = ionring::consts::MASS_CA40_ION * DEFAULT_RADIAL_OMEGA.powi(2);
    let push = |rho: f64| (1..n).map(|j| E_CHARGE * E_CHARGE / (16.0 * PI * EPS0 * rho * rho * (PI * j as f64 / n as f64).sin())).sum::<f64>();
    let mut rho = r0;
    for _ in 0..100 {
        rho = r0 + push(rho) / k;
    }
    for ri in eq.state.radii() {
        assert!((ri - rho).abs() < 1e-10, "{ri} vs {rho}");
    }
    for g in CrystalState1D::new(eq.state.angles().to_vec()).unwrap().gaps() {
        assert!((g - TAU / n as f64).abs() < 1e-8);
    }
}

#[test]
fn planar_stiff_limit_matches_ring() {
    let r = ring(3);
    let field = InPlaneField::along_y(2.0);
    let one = find_equilibrium(&r, &field, &EquilibriumOptions::default()).unwrap();
    let two = find_equilibrium_planar(&r, &field, 10.0 * DEFAULT_RADIAL_OMEGA, &EquilibriumOptions::default()).unwrap();
    assert!(two.converged);
    let dist = set_distance(one.state.angles(), two.state.angles());
    assert!(dist < 1e-4, "planar angles differ from the ring by {dist:e} rad at 10x radial frequency");
}

#[test]
fn planar_angles_approach_ring_as_inverse_square_of_radial_frequency() {
    let r = ring(3);
    let field = InPlaneField::along_y(2.0);
    let one = find_equilibrium(&r, &field, &EquilibriumOptions::default()).unwrap();
    let dist: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|k| {
            let two = find_equilibrium_planar(&r, &field, k * DEFAULT_RADIAL_OMEGA, &EquilibriumOptions::default()).unwrap();
            set_distance(one.state.angles(), two.state.angles())
        })
        .collect();
    for w in dist.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() < 0.1, "{dist:?}");
    }
    assert!(dist[3] < 2e-6);
}

#[test]
fn zigzag_scans() {
    let r = ring(2);
    let opts = EquilibriumOptions::default();
    let stiff = zigzag_critical_number(&r, &InPlaneField::along_y(3.0), 100.0 * DEFAULT_RADIAL_OMEGA, 30, &opts).unwrap();
    assert_eq!(stiff.critical, None);
    let mut prev = usize::MAX;
    for e in [1.0, 2.0, 4.0, 8.0] {
        let scan = zigzag_critical_number(&r, &InPlaneField::along_y(e), DEFAULT_RADIAL_OMEGA, 30, &opts).unwrap();
        let c = scan.critical.unwrap_or(usize::MAX);
        assert!(c <= prev, "E={e}: {c} > {prev}");
        prev = c;
    }
    let pinned = find_equilibrium_planar(&ring(25), &InPlaneField::along_y(3.0), DEFAULT_RADIAL_OMEGA, &opts).unwrap();
    assert_eq!(pinned.zigzag, Some(true));
    // a strong field squeezes small rings into a dipole shape, which is not a zig-zag
    for n in 3..=8 {
        let small = find_equilibrium_planar(&ring(n), &InPlaneField::along_y(6.0), DEFAULT_RADIAL_OMEGA, &opts).unwrap();
        assert_eq!(small.zigzag, Some(false), "N={n}");
    }
}

#[test]
fn spectrum_shape_and_invariance() {
    for n in 2..=12 {
        let r = ring(n);
        let s = CrystalState1D::uniform(n, 0.3).unwrap();
        let spectrum = tangential_modes(&s, &r, &InPlaneField::ZERO).unwrap();
        assert_eq!(spectrum.omegas.len(), n);
        assert_eq!(spectrum.zero_modes, 1);
        assert!(spectrum.omegas[1..].iter().all(|w| *w > ZERO_MODE_OMEGA));
        let v = &spectrum.vectors;
        let gram = v.transpose() * v;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-10);
            }
        }
    }
    let field = InPlaneField::new(0.8, -1.5).unwrap();
    let r = ring(7);
    let eq = find_equilibrium(&r, &field, &EquilibriumOptions::default()).unwrap();
    let base = tangential_modes(&eq.state, &r, &field).unwrap();
    for alpha in [0.7, 2.2, 5.0] {
        let turned = tangential_modes(&eq.state.rotated(-alpha), &r, &ccw(&field, alpha)).unwrap();
        for (a, b) in base.omegas.iter().zip(&turned.omegas) {
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }
}

#[test]
fn lowest_frequency_trends() {
    let opts = EquilibriumOptions::default();
    let mut prev = f64::INFINITY;
    for n in 2..=15 {
        let f = lowest_tangential_frequency(&ring(n), &InPlaneField::along_y(2.0), &opts).unwrap();
        assert!(f < prev, "N={n}: {f} !< {prev}");
        prev = f;
    }
    let mut prev = 0.0;
    for k in 0..=18 {
        let e = 0.5 + 0.25 * k as f64;
        let f = lowest_tangential_frequency(&ring(10), &InPlaneField::along_y(e), &opts).unwrap();
        assert!(f > prev, "E={e}: {f} !> {prev}");
        prev = f;
    }
}

#[test]
fn sweeps_are_bit_reproducible() {
    let pts: Vec<(usize, InPlaneField)> = (2..=10).map(|n| (n, InPlaneField::along_y(2.0))).collect();
    let a = frequency_sweep(D, ionring::consts::MASS_CA40_ION, &pts, &EquilibriumOptions::default()).unwrap();
    let b = frequency_sweep(D, ionring::consts::MASS_CA40_ION, &pts, &EquilibriumOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn barrier_is_even_in_the_field() {
    for (n, e) in [(10, 2.0), (6, 1.5), (4, 0.7), (13, 3.0)] {
        let a = rotational_barrier(&ring(n), &InPlaneField::along_y(e)).unwrap().joule;
        let b = rotational_barrier(&ring(n), &InPlaneField::along_y(-e)).unwrap().joule;
        assert!((a - b).abs() <= 1e-10 * a, "N={n} E={e}: {a} vs {b}");
    }
}

#[test]
fn barrier_grows_with_field_and_shrinks_with_ion_number() {
    let fields: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
    let mut table = vec![];
    for n in 2..=15 {
        let mut prev = 0.0;
        let mut row = vec![];
        for &e in &fields {
            let v = if e == 0.0 {
                barrier_profile(&ring(n), &InPlaneField::ZERO, &BarrierOptions::default()).unwrap().barrier
            } else {
                rotational_barrier(&ring(n), &InPlaneField::along_y(e)).unwrap().joule
            };
            assert!(v >= prev * (1.0 - 1e-9), "N={n} E={e}: {v} < {prev}");
            prev = v;
            row.push(v);
        }
        table.push(row);
    }
    // rows are N = 2..=15; check 5..=15 at every non-zero field
    for j in 1..fields.len() {
        for n in 5..15 {
            let (a, b) = (table[n - 2][j], table[n - 1][j]);
            assert!(b <= a * (1.0 + 1e-9), "E={}: V_B(N={}) = {b} > V_B(N={n}) = {a}", fields[j], n + 1);
        }
    }
}

#[test]
fn barrier_converges_with_resolution() {
    for (n, e) in [(10, 2.0), (10, 1.9), (6, 1.5), (3, 1.0), (15, 3.0)] {
        let coarse = rotational_barrier(&ring(n), &InPlaneField::along_y(e)).unwrap().joule;
        let fine = rotational_barrier_with(&ring(n), &InPlaneField::along_y(e), &BarrierOptions { resolution: 401, ..Default::default() })
            .unwrap()
            .joule;
        assert!((coarse - fine).abs() <= 0.005 * fine, "N={n} E={e}: {coarse} vs {fine}");
    }
}

#[test]
fn profile_structure() {
    for (n, e) in [(10, -2.0), (10, 1.9), (5, 1.0), (8, -3.5)] {
        let r = ring(n);
        let p = barrier_profile(&r, &InPlaneField::along_y(e), &BarrierOptions::default()).unwrap();
        assert!(p.is_complete());
        let (first, last) = (p.energies[0], *p.energies.last().unwrap());
        assert!((first - last).abs() <= 1e-10 * first.abs(), "endpoint energies {first} {last}");
        let a = &p.configurations[0];
        let c = p.configurations.last().unwrap();
        assert!(set_distance(a, c) <= 1e-6, "C is not a one-site advance of A");
        // the ions moved by one site, not zero
        let shift = p.collective_shift.last().unwrap().abs();
        assert!((shift - TAU / n as f64).abs() < 1e-6);
        assert!(p.max_index > 0 && p.max_index < p.len() - 1);
        let tol = BarrierOptions::default().equilibrium.tolerance;
        for g in &p.reduced_gradient[1..p.len() - 1] {
            assert!(*g <= tol, "reduced gradient {g}");
        }
    }
}

#[test]
fn threshold_self_consistency() {
    let r = ring(10);
    let th = delocalization_threshold_field(&r, 3e-3, &BarrierOptions::default()).unwrap();
    assert!(th.bracket.1 - th.bracket.0 <= THRESHOLD_TOLERANCE);
    let check = rotational_barrier(&r, &InPlaneField::along_y(th.field)).unwrap().millikelvin;
    assert!((check - 3.0).abs() <= 0.02 * 3.0, "{check} mK at {} V/m", th.field);
    // colder means a lower threshold, reaching the lower bracket as T -> 0
    let mut prev = th.field;
    for t in [1e-3, 1e-4, 1e-5] {
        let f = delocalization_threshold_field(&r, t, &BarrierOptions::default()).unwrap().field;
        assert!(f <= prev, "T={t}: {f} > {prev}");
        prev = f;
    }
    let cold = delocalization_threshold_field(&ring(3), 1e-9, &BarrierOptions::default()).unwrap();
    assert_eq!(cold.bracket.0, 0.0);
    assert!(cold.field <= THRESHOLD_TOLERANCE);
}
