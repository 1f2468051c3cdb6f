//! Minimum-energy crystal configurations.
//!
//! Ring equilibria are found in gap coordinates: the angle of one anchor ion plus the
//! positive gaps to each following ion. Ions therefore keep their cyclic order and the
//! Coulomb singularity is never crossed. At zero field the anchor is pinned at 0, which
//! removes the rigid-rotation zero mode.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::minimize::{minimize, MinimizeOptions, Objective};
use crate::model::{
    planar_polar, ring_energy_raw, ring_gradient_raw, ring_hessian_raw,
    CrystalState1D, CrystalState2D, InPlaneField, RingSpec, COINCIDENCE_EPS,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumOptions {
    /// Convergence threshold on the gradient norm (J/rad). Planar runs use `r0 |grad_(r,s) V|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub multistart: usize,
    pub seed: u64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-33,
            max_iterations: 2000,
            multistart: 4,
            seed: 0,
        }
    }
}

impl EquilibriumOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.multistart == 0 {
            return Err(Error::InvalidInput("multistart count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumResult<S> {
    pub state: S,
    pub energy: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Zig-zag verdict; only set by planar searches.
    pub zigzag: Option<bool>,
}

// ---------------------------------------------------------------------------
// Gap chart for the ring model.

/// Ring energy expressed in gap coordinates, in units of the Coulomb scale.
pub(crate) struct GapChart<'a> {
    pub ring: &'a RingSpec,
    pub field: &'a InPlaneField,
    /// Fixed anchor angle, or `None` when the anchor is a free variable.
    pub anchor: Option<f64>,
    /// Leave the anchor ion out of the stationarity measure (it carries a constraint force).
    pub exclude_anchor: bool,
}

impl GapChart<'_> {
    fn offset(&self) -> usize {
        usize::from(self.anchor.is_none())
    }

    pub fn dim(&self) -> usize {
        self.ring.ions - 1 + self.offset()
    }

    /// Coordinates of angles given in cyclic order starting at the anchor ion.
    pub fn encode(&self, cyclic: &[f64]) -> DVector<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.anchor.is_none() {
            x.push(cyclic[0]);
        }
        for w in cyclic.windows(2) {
            x.push((w[1] - w[0]).rem_euclid(TAU));
        }
        DVector::from_vec(x)
    }

    /// Angles in cyclic order, or `None` when a gap collapses.
    pub fn decode(&self, x: &DVector<f64>) -> Option<Vec<f64>> {
        let n = self.ring.ions;
        let start = self.anchor.unwrap_or_else(|| x[0]);
        let mut out = Vec::with_capacity(n);
        out.push(start);
        let mut total = 0.0;
        for k in 0..n - 1 {
            let g = x[self.offset() + k];
            if !(g > COINCIDENCE_EPS) {
                return None;
            }
            total += g;
            out.push(start + total);
        }
        if n > 1 && !(TAU - total > COINCIDENCE_EPS) {
            return None;
        }
        Some(out)
    }

    fn pull_back(&self, grad: &[f64]) -> DVector<f64> {
        let n = grad.len();
        let mut out = DVector::zeros(self.dim());
        // suffix sums: d/dg_j = sum_{k >= j} dV/dtheta_k
        let mut acc = 0.0;
        for k in (1..n).rev() {
            acc += grad[k];
            out[self.offset() + k - 1] = acc;
        }
        if self.anchor.is_none() {
            out[0] = acc + grad[0];
        }
        out
    }
}

impl Objective for GapChart<'_> {
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let a = self.decode(x)?;
        Some(ring_energy_raw(&a, self.ring, self.field) / self.ring.coulomb_scale())
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let a = self.decode(x).expect("gradient at infeasible point");
        let g = ring_gradient_raw(&a, self.ring, self.field);
        self.pull_back(&g) / self.ring.coulomb_scale()
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let a = self.decode(x).expect("hessian at infeasible point");
        let h = ring_hessian_raw(&a, self.ring, self.field);
        let n = a.len();
        let m = self.dim();
        // Jacobian d theta / d x.
        let mut jac = DMatrix::zeros(n, m);
        for k in 0..n {
            if self.anchor.is_none() {
                jac[(k, 0)] = 1.0;
            }
            for j in 1..=k {
                jac[(k, self.offset() + j - 1)] = 1.0;
            }
        }
        jac.transpose() * h * jac / self.ring.coulomb_scale()
    }

    fn stationarity(&self, x: &DVector<f64>, _g: &DVector<f64>) -> f64 {
        let a = self.decode(x).expect("stationarity at infeasible point");
        let g = ring_gradient_raw(&a, self.ring, self.field);
        let skip = usize::from(self.exclude_anchor);
        g[skip..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sorted_state(angles: &[f64]) -> CrystalState1D {
    CrystalState1D::from_raw(angles.to_vec()).sorted()
}

/// Initial guesses: a uniform ring symmetric about the field axis, then seeded rotations with jitter.
fn starting_points(ring: &RingSpec, field: &InPlaneField, opts: &EquilibriumOptions) -> Vec<Vec<f64>> {
    let n = ring.ions;
    let spacing = TAU / n as f64;
    let gauge = field.is_zero();
    let base = if gauge { 0.0 } else { field.favored_angle() + 0.5 * spacing };
    let mut starts = vec![(0..n).map(|k| base + spacing * k as f64).collect::<Vec<_>>()];
    for s in 1..opts.multistart {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9E37_79B9).wrapping_add(s as u64));
        let offset = if gauge { 0.0 } else { rng.random::<f64>() * TAU };
        let pts = (0..n)
            .map(|k| {
                let jitter = if gauge && k == 0 {
                    0.0
                } else {
                    (rng.random::<f64>() - 0.5) * 0.6 * spacing
                };
                offset + spacing * k as f64 + jitter
            })
            .collect();
        starts.push(pts);
    }
    starts
}

/// Lowest-energy equilibrium of ions on the ring.
pub fn find_equilibrium(
    ring: &RingSpec,
    field: &InPlaneField,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult<CrystalState1D>> {
    opts.validate()?;
    let starts = starting_points(ring, field, opts);
    let chart = GapChart {
        ring,
        field,
        anchor: field.is_zero().then_some(0.0),
        exclude_anchor: false,
    };
    let mopts = MinimizeOptions {
        tolerance: opts.tolerance,
        max_iterations: opts.max_iterations,
    };
    let mut best: Option<EquilibriumResult<CrystalState1D>> = None;
    for start in &starts {
        let x0 = chart.encode(start);
        let m = minimize(&chart, x0, &mopts);
        let Some(angles) = chart.decode(&m.x) else { continue };
        let energy = ring_energy_raw(&angles, ring, field);
        let gradient_norm = norm(&ring_gradient_raw(&angles, ring, field));
        let cand = EquilibriumResult {
            state: sorted_state(&angles),
            energy,
            gradient_norm,
            converged: m.converged && gradient_norm <= opts.tolerance,
            iterations: m.iterations,
            zigzag: None,
        };
        let better = match &best {
            None => true,
            Some(b) => match (cand.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => cand.energy < b.energy,
            },
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NotConverged {
        iterations: opts.max_iterations,
        gradient_norm: f64::INFINITY,
    })
}

// ---------------------------------------------------------------------------
// Planar model.

/// Planar energy over `(r_i / r0, theta_i)` in units of the Coulomb scale.
pub(crate) struct PlanarChart<'a> {
    pub ring: &'a RingSpec,
    pub field: &'a InPlaneField,
    pub radial_omega: f64,
    pub r0: f64,
    /// Fixed angle of ion 0: the zero-field gauge, or the probe angle of a barrier scan.
    pub gauge: Option<f64>,
}

impl PlanarChart<'_> {
    fn n(&self) -> usize {
        self.ring.ions
    }

    pub fn encode(&self, radii: &[f64], angles: &[f64]) -> DVector<f64> {
        let mut x: Vec<f64> = radii.iter().map(|r| r / self.r0).collect();
        let skip = usize::from(self.gauge.is_some());
        x.extend_from_slice(&angles[skip..]);
        DVector::from_vec(x)
    }

    pub fn decode(&self, x: &DVector<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let radii: Vec<f64> = (0..n).map(|i| x[i] * self.r0).collect();
        if radii.iter().any(|r| !(*r > 0.0)) {
            return None;
        }
        let mut angles = Vec::with_capacity(n);
        if let Some(g) = self.gauge {
            angles.push(g);
        }
        angles.extend(x.iter().skip(n).copied());
        let pts: Vec<(f64, f64)> = radii
            .iter()
            .zip(&angles)
            .map(|(r, t)| (r * t.sin(), r * t.cos()))
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                if (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1) < COINCIDENCE_EPS * self.r0 {
                    return None;
                }
            }
        }
        Some((radii, angles))
    }

    fn project(&self, v: DVector<f64>) -> DVector<f64> {
        // Drop the gauge angle row and rescale radial rows to rho.
        let n = self.n();
        let skip = usize::from(self.gauge.is_some());
        let mut out = Vec::with_capacity(2 * n - skip);
        out.extend((0..n).map(|i| v[i] * self.r0));
        out.extend((n + skip..2 * n).map(|i| v[i]));
        DVector::from_vec(out)
    }
}

impl Objective for PlanarChart<'_> {
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let (r, a) = self.decode(x)?;
        let d = planar_polar(&r, &a, self.ring, self.field, self.radial_omega, self.r0, false);
        Some(d.energy / self.ring.coulomb_scale())
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (r, a) = self.decode(x).expect("gradient at infeasible point");
        let d = planar_polar(&r, &a, self.ring, self.field, self.radial_omega, self.r0, false);
        self.project(d.gradient) / self.ring.coulomb_scale()
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (r, a) = self.decode(x).expect("hessian at infeasible point");
        let d = planar_polar(&r, &a, self.ring, self.field, self.radial_omega, self.r0, true);
        let h = d.hessian.expect("requested");
        let n = self.n();
        let skip = usize::from(self.gauge.is_some());
        let keep: Vec<usize> = (0..n).chain(n + skip..2 * n).collect();
        let m = keep.len();
        let mut out = DMatrix::zeros(m, m);
        for (p, &i) in keep.iter().enumerate() {
            for (q, &j) in keep.iter().enumerate() {
                let si = if i < n { self.r0 } else { 1.0 };
                let sj = if j < n { self.r0 } else { 1.0 };
                out[(p, q)] = h[(i, j)] * si * sj;
            }
        }
        out / self.ring.coulomb_scale()
    }

    fn stationarity(&self, _x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        g.norm() * self.ring.coulomb_scale()
    }
}

/// Second differences of the radii around the ring in angular order (m), after removing
/// the mean radius and the dipole `cos`/`sin` terms fitted over the ion angles. A uniform
/// field squeezes the ring into a dipole shape; only what is left can be a zig-zag.
fn radial_curvature(state: &CrystalState2D) -> Vec<f64> {
    let n = state.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| state.angles()[a].total_cmp(&state.angles()[b]));
    let basis = DMatrix::from_fn(n, 3, |i, j| {
        let t = state.angles()[idx[i]];
        [1.0, t.cos(), t.sin()][j]
    });
    let raw = DVector::from_iterator(n, idx.iter().map(|&i| state.radii()[i] - state.r0));
    let r = match basis.clone().svd(true, true).solve(&raw, 1e-12) {
        Ok(c) => raw - basis * c,
        Err(_) => raw,
    };
    (0..n)
        .map(|k| r[k] - 0.5 * (r[(k + n - 1) % n] + r[(k + 1) % n]))
        .collect()
}

/// Relative amplitude above which a radial modulation counts as zig-zag.
pub const ZIGZAG_AMPLITUDE: f64 = 5e-3;
/// Smallest second difference (relative to r0) taking part in an alternating run.
const ZIGZAG_SIGNIFICANT: f64 = 1e-3;

/// Zig-zag test: the radial profile alternates in sign along at least three consecutive ions.
///
/// Alternation is judged on the local second difference `r_k - (r_{k-1} + r_{k+1})/2`
/// rather than on `r_k - r0`, because Coulomb pressure expands the whole ring and
/// shifts every radius outward by a common amount.
pub fn is_zigzag(state: &CrystalState2D) -> bool {
    let n = state.len();
    if n < 3 {
        return false;
    }
    let curv: Vec<f64> = radial_curvature(state).iter().map(|c| c / state.r0).collect();
    if curv.iter().fold(0.0f64, |m, c| m.max(c.abs())) <= ZIGZAG_AMPLITUDE {
        return false;
    }
    let sig = |c: f64| if c.abs() > ZIGZAG_SIGNIFICANT { c.signum() as i8 } else { 0 };
    let signs: Vec<i8> = curv.iter().map(|&c| sig(c)).collect();
    let mut run = 1;
    for k in 1..2 * n {
        let (prev, cur) = (signs[(k - 1) % n], signs[k % n]);
        if prev != 0 && cur != 0 && prev != cur {
            run += 1;
            if run >= 3 {
                return true;
            }
        } else {
            run = 1;
        }
    }
    false
}

/// Lowest-energy equilibrium in the plane with harmonic radial confinement at `r0 = d/2`.
/// Gradient tolerance for planar charts. Radii are stored relative to the ring radius,
/// so rounding limits the radial gradient to about `eps m w_r^2 r0^2`; a stiffer trap
/// cannot be resolved below that.
pub(crate) fn planar_tolerance(tolerance: f64, ring: &RingSpec, radial_omega: f64) -> f64 {
    let stiffness = ring.ion_mass * radial_omega * radial_omega * ring.radius() * ring.radius();
    tolerance.max(64.0 * f64::EPSILON * stiffness)
}

pub fn find_equilibrium_planar(
    ring: &RingSpec,
    field: &InPlaneField,
    radial_omega: f64,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult<CrystalState2D>> {
    find_equilibrium_planar_from(ring, field, radial_omega, opts, None)
}

fn find_equilibrium_planar_from(
    ring: &RingSpec,
    field: &InPlaneField,
    radial_omega: f64,
    opts: &EquilibriumOptions,
    breathing: Option<f64>,
) -> Result<EquilibriumResult<CrystalState2D>> {
    opts.validate()?;
    if !(radial_omega > 0.0 && radial_omega.is_finite()) {
        return Err(Error::InvalidInput(format!("radial frequency must be positive, got {radial_omega}")));
    }
    let n = ring.ions;
    let r0 = ring.radius();
    let base = find_equilibrium(ring, field, opts)?;
    let angles = base.state.angles().to_vec();
    let gauge = field.is_zero().then(|| angles[0]);
    let chart = PlanarChart { ring, field, radial_omega, r0, gauge };
    let tolerance = planar_tolerance(opts.tolerance, ring, radial_omega);
    let mopts = MinimizeOptions {
        tolerance,
        max_iterations: opts.max_iterations,
    };
    let expand = breathing.unwrap_or(1.0);

    let mut starts = Vec::with_capacity(opts.multistart);
    let alt: Vec<f64> = (0..n)
        .map(|i| r0 * (expand + if i % 2 == 0 { 1e-3 } else { -1e-3 }))
        .collect();
    starts.push((alt, angles.clone()));
    for s in 1..opts.multistart {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x85EB_CA6B).wrapping_add(s as u64));
        let spacing = TAU / n as f64;
        let radii = (0..n).map(|_| r0 * (expand + (rng.random::<f64>() - 0.5) * 4e-3)).collect();
        let ang = angles
            .iter()
            .enumerate()
            .map(|(k, a)| if gauge.is_some() && k == 0 { *a } else { a + (rng.random::<f64>() - 0.5) * 0.1 * spacing })
            .collect();
        starts.push((radii, ang));
    }

    let mut best: Option<EquilibriumResult<CrystalState2D>> = None;
    for (radii, ang) in &starts {
        let m = minimize(&chart, chart.encode(radii, ang), &mopts);
        let Some((r, a)) = chart.decode(&m.x) else { continue };
        let d = planar_polar(&r, &a, ring, field, radial_omega, r0, false);
        let mut g = d.gradient.clone();
        for i in 0..n {
            g[i] *= r0;
        }
        let gradient_norm = g.norm();
        let state = CrystalState2D::from_raw(r, a, radial_omega, r0);
        let zig = is_zigzag(&state);
        let cand = EquilibriumResult {
            state,
            energy: d.energy,
            gradient_norm,
            converged: m.converged && gradient_norm <= tolerance,
            iterations: m.iterations,
            zigzag: Some(zig),
        };
        let better = match &best {
            None => true,
            Some(b) => match (cand.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => cand.energy < b.energy,
            },
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NotConverged {
        iterations: opts.max_iterations,
        gradient_norm: f64::INFINITY,
    })
}

/// One row of a zig-zag scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ZigzagPoint {
    pub ions: usize,
    pub zigzag: bool,
    /// Largest |second difference of radius| relative to r0.
    pub modulation: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZigzagScan {
    /// First ion number whose pinned equilibrium is zig-zag; `None` up to the scan limit.
    pub critical: Option<usize>,
    pub points: Vec<ZigzagPoint>,
}

/// Scans N = 2..=`max_ions` and reports the first zig-zag equilibrium.
pub fn zigzag_critical_number(
    ring: &RingSpec,
    field: &InPlaneField,
    radial_omega: f64,
    max_ions: usize,
    opts: &EquilibriumOptions,
) -> Result<ZigzagScan> {
    if field.is_zero() {
        return Err(Error::InvalidInput("zig-zag scan needs a pinning field".into()));
    }
    let mut points = Vec::new();
    let mut breathing = None;
    for n in 2..=max_ions {
        let r = ring.with_ions(n)?;
        let res = find_equilibrium_planar_from(&r, field, radial_omega, opts, breathing)
            .map_err(|e| Error::ScanFailed { ions: n, source: Box::new(e) })?;
        if !res.converged {
            return Err(Error::ScanFailed {
                ions: n,
                source: Box::new(Error::NotConverged {
                    iterations: res.iterations,
                    gradient_norm: res.gradient_norm,
                }),
            });
        }
        // Warm start the next ion number from this ring's mean expansion.
        let mean_r = res.state.radii().iter().sum::<f64>() / n as f64;
        breathing = Some(mean_r / r.radius());
        let modulation = radial_curvature(&res.state)
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
            / r.radius();
        let zig = res.zigzag.unwrap_or(false);
        points.push(ZigzagPoint { ions: n, zigzag: zig, modulation, energy: res.energy });
        if zig {
            return Ok(ZigzagScan { critical: Some(n), points });
        }
    }
    Ok(ZigzagScan { critical: None, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::{DEFAULT_DIAMETER, DEFAULT_RADIAL_OMEGA};
    use std::f64::consts::PI;

    fn ring(n: usize) -> RingSpec {
        RingSpec::calcium(DEFAULT_DIAMETER, n).unwrap()
    }

    #[test]
    fn two_ions_antipodal() {
        let res = find_equilibrium(&ring(2), &InPlaneField::ZERO, &EquilibriumOptions::default()).unwrap();
        assert!(res.converged);
        let a = res.state.angles();
        assert!(((a[1] - a[0]) - PI).abs() < 1e-9);
        assert_eq!(a[0], 0.0);
    }

    #[test]
    fn uniform_ring_at_zero_field() {
        for n in 1..=12 {
            let res = find_equilibrium(&ring(n), &InPlaneField::ZERO, &EquilibriumOptions::default()).unwrap();
            assert!(res.converged, "N={n}");
            for g in res.state.gaps() {
                assert!((g - TAU / n as f64).abs() < 1e-8, "N={n} gap {g}");
            }
        }
    }

    #[test]
    fn single_ion_sits_on_favored_pole() {
        let f = InPlaneField::new(1.0, -1.0).unwrap();
        let res = find_equilibrium(&ring(1), &f, &EquilibriumOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.state.angles()[0] - f.favored_angle()).abs() < 1e-9);
    }

    #[test]
    fn zero_multistart_rejected() {
        let opts = EquilibriumOptions { multistart: 0, ..Default::default() };
        assert!(find_equilibrium(&ring(3), &InPlaneField::ZERO, &opts).is_err());
        let opts = EquilibriumOptions { tolerance: 0.0, ..Default::default() };
        assert!(find_equilibrium(&ring(3), &InPlaneField::ZERO, &opts).is_err());
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let opts = EquilibriumOptions { max_iterations: 1, multistart: 1, ..Default::default() };
        let res = find_equilibrium(&ring(8), &InPlaneField::along_y(2.0), &opts).unwrap();
        assert!(!res.converged);
    }

    #[test]
    fn gap_chart_roundtrip() {
        let r = ring(4);
        let f = InPlaneField::along_y(1.0);
        let chart = GapChart { ring: &r, field: &f, anchor: None, exclude_anchor: false };
        let a = vec![0.3, 1.0, 2.5, 4.0];
        let x = chart.encode(&a);
        let back = chart.decode(&x).unwrap();
        for (p, q) in a.iter().zip(&back) {
            assert!((p - q).abs() < 1e-15);
        }
        let mut bad = x.clone();
        bad[2] = -0.1;
        assert!(chart.decode(&bad).is_none());
    }

    #[test]
    fn zigzag_flags_alternation_only() {
        let r0 = 45e-6;
        let w = DEFAULT_RADIAL_OMEGA;
        let angles: Vec<f64> = (0..8).map(|k| k as f64 * TAU / 8.0).collect();
        // uniform expansion is not zig-zag
        let s = CrystalState2D::new(vec![1.05 * r0; 8], angles.clone(), w, r0).unwrap();
        assert!(!is_zigzag(&s));
        let alt = (0..8).map(|k| r0 * (1.0 + if k % 2 == 0 { 0.02 } else { -0.02 })).collect();
        let s = CrystalState2D::new(alt, angles.clone(), w, r0).unwrap();
        assert!(is_zigzag(&s));
        // below the amplitude threshold
        let alt = (0..8).map(|k| r0 * (1.0 + if k % 2 == 0 { 1e-4 } else { -1e-4 })).collect();
        let s = CrystalState2D::new(alt, angles, w, r0).unwrap();
        assert!(!is_zigzag(&s));
    }

    #[test]
    fn planar_zero_field_ring_stays_uniform() {
        let r = ring(4);
        let res = find_equilibrium_planar(&r, &InPlaneField::ZERO, DEFAULT_RADIAL_OMEGA, &EquilibriumOptions::default())
            .unwrap();
        assert!(res.converged);
        let radii = res.state.radii();
        for x in radii {
            assert!((x - radii[0]).abs() < 1e-10, "{radii:?}");
        }
        assert_eq!(res.zigzag, Some(false));
    }

    #[test]
    fn zigzag_scan_requires_field() {
        assert!(zigzag_critical_number(&ring(2), &InPlaneField::ZERO, DEFAULT_RADIAL_OMEGA, 5, &Default::default()).is_err());
    }
}
