//! Rotational energy barrier of a pinned ring crystal.
//!
//! The barrier is obtained from a constrained scan: one probe ion is stepped from its
//! equilibrium angle to the equilibrium angle of its neighbour while every other ion
//! relaxes to its constrained minimum. At the end of the scan the crystal has advanced
//! by exactly one lattice site, so the two end points are equivalent equilibria and
//! the maximum of the scanned energy is the barrier height.

use std::f64::consts::TAU;

use nalgebra::DVector;

use crate::consts::{joule_to_millikelvin, BOLTZMANN, DEFAULT_RADIAL_OMEGA};
use crate::equilibrium::{find_equilibrium, find_equilibrium_planar, planar_tolerance, EquilibriumOptions, GapChart, PlanarChart};
use crate::error::{Error, Result};
use crate::minimize::{minimize, MinimizeOptions};
use crate::model::{planar_polar, ring_energy_raw, ring_gradient_raw, wrap_pi, InPlaneField, RingSpec};

/// Default number of probe positions.
pub const DEFAULT_RESOLUTION: usize = 201;

/// How the non-probe ions relax during the scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relaxation {
    /// Ions confined to the ring.
    Ring,
    /// Ions free in the plane with harmonic radial confinement.
    Planar { radial_omega: f64 },
}

impl Relaxation {
    pub fn planar_default() -> Self {
        Relaxation::Planar { radial_omega: DEFAULT_RADIAL_OMEGA }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierOptions {
    pub resolution: usize,
    pub relaxation: Relaxation,
    pub equilibrium: EquilibriumOptions,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            relaxation: Relaxation::Ring,
            equilibrium: EquilibriumOptions::default(),
        }
    }
}

/// Energy along the probe-ion scan.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierProfile {
    pub ions: usize,
    pub field: InPlaneField,
    /// Probe angle at each scan point (rad, unwrapped, monotone along the scan).
    pub probe_angles: Vec<f64>,
    /// Constrained-minimum energy (J).
    pub energies: Vec<f64>,
    /// Gradient norm over the free coordinates at each point (J/rad).
    pub reduced_gradient: Vec<f64>,
    /// Angles in cyclic order with the probe first (rad, unwrapped).
    pub configurations: Vec<Vec<f64>>,
    /// Radii in the same order, for planar relaxation.
    pub radii: Option<Vec<Vec<f64>>>,
    /// Change of the mean ion angle relative to the first point (rad).
    pub collective_shift: Vec<f64>,
    /// `max V - min V` over the scanned points (J).
    pub barrier: f64,
    pub max_index: usize,
    pub min_index: usize,
    /// `None` when the scan reached its end point.
    pub failed_index: Option<usize>,
    /// Set when the scans started from the two end points disagree somewhere, i.e.
    /// the constrained minimum jumps between branches.
    pub hysteresis: bool,
    pub refined: bool,
    relaxation: Relaxation,
    tolerance: f64,
    /// Per point: `Some(true)` when taken from the scan started at C because it was lower,
    /// `None` where both scans agree.
    from_end: Vec<Option<bool>>,
}

impl BarrierProfile {
    pub fn barrier_millikelvin(&self) -> f64 {
        joule_to_millikelvin(self.barrier)
    }

    pub fn is_complete(&self) -> bool {
        self.failed_index.is_none()
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Position of the maximum as a fraction of the one-site advance of the mean angle.
    pub fn barrier_fraction(&self) -> f64 {
        let total = *self.collective_shift.last().unwrap_or(&0.0);
        if total == 0.0 {
            return 0.5;
        }
        (self.collective_shift[self.max_index] / total).clamp(0.0, 1.0)
    }

    fn recompute(&mut self) {
        let (mut imax, mut imin) = (0, 0);
        for (i, e) in self.energies.iter().enumerate() {
            if *e > self.energies[imax] {
                imax = i;
            }
            if *e < self.energies[imin] {
                imin = i;
            }
        }
        self.max_index = imax;
        self.min_index = imin;
        self.barrier = (self.energies[imax] - self.energies[imin]).max(0.0);
    }

    /// Refines the maximum and inserts the refined point into the profile. When the
    /// maximum sits where the scans from A and from C swap as the lower one, the crossing
    /// is located by bisection; otherwise the smooth maximum between the neighbouring
    /// grid points is found by golden-section search.
    pub fn refine_maximum(&mut self, ring: &RingSpec) -> Result<()> {
        let n = self.len();
        if n < 5 || self.refined {
            return Ok(());
        }
        let j = self.max_index;
        let swaps = |k: usize| matches!((self.from_end[k], self.from_end[k + 1]), (Some(a), Some(b)) if a != b);
        let switch = if j + 1 < n && swaps(j) {
            Some(j)
        } else if j > 0 && swaps(j - 1) {
            Some(j - 1)
        } else {
            None
        };
        let found = match switch {
            Some(k) => self.branch_crossing(ring, k),
            None => self.smooth_maximum(ring),
        };
        let Some((probe, pt, from_end)) = found else { return Ok(()) };
        // Insert keeping the scan order.
        let forward = self.probe_angles[n - 1] > self.probe_angles[0];
        let pos = self
            .probe_angles
            .iter()
            .position(|&p| if forward { p > probe } else { p < probe })
            .unwrap_or(n);
        let shift = mean(&pt.angles) - mean(&self.configurations[0]);
        self.probe_angles.insert(pos, probe);
        self.energies.insert(pos, pt.energy);
        self.reduced_gradient.insert(pos, pt.reduced_gradient);
        self.configurations.insert(pos, pt.angles);
        if let (Some(r), Some(pr)) = (self.radii.as_mut(), pt.radii) {
            r.insert(pos, pr);
        }
        self.collective_shift.insert(pos, shift);
        self.from_end.insert(pos, from_end);
        self.refined = true;
        self.recompute();
        Ok(())
    }

    /// Constrained minimum at `probe`, warm-started from point `k`.
    fn solve_from(&self, ring: &RingSpec, probe: f64, k: usize) -> Option<ScanPoint> {
        let warm = &self.configurations[k];
        let pt = match self.relaxation {
            Relaxation::Ring => solve_ring_point(ring, &self.field, probe, warm, self.tolerance),
            Relaxation::Planar { radial_omega } => solve_planar_point(
                ring,
                &self.field,
                radial_omega,
                probe,
                warm,
                &self.radii.as_ref().expect("planar radii")[k],
                self.tolerance,
            ),
        };
        pt.filter(|p| p.converged)
    }

    /// Golden-section maximization of the constrained energy over the grid interval
    /// around the maximum, warm-started from the grid point.
    fn smooth_maximum(&self, ring: &RingSpec) -> Option<(f64, ScanPoint, Option<bool>)> {
        let n = self.len();
        let j = self.max_index;
        if j == 0 || j == n - 1 {
            return None;
        }
        let (mut a, mut b) = (self.probe_angles[j - 1], self.probe_angles[j + 1]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let eval = |p: f64| self.solve_from(ring, p, j);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let mut fc = eval(c)?;
        let mut fd = eval(d)?;
        for _ in 0..80 {
            if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
                break;
            }
            if fc.energy > fd.energy {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = eval(d)?;
            }
        }
        let (p, pt) = if fc.energy > fd.energy { (c, fc) } else { (d, fd) };
        (pt.energy >= self.energies[j]).then_some((p, pt, self.from_end[j]))
    }

    /// Probe angle between points `k` and `k + 1` where the two continuation branches
    /// have equal energy.
    fn branch_crossing(&self, ring: &RingSpec, k: usize) -> Option<(f64, ScanPoint, Option<bool>)> {
        // Warm starts on each side of the switch belong to opposite branches.
        let (lo_end, hi_end) = (self.from_end[k], self.from_end[k + 1]);
        let diff = |p: f64| -> Option<(f64, ScanPoint, ScanPoint)> {
            let a = self.solve_from(ring, p, k)?;
            let b = self.solve_from(ring, p, k + 1)?;
            Some((a.energy - b.energy, a, b))
        };
        // At k the k-side branch is lower (diff <= 0); at k + 1 it is higher.
        let (mut lo, mut hi) = (self.probe_angles[k], self.probe_angles[k + 1]);
        let mut best = None;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let (d, a, b) = diff(mid)?;
            best = Some(if d <= 0.0 { (mid, a, lo_end) } else { (mid, b, hi_end) });
            if d <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct ScanPoint {
    angles: Vec<f64>,
    radii: Option<Vec<f64>>,
    energy: f64,
    reduced_gradient: f64,
    converged: bool,
}

fn solve_ring_point(ring: &RingSpec, field: &InPlaneField, probe: f64, warm: &[f64], tol: f64) -> Option<ScanPoint> {
    let chart = GapChart { ring, field, anchor: Some(probe), exclude_anchor: true };
    let mut start = warm.to_vec();
    start[0] = probe;
    let x0 = feasible_start(&chart, &start, warm[0], probe)?;
    let m = minimize(&chart, x0, &MinimizeOptions { tolerance: tol, max_iterations: 2000 });
    let angles = chart.decode(&m.x)?;
    let g = ring_gradient_raw(&angles, ring, field);
    let reduced = g[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    Some(ScanPoint {
        energy: ring_energy_raw(&angles, ring, field),
        angles,
        radii: None,
        reduced_gradient: reduced,
        converged: m.converged,
    })
}

/// Gap coordinates for a warm start; falls back to rotating the free ions with the probe.
fn feasible_start(chart: &GapChart, start: &[f64], old_probe: f64, probe: f64) -> Option<DVector<f64>> {
    let ok = |a: &[f64]| {
        let n = a.len();
        a.windows(2).all(|w| w[1] - w[0] > 1e-6) && (n < 2 || a[0] + TAU - a[n - 1] > 1e-6)
    };
    if ok(start) {
        return Some(chart.encode(start));
    }
    let shift = probe - old_probe;
    let mut moved: Vec<f64> = start.iter().map(|a| a + shift).collect();
    moved[0] = probe;
    ok(&moved).then(|| chart.encode(&moved))
}

fn solve_planar_point(
    ring: &RingSpec,
    field: &InPlaneField,
    radial_omega: f64,
    probe: f64,
    warm_angles: &[f64],
    warm_radii: &[f64],
    tol: f64,
) -> Option<ScanPoint> {
    let chart = PlanarChart { ring, field, radial_omega, r0: ring.radius(), gauge: Some(probe) };
    let tol = planar_tolerance(tol, ring, radial_omega);
    let x0 = chart.encode(warm_radii, warm_angles);
    chart.decode(&x0)?;
    let m = minimize(&chart, x0, &MinimizeOptions { tolerance: tol, max_iterations: 2000 });
    let (radii, angles) = chart.decode(&m.x)?;
    let d = planar_polar(&radii, &angles, ring, field, radial_omega, ring.radius(), false);
    let n = ring.ions;
    // free coordinates: all radii (scaled to J/rad-equivalent) and angles of ions 1..
    let reduced = (0..n)
        .map(|i| (d.gradient[i] * ring.radius()).powi(2))
        .chain((n + 1..2 * n).map(|i| d.gradient[i].powi(2)))
        .sum::<f64>()
        .sqrt();
    Some(ScanPoint {
        energy: d.energy,
        angles,
        radii: Some(radii),
        reduced_gradient: reduced,
        converged: m.converged,
    })
}

/// Index of the probe ion and the scan direction (+1 or -1) for angles sorted ascending.
fn choose_probe(sorted: &[f64], field: &InPlaneField) -> (usize, i32) {
    let pole = field.favored_angle();
    let mut best = 0;
    let mut best_rel = wrap_pi(sorted[0] - pole);
    for (k, a) in sorted.iter().enumerate().skip(1) {
        let rel = wrap_pi(a - pole);
        let (d, bd) = (rel.abs(), best_rel.abs());
        if d > bd + 1e-9 || ((d - bd).abs() <= 1e-9 && rel < best_rel) {
            best = k;
            best_rel = rel;
        }
    }
    // Move toward the favoured pole.
    (best, if best_rel < 0.0 { 1 } else { -1 })
}

/// Probe angle, cyclic order starting at the probe (unwrapped), and the scan end angle.
fn scan_setup(sorted: &[f64], field: &InPlaneField) -> (Vec<f64>, f64) {
    let n = sorted.len();
    let (k, dir) = choose_probe(sorted, field);
    let p = sorted[k];
    let cyclic: Vec<f64> = (0..n)
        .map(|j| {
            let a = sorted[(k + j) % n];
            if a < p { a + TAU } else { a }
        })
        .collect();
    let end = if dir > 0 { cyclic[1] } else { cyclic[n - 1] - TAU };
    (cyclic, end)
}

/// Constrained probe-ion scan between two equivalent equilibria.
pub fn barrier_profile(ring: &RingSpec, field: &InPlaneField, opts: &BarrierOptions) -> Result<BarrierProfile> {
    if ring.ions < 2 {
        return Err(Error::InvalidInput("barrier scan needs at least two ions".into()));
    }
    if opts.resolution < 3 {
        return Err(Error::InvalidInput(format!("barrier resolution must be at least 3, got {}", opts.resolution)));
    }
    let tol = opts.equilibrium.tolerance;
    let (start_angles, start_radii, end) = match opts.relaxation {
        Relaxation::Ring => {
            let eq = find_equilibrium(ring, field, &opts.equilibrium)?;
            if !eq.converged {
                return Err(Error::NotConverged { iterations: eq.iterations, gradient_norm: eq.gradient_norm });
            }
            let (cyclic, end) = scan_setup(eq.state.angles(), field);
            (cyclic, None, end)
        }
        Relaxation::Planar { radial_omega } => {
            let eq = find_equilibrium_planar(ring, field, radial_omega, &opts.equilibrium)?;
            if !eq.converged {
                return Err(Error::NotConverged { iterations: eq.iterations, gradient_norm: eq.gradient_norm });
            }
            let mut idx: Vec<usize> = (0..ring.ions).collect();
            let ang = eq.state.angles();
            idx.sort_by(|&a, &b| ang[a].total_cmp(&ang[b]));
            let sorted: Vec<f64> = idx.iter().map(|&i| ang[i]).collect();
            let (k, _) = choose_probe(&sorted, field);
            let (cyclic, end) = scan_setup(&sorted, field);
            let radii: Vec<f64> = (0..ring.ions).map(|j| eq.state.radii()[idx[(k + j) % ring.ions]]).collect();
            (cyclic, Some(radii), end)
        }
    };

    let m = opts.resolution;
    let p0 = start_angles[0];
    let dir = if end > p0 { 1 } else { -1 };
    let probes: Vec<f64> = (0..m).map(|i| p0 + (end - p0) * i as f64 / (m - 1) as f64).collect();
    let (c_angles, c_radii) = advance_site(&start_angles, start_radii.as_deref(), dir);
    // The path from A can end on a fold when the crystal is strongly pinned, so the scan
    // also runs back from C and keeps the lower constrained minimum at each probe angle.
    let forward = run_branch(ring, field, opts, &probes, start_angles.clone(), start_radii.clone(), false);
    let backward = run_branch(ring, field, opts, &probes, c_angles, c_radii, true);

    let mut profile = BarrierProfile {
        ions: ring.ions,
        field: *field,
        probe_angles: Vec::with_capacity(m),
        energies: Vec::with_capacity(m),
        reduced_gradient: Vec::with_capacity(m),
        configurations: Vec::with_capacity(m),
        radii: start_radii.as_ref().map(|_| Vec::with_capacity(m)),
        collective_shift: Vec::with_capacity(m),
        barrier: 0.0,
        max_index: 0,
        min_index: 0,
        failed_index: None,
        hysteresis: false,
        refined: false,
        relaxation: opts.relaxation,
        tolerance: tol,
        from_end: Vec::with_capacity(m),
    };
    let mean0 = mean(&start_angles);
    for (i, (f, b)) in forward.into_iter().zip(backward).enumerate() {
        let (pt, from_end) = match (f, b) {
            (Some(f), Some(b)) => {
                let differ = (f.energy - b.energy).abs() > 1e-10 * f.energy.abs().max(b.energy.abs());
                profile.hysteresis |= differ;
                let end = b.energy < f.energy;
                (if end { b } else { f }, differ.then_some(end))
            }
            (Some(p), None) => (p, Some(false)),
            (None, Some(p)) => (p, Some(true)),
            (None, None) => {
                profile.failed_index = Some(i);
                break;
            }
        };
        profile.from_end.push(from_end);
        profile.probe_angles.push(probes[i]);
        profile.energies.push(pt.energy);
        profile.reduced_gradient.push(pt.reduced_gradient);
        profile.collective_shift.push(mean(&pt.angles) - mean0);
        profile.configurations.push(pt.angles);
        if let (Some(r), Some(pr)) = (profile.radii.as_mut(), pt.radii) {
            r.push(pr);
        }
    }
    if !profile.energies.is_empty() {
        profile.recompute();
    }
    Ok(profile)
}

/// Configuration C: the start configuration advanced by one site in direction `dir`,
/// still listed probe first.
fn advance_site(angles: &[f64], radii: Option<&[f64]>, dir: i32) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = angles.len();
    let order: Vec<usize> = if dir > 0 { (1..=n).map(|j| j % n).collect() } else { (0..n).map(|j| (j + n - 1) % n).collect() };
    let a = order
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let wrap = if dir > 0 && j == n - 1 { TAU } else if dir < 0 && j == 0 { -TAU } else { 0.0 };
            angles[k] + wrap
        })
        .collect();
    (a, radii.map(|r| order.iter().map(|&k| r[k]).collect()))
}

/// Continuation over `probes` (in reverse when `reverse`), indexed like `probes`.
/// Entries after the first failure are `None`.
fn run_branch(
    ring: &RingSpec,
    field: &InPlaneField,
    opts: &BarrierOptions,
    probes: &[f64],
    mut warm: Vec<f64>,
    mut warm_r: Option<Vec<f64>>,
    reverse: bool,
) -> Vec<Option<ScanPoint>> {
    let tol = opts.equilibrium.tolerance;
    let m = probes.len();
    let mut out: Vec<Option<ScanPoint>> = (0..m).map(|_| None).collect();
    for step in 0..m {
        let i = if reverse { m - 1 - step } else { step };
        let pt = match opts.relaxation {
            Relaxation::Ring => solve_ring_point(ring, field, probes[i], &warm, tol),
            Relaxation::Planar { radial_omega } => {
                solve_planar_point(ring, field, radial_omega, probes[i], &warm, warm_r.as_deref().unwrap(), tol)
            }
        };
        let Some(pt) = pt.filter(|pt| pt.converged) else { break };
        warm.clone_from(&pt.angles);
        warm_r.clone_from(&pt.radii);
        out[i] = Some(pt);
    }
    out
}

/// Barrier height in joules and millikelvin, with the refined profile.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationalBarrier {
    pub joule: f64,
    pub millikelvin: f64,
    pub profile: BarrierProfile,
}

/// Barrier at the default resolution with the maximum refined.
pub fn rotational_barrier(ring: &RingSpec, field: &InPlaneField) -> Result<RotationalBarrier> {
    rotational_barrier_with(ring, field, &BarrierOptions::default())
}

pub fn rotational_barrier_with(ring: &RingSpec, field: &InPlaneField, opts: &BarrierOptions) -> Result<RotationalBarrier> {
    let mut profile = barrier_profile(ring, field, opts)?;
    if let Some(index) = profile.failed_index {
        return Err(Error::PartialProfile { index });
    }
    profile.refine_maximum(ring)?;
    Ok(RotationalBarrier {
        joule: profile.barrier,
        millikelvin: profile.barrier_millikelvin(),
        profile,
    })
}

/// Field at which the barrier equals the thermal energy.
#[derive(Clone, Debug, PartialEq)]
pub struct Threshold {
    /// Field magnitude (V/m).
    pub field: f64,
    /// Bracket left by the bisection (V/m).
    pub bracket: (f64, f64),
    /// Every `(|E|, V_B)` evaluated, sorted by field.
    pub evaluations: Vec<(f64, f64)>,
}

/// Bisection tolerance on the field (V/m).
pub const THRESHOLD_TOLERANCE: f64 = 0.01;

/// Smallest field magnitude where `V_B = k_B T`, with the field along +y.
pub fn delocalization_threshold_field(ring: &RingSpec, temperature: f64, opts: &BarrierOptions) -> Result<Threshold> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidInput(format!("temperature must be positive, got {temperature}")));
    }
    let target = BOLTZMANN * temperature;
    let mut evals: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let eval = |e: f64, evals: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = rotational_barrier_with(ring, &InPlaneField::along_y(e), opts)?.joule;
        evals.push((e, v));
        Ok(v)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut v_lo = 0.0;
    let mut v_hi = eval(hi, &mut evals)?;
    while v_hi < target {
        if hi > 1e4 {
            return Err(Error::InvalidInput(format!("barrier stays below k_B T up to {hi} V/m")));
        }
        lo = hi;
        v_lo = v_hi;
        hi *= 2.0;
        v_hi = eval(hi, &mut evals)?;
    }
    while hi - lo > THRESHOLD_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let v = eval(mid, &mut evals)?;
        if v >= target {
            hi = mid;
            v_hi = v;
        } else {
            lo = mid;
            v_lo = v;
        }
    }
    evals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = evals.iter().fold(0.0f64, |m, e| m.max(e.1));
    for w in evals.windows(2) {
        if w[1].1 < w[0].1 - 1e-6 * scale {
            return Err(Error::NonMonotoneBarrier { lower: w[0].0, upper: w[1].0, v_lower: w[0].1, v_upper: w[1].1 });
        }
    }
    // Linear interpolation inside the final bracket.
    let field = if v_hi > v_lo { lo + (hi - lo) * (target - v_lo) / (v_hi - v_lo) } else { lo };
    Ok(Threshold { field: field.clamp(lo, hi), bracket: (lo, hi), evaluations: evals })
}
