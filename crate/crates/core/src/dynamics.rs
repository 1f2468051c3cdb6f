//! Langevin dynamics of the ring crystal.
//!
//! Doppler cooling is modelled as linear friction plus white noise. The equations of
//! motion are integrated with the BAOAB splitting: half kick, half drift, exact
//! Ornstein-Uhlenbeck velocity update, half drift, half kick.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::barrier::BarrierProfile;
use crate::consts::{BOLTZMANN, DEFAULT_FRICTION, ELEMENTARY_CHARGE};
use crate::equilibrium::{find_equilibrium, find_equilibrium_planar, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::model::{CrystalState1D, InPlaneField, RingSpec};
use crate::modes::tangential_modes;

/// Timestep as a fraction of the fastest mode period when none is given.
pub const DEFAULT_STEP_FRACTION: f64 = 0.05;
/// Stability bound on `dt * omega_max`.
pub const MAX_STEP_FRACTION: f64 = 0.1;

/// Degrees of freedom of the simulated ions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constraint {
    /// Ions confined to the ring circle.
    Ring,
    /// Ions in the plane with harmonic radial confinement about the ring radius.
    Planar { radial_omega: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LangevinConfig {
    /// Thermostat temperature (K).
    pub temperature: f64,
    /// Friction rate (1/s).
    pub friction: f64,
    /// Timestep (s); chosen from the fastest mode when `None`.
    pub dt: Option<f64>,
    /// Steps after burn-in.
    pub steps: usize,
    /// Simulated time after burn-in (s); overrides `steps` when set.
    pub duration: Option<f64>,
    pub burn_in: usize,
    pub seed: u64,
    /// Starting angles; the equilibrium at the given field when `None`.
    pub initial: Option<CrystalState1D>,
    pub constraint: Constraint,
    /// End the run as soon as the winding exceeds 2 pi.
    pub stop_when_delocalized: bool,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            temperature: crate::consts::DEFAULT_TEMPERATURE,
            friction: DEFAULT_FRICTION,
            dt: None,
            steps: 1_000_000,
            duration: None,
            burn_in: 100_000,
            seed: 0,
            initial: None,
            constraint: Constraint::Ring,
            stop_when_delocalized: false,
        }
    }
}

impl LangevinConfig {
    fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidInput(format!("temperature must be non-negative, got {}", self.temperature)));
        }
        if !(self.friction > 0.0 && self.friction.is_finite()) {
            return Err(Error::InvalidInput(format!("friction must be positive, got {}", self.friction)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidInput(format!("timestep must be positive, got {dt}")));
            }
        }
        if let Some(t) = self.duration {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!("duration must be positive, got {t}")));
            }
        }
        if let Constraint::Planar { radial_omega } = self.constraint {
            if !(radial_omega > 0.0) {
                return Err(Error::InvalidInput(format!("radial frequency must be positive, got {radial_omega}")));
            }
        }
        Ok(())
    }
}

/// Mean, variance and extent of a scalar time series.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SeriesStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Default)]
struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.min = x;
            self.max = x;
        }
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn stats(&self) -> SeriesStats {
        SeriesStats {
            mean: self.mean,
            variance: if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 },
            min: self.min,
            max: self.max,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySummary {
    pub ions: usize,
    pub dt: f64,
    /// Steps integrated after burn-in.
    pub steps: usize,
    pub simulated_time: f64,
    /// Kinetic temperature over all tangential velocities (K).
    pub kinetic_temperature: f64,
    /// Kinetic temperature of each ion (K).
    pub kinetic_per_ion: Vec<f64>,
    /// Collective angle (mean ion angle, unwrapped) relative to its value after burn-in.
    pub collective: SeriesStats,
    /// Largest excursion of the collective angle (rad).
    pub winding: f64,
    /// Net change of the collective angle over the run (rad).
    pub net_winding: f64,
    pub hops: usize,
    pub delocalized: bool,
    /// Total energy relative to the starting potential energy (J).
    pub energy: SeriesStats,
    /// Set when the run stopped at the first full winding.
    pub stopped_early: bool,
}

/// Wells of the collective angle: one site apart, with the barrier top at fraction
/// `barrier` of the way from a well to the next one in the positive direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellMap {
    pub origin: f64,
    pub spacing: f64,
    pub barrier: f64,
}

impl WellMap {
    pub fn new(origin: f64, ions: usize, barrier: f64) -> Self {
        Self { origin, spacing: TAU / ions as f64, barrier: barrier.clamp(0.0, 1.0) }
    }

    /// Wells around the barrier maximum of a scanned profile.
    pub fn from_profile(profile: &BarrierProfile) -> Self {
        let first = &profile.configurations[0];
        let origin = first.iter().sum::<f64>() / first.len() as f64;
        let forward = profile.collective_shift.last().copied().unwrap_or(1.0) >= 0.0;
        let f = profile.barrier_fraction();
        Self::new(origin, profile.ions, if forward { f } else { 1.0 - f })
    }

    /// Index of the well whose core contains `phi`, if any. Cores extend half the
    /// distance to the nearer barrier top on each side.
    pub fn core(&self, phi: f64) -> Option<i64> {
        let w = (phi - self.origin) / self.spacing;
        let half = 0.5 * self.barrier.min(1.0 - self.barrier);
        let k = w.round();
        ((w - k).abs() <= half).then_some(k as i64)
    }
}

/// Counts transitions between well cores.
#[derive(Clone, Debug)]
pub struct HopCounter {
    wells: WellMap,
    last: Option<i64>,
    pub hops: usize,
}

impl HopCounter {
    pub fn new(wells: WellMap) -> Self {
        Self { wells, last: None, hops: 0 }
    }

    pub fn push(&mut self, phi: f64) {
        if let Some(k) = self.wells.core(phi) {
            if let Some(prev) = self.last {
                self.hops += (k - prev).unsigned_abs() as usize;
            }
            self.last = Some(k);
        }
    }
}

/// Recorded collective angle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub collective: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopStatistics {
    pub hops: usize,
    /// Hops per second of simulated time.
    pub rate: f64,
}

/// Hops between the wells of `profile` along a recorded trajectory.
pub fn hop_statistics(trajectory: &Trajectory, profile: &BarrierProfile) -> Result<HopStatistics> {
    if profile.is_empty() {
        return Err(Error::InvalidInput("barrier profile is empty".into()));
    }
    let mut counter = HopCounter::new(WellMap::from_profile(profile));
    for &phi in &trajectory.collective {
        counter.push(phi);
    }
    let span = match (trajectory.times.first(), trajectory.times.last()) {
        (Some(a), Some(b)) if b > a => b - a,
        _ => return Ok(HopStatistics { hops: counter.hops, rate: 0.0 }),
    };
    Ok(HopStatistics { hops: counter.hops, rate: counter.hops as f64 / span })
}

/// Per-step state handed to an observer.
pub struct Frame<'a> {
    /// Step index counted from the end of burn-in (negative during burn-in).
    pub step: i64,
    pub time: f64,
    /// Unwrapped ion angles (rad).
    pub angles: &'a [f64],
    /// Ion radii (m); all equal to the ring radius on the ring.
    pub radii: &'a [f64],
    pub collective: f64,
}

/// Forces and energies for one set of coordinates.
trait System {
    /// Number of coordinates.
    fn dim(&self) -> usize;
    /// Mass per coordinate.
    fn mass(&self) -> f64;
    /// Writes `-dV/dq` into `force` and returns `V`.
    fn evaluate(&mut self, q: &[f64], force: &mut [f64]) -> f64;
    /// Unwrapped angles and radii of the ions.
    fn angles_radii(&mut self, q: &[f64], angles: &mut [f64], radii: &mut [f64]);
    /// Tangential velocity of each ion.
    fn tangential(&self, q: &[f64], v: &[f64], out: &mut [f64]);
}

/// Ring coordinates: arc length `R theta` per ion.
struct RingSystem {
    n: usize,
    radius: f64,
    mass: f64,
    coulomb: f64,
    er_x: f64,
    er_y: f64,
    half: Vec<(f64, f64)>,
}

impl RingSystem {
    fn new(ring: &RingSpec, field: &InPlaneField) -> Self {
        let r = ring.radius();
        Self {
            n: ring.ions,
            radius: r,
            mass: ring.ion_mass,
            coulomb: ring.coulomb_scale(),
            er_x: ELEMENTARY_CHARGE * r * field.ex,
            er_y: ELEMENTARY_CHARGE * r * field.ey,
            half: vec![(0.0, 0.0); ring.ions],
        }
    }
}

impl System for RingSystem {
    fn dim(&self) -> usize {
        self.n
    }

    fn mass(&self) -> f64 {
        self.mass
    }

    fn evaluate(&mut self, q: &[f64], force: &mut [f64]) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for i in 0..n {
            let th = q[i] / self.radius;
            let (s, c) = (0.5 * th).sin_cos();
            self.half[i] = (s, c);
            // sin and cos of the full angle from the half angle
            let (st, ct) = (2.0 * s * c, c * c - s * s);
            v -= self.er_x * st + self.er_y * ct;
            force[i] = self.er_x * ct - self.er_y * st;
        }
        for i in 0..n {
            let (si, ci) = self.half[i];
            for j in i + 1..n {
                let (sj, cj) = self.half[j];
                let s = si * cj - ci * sj;
                let c = ci * cj + si * sj;
                let inv = 1.0 / s.abs();
                v += self.coulomb * inv;
                // dV/dtheta_i of C/|s|
                let d = -0.5 * self.coulomb * c * s.signum() * inv * inv;
                force[i] -= d;
                force[j] += d;
            }
        }
        for f in force.iter_mut() {
            *f /= self.radius;
        }
        v
    }

    fn angles_radii(&mut self, q: &[f64], angles: &mut [f64], radii: &mut [f64]) {
        for i in 0..self.n {
            angles[i] = q[i] / self.radius;
            radii[i] = self.radius;
        }
    }

    fn tangential(&self, _q: &[f64], v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
    }
}

/// Planar coordinates: `(x_i, y_i)` pairs, with `x = r sin(theta)` and `y = r cos(theta)`.
struct PlanarSystem {
    n: usize,
    mass: f64,
    r0: f64,
    k: f64,
    coulomb_e2: f64,
    fx: f64,
    fy: f64,
    unwrapped: Vec<f64>,
}

impl PlanarSystem {
    fn new(ring: &RingSpec, field: &InPlaneField, radial_omega: f64, start_angles: &[f64]) -> Self {
        Self {
            n: ring.ions,
            mass: ring.ion_mass,
            r0: ring.radius(),
            k: ring.ion_mass * radial_omega * radial_omega,
            coulomb_e2: crate::consts::COULOMB_E2,
            fx: ELEMENTARY_CHARGE * field.ex,
            fy: ELEMENTARY_CHARGE * field.ey,
            unwrapped: start_angles.to_vec(),
        }
    }
}

impl System for PlanarSystem {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn mass(&self) -> f64 {
        self.mass
    }

    fn evaluate(&mut self, q: &[f64], force: &mut [f64]) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for i in 0..n {
            let (x, y) = (q[2 * i], q[2 * i + 1]);
            let r = x.hypot(y);
            let dr = r - self.r0;
            v += 0.5 * self.k * dr * dr - self.fx * x - self.fy * y;
            let radial = -self.k * dr / r;
            force[2 * i] = radial * x + self.fx;
            force[2 * i + 1] = radial * y + self.fy;
        }
        for i in 0..n {
            for j in i + 1..n {
                let dx = q[2 * i] - q[2 * j];
                let dy = q[2 * i + 1] - q[2 * j + 1];
                let d2 = dx * dx + dy * dy;
                let d = d2.sqrt();
                v += self.coulomb_e2 / d;
                let f = self.coulomb_e2 / (d2 * d);
                force[2 * i] += f * dx;
                force[2 * i + 1] += f * dy;
                force[2 * j] -= f * dx;
                force[2 * j + 1] -= f * dy;
            }
        }
        v
    }

    fn angles_radii(&mut self, q: &[f64], angles: &mut [f64], radii: &mut [f64]) {
        for i in 0..self.n {
            let (x, y) = (q[2 * i], q[2 * i + 1]);
            let raw = x.atan2(y);
            let prev = self.unwrapped[i];
            let next = prev + crate::model::wrap_pi(raw - prev);
            self.unwrapped[i] = next;
            angles[i] = next;
            radii[i] = x.hypot(y);
        }
    }

    fn tangential(&self, q: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (x, y) = (q[2 * i], q[2 * i + 1]);
            let r = x.hypot(y);
            // unit tangent along increasing theta: (cos, -sin)
            out[i] = (v[2 * i] * y - v[2 * i + 1] * x) / r;
        }
    }
}

struct Prepared {
    angles: Vec<f64>,
    radii: Option<Vec<f64>>,
    dt: f64,
}

fn prepare(ring: &RingSpec, field: &InPlaneField, cfg: &LangevinConfig) -> Result<Prepared> {
    let eq_opts = EquilibriumOptions::default();
    let (angles, radii, omega_max) = match (cfg.constraint, &cfg.initial) {
        (Constraint::Ring, Some(s)) => {
            if s.len() != ring.ions {
                return Err(Error::InvalidInput(format!("initial state has {} ions, ring has {}", s.len(), ring.ions)));
            }
            let w = tangential_modes(s, ring, field)?.max_omega();
            (s.angles().to_vec(), None, w)
        }
        (Constraint::Ring, None) => {
            let eq = find_equilibrium(ring, field, &eq_opts)?;
            let w = tangential_modes(&eq.state, ring, field)?.max_omega();
            (eq.state.angles().to_vec(), None, w)
        }
        (Constraint::Planar { radial_omega }, init) => {
            let (a, r) = match init {
                Some(s) => (s.angles().to_vec(), vec![ring.radius(); ring.ions]),
                None => {
                    let eq = find_equilibrium_planar(ring, field, radial_omega, &eq_opts)?;
                    (eq.state.angles().to_vec(), eq.state.radii().to_vec())
                }
            };
            let s1 = CrystalState1D::new(a.clone())?;
            let w = tangential_modes(&s1, ring, field)?.max_omega().max(radial_omega);
            // Radial modes stiffen with Coulomb pressure; leave headroom.
            (a, Some(r), 1.5 * w.max(radial_omega))
        }
    };
    let dt = match cfg.dt {
        Some(dt) => {
            if dt * omega_max >= MAX_STEP_FRACTION {
                return Err(Error::InvalidInput(format!(
                    "timestep {dt} s is unstable: dt * omega_max = {:.3} must stay below {MAX_STEP_FRACTION}",
                    dt * omega_max
                )));
            }
            dt
        }
        None if omega_max > 0.0 => DEFAULT_STEP_FRACTION / omega_max,
        None => 0.01 / cfg.friction,
    };
    Ok(Prepared { angles, radii, dt })
}

/// Integrates the crystal under friction and thermal noise.
pub fn simulate(ring: &RingSpec, field: &InPlaneField, cfg: &LangevinConfig) -> Result<TrajectorySummary> {
    simulate_observed(ring, field, cfg, &mut |_| {})
}

/// As [`simulate`], calling `observer` after every step.
pub fn simulate_observed(
    ring: &RingSpec,
    field: &InPlaneField,
    cfg: &LangevinConfig,
    observer: &mut dyn FnMut(&Frame),
) -> Result<TrajectorySummary> {
    cfg.validate()?;
    let prep = prepare(ring, field, cfg)?;
    let n = ring.ions;
    // Wells are centred on the starting configuration, the equilibrium unless given.
    let wells = WellMap::new(prep.angles.iter().sum::<f64>() / n as f64, n, 0.5);
    let r = ring.radius();
    let (mut sys, q0): (Box<dyn System>, Vec<f64>) = match cfg.constraint {
        Constraint::Ring => (Box::new(RingSystem::new(ring, field)), prep.angles.iter().map(|a| a * r).collect()),
        Constraint::Planar { radial_omega } => {
            let radii = prep.radii.clone().unwrap();
            let q = prep
                .angles
                .iter()
                .zip(&radii)
                .flat_map(|(a, rr)| [rr * a.sin(), rr * a.cos()])
                .collect();
            (Box::new(PlanarSystem::new(ring, field, radial_omega, &prep.angles)), q)
        }
    };
    integrate(sys.as_mut(), q0, n, wells, prep.dt, cfg, ring.coulomb_scale(), observer)
}

#[allow(clippy::too_many_arguments)]
fn integrate(
    sys: &mut dyn System,
    mut q: Vec<f64>,
    n: usize,
    wells: WellMap,
    dt: f64,
    cfg: &LangevinConfig,
    energy_floor: f64,
    observer: &mut dyn FnMut(&Frame),
) -> Result<TrajectorySummary> {
    let dim = sys.dim();
    let m = sys.mass();
    let kt = BOLTZMANN * cfg.temperature;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sigma = (kt / m).sqrt();
    let mut v: Vec<f64> = (0..dim).map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let c1 = (-cfg.friction * dt).exp();
    let c2 = sigma * (1.0 - c1 * c1).sqrt();
    let half = 0.5 * dt;

    let mut force = vec![0.0; dim];
    let v_start = sys.evaluate(&q, &mut force);
    // Abort threshold on the total energy above the start.
    let limit = 10.0 * (n.max(5) as f64) * kt + 1e-6 * energy_floor;

    let mut angles = vec![0.0; n];
    let mut radii = vec![0.0; n];
    let mut vt = vec![0.0; n];
    let mut ke_sum = vec![0.0; n];
    let mut collective = Accumulator::default();
    let mut energy = Accumulator::default();
    let mut phi0 = 0.0;
    let mut winding = 0.0f64;
    let mut net = 0.0;
    let mut counter: Option<HopCounter> = None;
    let steps = cfg.duration.map_or(cfg.steps, |t| (t / dt).ceil() as usize);
    let total = cfg.burn_in + steps;
    let mut done = 0usize;
    let mut stopped = false;

    for step in 0..total {
        for k in 0..dim {
            v[k] += half * force[k] / m;
            q[k] += half * v[k];
        }
        for vk in v.iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *vk = c1 * *vk + c2 * xi;
        }
        for k in 0..dim {
            q[k] += half * v[k];
        }
        let potential = sys.evaluate(&q, &mut force);
        for k in 0..dim {
            v[k] += half * force[k] / m;
        }

        sys.angles_radii(&q, &mut angles, &mut radii);
        let phi = angles.iter().sum::<f64>() / n as f64;
        let ke: f64 = 0.5 * m * v.iter().map(|x| x * x).sum::<f64>();
        let e_tot = ke + potential - v_start;
        if !e_tot.is_finite() || e_tot > limit {
            return Err(Error::Unstable(format!(
                "energy {e_tot:.3e} J above the start exceeds {limit:.3e} J at step {step} (dt = {dt:.3e} s)"
            )));
        }
        let rel = step as i64 - cfg.burn_in as i64;
        observer(&Frame { step: rel, time: (step + 1) as f64 * dt, angles: &angles, radii: &radii, collective: phi });
        if rel < 0 {
            continue;
        }
        if rel == 0 {
            phi0 = phi;
            counter = Some(HopCounter::new(wells));
        }
        sys.tangential(&q, &v, &mut vt);
        for i in 0..n {
            ke_sum[i] += m * vt[i] * vt[i];
        }
        let d = phi - phi0;
        collective.push(d);
        energy.push(e_tot);
        winding = winding.max(d.abs());
        net = d;
        if let Some(c) = counter.as_mut() {
            c.push(phi);
        }
        done += 1;
        if cfg.stop_when_delocalized && winding > TAU {
            stopped = true;
            break;
        }
    }
    let per_ion: Vec<f64> = ke_sum.iter().map(|s| if done > 0 { s / (done as f64 * BOLTZMANN) } else { 0.0 }).collect();
    Ok(TrajectorySummary {
        ions: n,
        dt,
        steps: done,
        simulated_time: done as f64 * dt,
        kinetic_temperature: per_ion.iter().sum::<f64>() / n as f64,
        kinetic_per_ion: per_ion,
        collective: collective.stats(),
        winding,
        net_winding: net,
        hops: counter.map_or(0, |c| c.hops),
        delocalized: winding > TAU,
        energy: energy.stats(),
        stopped_early: stopped,
    })
}

/// Simulation with the collective angle recorded every `every` steps after burn-in.
pub fn simulate_recorded(
    ring: &RingSpec,
    field: &InPlaneField,
    cfg: &LangevinConfig,
    every: usize,
) -> Result<(TrajectorySummary, Trajectory)> {
    let every = every.max(1) as i64;
    let mut traj = Trajectory::default();
    let summary = simulate_observed(ring, field, cfg, &mut |f| {
        if f.step >= 0 && f.step % every == 0 {
            traj.times.push(f.time);
            traj.collective.push(f.collective);
        }
    })?;
    Ok((summary, traj))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanOptions {
    /// Seeds per field value; seed `k` of field `i` uses `base.seed + k`.
    pub seeds: usize,
    pub base: LangevinConfig,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { seeds: 8, base: LangevinConfig { stop_when_delocalized: true, ..Default::default() } }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    /// Field magnitude along +y (V/m).
    pub field: f64,
    pub delocalized: Vec<bool>,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelocalizationScan {
    pub points: Vec<ScanPoint>,
    /// Field where the delocalized fraction falls through one half (V/m).
    pub threshold: f64,
    /// False when the fraction never crosses one half inside the grid.
    pub bracketed: bool,
}

/// Delocalized fraction over a grid of field magnitudes, and the field where it falls
/// through one half.
pub fn delocalization_scan(ring: &RingSpec, temperature: f64, fields: &[f64], opts: &ScanOptions) -> Result<DelocalizationScan> {
    if fields.is_empty() || fields.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
        return Err(Error::InvalidInput("field grid must be non-empty and non-negative".into()));
    }
    if fields.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("field grid must be strictly increasing".into()));
    }
    if opts.seeds == 0 {
        return Err(Error::InvalidInput("at least one seed per field is required".into()));
    }
    let mut points = Vec::with_capacity(fields.len());
    if temperature == 0.0 {
        for &f in fields {
            points.push(ScanPoint { field: f, delocalized: vec![false; opts.seeds], fraction: 0.0 });
        }
        return Ok(DelocalizationScan { points, threshold: 0.0, bracketed: true });
    }
    for &f in fields {
        let field = InPlaneField::along_y(f);
        let mut verdicts = Vec::with_capacity(opts.seeds);
        for k in 0..opts.seeds {
            let cfg = LangevinConfig { temperature, seed: opts.base.seed.wrapping_add(k as u64), ..opts.base.clone() };
            verdicts.push(simulate(ring, &field, &cfg)?.delocalized);
        }
        let fraction = verdicts.iter().filter(|d| **d).count() as f64 / opts.seeds as f64;
        points.push(ScanPoint { field: f, delocalized: verdicts, fraction });
    }
    let (threshold, bracketed) = crossing(&points);
    Ok(DelocalizationScan { points, threshold, bracketed })
}

/// First downward crossing of one half, linearly interpolated.
fn crossing(points: &[ScanPoint]) -> (f64, bool) {
    if points[0].fraction < 0.5 {
        return (points[0].field, false);
    }
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.fraction >= 0.5 && b.fraction < 0.5 {
            let t = (a.fraction - 0.5) / (a.fraction - b.fraction);
            return (a.field + t * (b.field - a.field), true);
        }
    }
    (points[points.len() - 1].field, false)
}
