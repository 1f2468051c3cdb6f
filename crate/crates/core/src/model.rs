//! Ring-crystal potential energy: the ions-on-a-circle model and its planar extension.
//!
//! Angles are measured from the +y axis, so an ion at angle `theta` sits at
//! `(x, y) = (d/2) (sin theta, cos theta)` and a homogeneous field contributes
//! `-e (E_x x + E_y y)`. With `E_x = 0` the dipole term is `-(1/2) E_y e d cos theta`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use crate::consts::{COULOMB_E2, ELEMENTARY_CHARGE, MASS_CA40_ION};
use crate::error::{Error, Result};

/// Smallest admissible angular separation between two ions (rad).
pub const COINCIDENCE_EPS: f64 = 1e-9;

/// The fixed stage of every crystal computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingSpec {
    pub diameter: f64,
    pub ion_mass: f64,
    pub ions: usize,
}

impl RingSpec {
    pub fn new(diameter: f64, ion_mass: f64, ions: usize) -> Result<Self> {
        if !(diameter > 0.0 && diameter.is_finite()) {
            return Err(Error::InvalidInput(format!("ring diameter must be positive, got {diameter}")));
        }
        if !(ion_mass > 0.0 && ion_mass.is_finite()) {
            return Err(Error::InvalidInput(format!("ion mass must be positive, got {ion_mass}")));
        }
        if ions == 0 {
            return Err(Error::InvalidInput("ion count must be at least 1".into()));
        }
        Ok(Self { diameter, ion_mass, ions })
    }

    /// A ring of calcium-40 ions.
    pub fn calcium(diameter: f64, ions: usize) -> Result<Self> {
        Self::new(diameter, MASS_CA40_ION, ions)
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    /// Energy of two diametrically opposite ions, `e^2 / (4 pi eps0 d)`. Natural energy unit.
    pub fn coulomb_scale(&self) -> f64 {
        COULOMB_E2 / self.diameter
    }

    pub fn with_ions(&self, ions: usize) -> Result<Self> {
        Self::new(self.diameter, self.ion_mass, ions)
    }
}

/// Homogeneous external field in the trap plane (V/m).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InPlaneField {
    pub ex: f64,
    pub ey: f64,
}

impl InPlaneField {
    pub fn new(ex: f64, ey: f64) -> Result<Self> {
        if !(ex.is_finite() && ey.is_finite()) {
            return Err(Error::InvalidInput(format!("field components must be finite, got ({ex}, {ey})")));
        }
        Ok(Self { ex, ey })
    }

    pub const ZERO: InPlaneField = InPlaneField { ex: 0.0, ey: 0.0 };

    /// Field of magnitude `e` along +y.
    pub fn along_y(e: f64) -> Self {
        Self { ex: 0.0, ey: e }
    }

    pub fn magnitude(&self) -> f64 {
        self.ex.hypot(self.ey)
    }

    pub fn is_zero(&self) -> bool {
        self.ex == 0.0 && self.ey == 0.0
    }

    /// Angle (from +y) where a positive ion has the lowest dipole energy.
    pub fn favored_angle(&self) -> f64 {
        self.ex.atan2(self.ey).rem_euclid(TAU)
    }

    /// Rotates the field direction by `alpha` in the sense of increasing angle.
    pub fn rotated(&self, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self {
            ex: self.ex * c + self.ey * s,
            ey: -self.ex * s + self.ey * c,
        }
    }
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_pi(delta: f64) -> f64 {
    let d = (delta + PI).rem_euclid(TAU) - PI;
    if d == -PI {
        PI
    } else {
        d
    }
}

/// Ion angles on the ring.
#[derive(Clone, Debug, PartialEq)]
pub struct CrystalState1D {
    angles: Vec<f64>,
}

impl CrystalState1D {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        Self::with_epsilon(angles, COINCIDENCE_EPS)
    }

    /// Like [`CrystalState1D::new`] with a custom coincidence threshold.
    pub fn with_epsilon(angles: Vec<f64>, epsilon: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidInput("crystal state needs at least one ion".into()));
        }
        if let Some(bad) = angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite angle {bad}")));
        }
        let angles: Vec<f64> = angles.into_iter().map(normalize_angle).collect();
        if let Some((i, j, separation)) = closest_pair(&angles) {
            if separation < epsilon {
                return Err(Error::Singular { i, j, separation });
            }
        }
        Ok(Self { angles })
    }

    /// `n` equally spaced ions, the first at `offset`.
    pub fn uniform(n: usize, offset: f64) -> Result<Self> {
        Self::new((0..n).map(|k| offset + TAU * k as f64 / n as f64).collect())
    }

    pub(crate) fn from_raw(angles: Vec<f64>) -> Self {
        Self {
            angles: angles.into_iter().map(normalize_angle).collect(),
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn rotated(&self, phi: f64) -> Self {
        Self::from_raw(self.angles.iter().map(|a| a + phi).collect())
    }

    /// Same ions relabeled in ascending angle.
    pub fn sorted(&self) -> Self {
        let mut a = self.angles.clone();
        a.sort_by(f64::total_cmp);
        Self { angles: a }
    }

    /// Smallest circular distance between two ions; `None` for a single ion.
    pub fn min_separation(&self) -> Option<f64> {
        closest_pair(&self.angles).map(|(_, _, s)| s)
    }

    /// Gaps between cyclically consecutive ions, starting after the lowest angle.
    pub fn gaps(&self) -> Vec<f64> {
        let s = self.sorted();
        let n = s.len();
        (0..n)
            .map(|k| {
                if k + 1 < n {
                    s.angles[k + 1] - s.angles[k]
                } else {
                    s.angles[0] + TAU - s.angles[n - 1]
                }
            })
            .collect()
    }
}

fn closest_pair(angles: &[f64]) -> Option<(usize, usize, f64)> {
    let n = angles.len();
    if n < 2 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    let mut best = (idx[n - 1], idx[0], angles[idx[0]] + TAU - angles[idx[n - 1]]);
    for w in idx.windows(2) {
        let s = angles[w[1]] - angles[w[0]];
        if s < best.2 {
            best = (w[0], w[1], s);
        }
    }
    Some(best)
}

/// In-plane ion positions with radial freedom, harmonic radial confinement around `r0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrystalState2D {
    radii: Vec<f64>,
    angles: Vec<f64>,
    pub radial_omega: f64,
    pub r0: f64,
}

impl CrystalState2D {
    pub fn new(radii: Vec<f64>, angles: Vec<f64>, radial_omega: f64, r0: f64) -> Result<Self> {
        if radii.len() != angles.len() || radii.is_empty() {
            return Err(Error::InvalidInput(format!(
                "planar state needs matching non-empty radii/angles, got {} and {}",
                radii.len(),
                angles.len()
            )));
        }
        if !(radial_omega > 0.0 && r0 > 0.0) {
            return Err(Error::InvalidInput("radial frequency and r0 must be positive".into()));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("non-finite angle".into()));
        }
        let angles: Vec<f64> = angles.into_iter().map(normalize_angle).collect();
        let pts: Vec<[f64; 2]> = radii
            .iter()
            .zip(&angles)
            .map(|(r, t)| [r * t.sin(), r * t.cos()])
            .collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let dist = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
                if dist < COINCIDENCE_EPS * r0 {
                    return Err(Error::Singular { i, j, separation: dist / r0 });
                }
            }
        }
        Ok(Self { radii, angles, radial_omega, r0 })
    }

    /// Every ion at `r0` with the angles of a 1D state.
    pub fn on_ring(state: &CrystalState1D, radial_omega: f64, r0: f64) -> Result<Self> {
        Self::new(vec![r0; state.len()], state.angles().to_vec(), radial_omega, r0)
    }

    pub(crate) fn from_raw(radii: Vec<f64>, angles: Vec<f64>, radial_omega: f64, r0: f64) -> Self {
        Self {
            radii,
            angles: angles.into_iter().map(normalize_angle).collect(),
            radial_omega,
            r0,
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Angular part as a 1D state.
    pub fn angular(&self) -> CrystalState1D {
        CrystalState1D::from_raw(self.angles.clone())
    }
}

fn check_len(n: usize, ring: &RingSpec) -> Result<()> {
    if n != ring.ions {
        return Err(Error::InvalidInput(format!(
            "state has {n} ions but the ring has {}",
            ring.ions
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ring (1D) model on raw angle slices.

#[inline]
fn dipole_terms(theta: f64, radius: f64, field: &InPlaneField) -> (f64, f64, f64) {
    let (s, c) = theta.sin_cos();
    let q = ELEMENTARY_CHARGE * radius;
    let along = field.ex * s + field.ey * c;
    let across = field.ex * c - field.ey * s;
    (-q * along, -q * across, q * along)
}

/// `(f, f', f'')` of the pair kernel `1/|sin(delta/2)|`.
#[inline]
fn pair_kernel(delta: f64) -> (f64, f64, f64) {
    let (s, c) = (0.5 * delta).sin_cos();
    let a = s.abs();
    let f = 1.0 / a;
    let d1 = -0.5 * c * s.signum() / (a * a);
    let d2 = 0.25 / a + 0.5 * c * c / (a * a * a);
    (f, d1, d2)
}

pub(crate) fn ring_energy_raw(angles: &[f64], ring: &RingSpec, field: &InPlaneField) -> f64 {
    let r = ring.radius();
    let scale = ring.coulomb_scale();
    let mut dip = 0.0;
    let mut coul = 0.0;
    for (i, &ti) in angles.iter().enumerate() {
        dip += dipole_terms(ti, r, field).0;
        for &tj in &angles[i + 1..] {
            coul += pair_kernel(ti - tj).0;
        }
    }
    dip + scale * coul
}

pub(crate) fn ring_gradient_raw(angles: &[f64], ring: &RingSpec, field: &InPlaneField) -> Vec<f64> {
    let r = ring.radius();
    let scale = ring.coulomb_scale();
    let n = angles.len();
    let mut g: Vec<f64> = angles.iter().map(|&t| dipole_terms(t, r, field).1).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d1 = scale * pair_kernel(angles[i] - angles[j]).1;
            g[i] += d1;
            g[j] -= d1;
        }
    }
    g
}

pub(crate) fn ring_hessian_raw(angles: &[f64], ring: &RingSpec, field: &InPlaneField) -> DMatrix<f64> {
    let r = ring.radius();
    let scale = ring.coulomb_scale();
    let n = angles.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = dipole_terms(angles[i], r, field).2;
    }
    for i in 0..n {
        for j in i + 1..n {
            let d2 = scale * pair_kernel(angles[i] - angles[j]).2;
            h[(i, i)] += d2;
            h[(j, j)] += d2;
            h[(i, j)] -= d2;
            h[(j, i)] -= d2;
        }
    }
    h
}

/// Potential energy (J) of ions on the ring in a homogeneous in-plane field.
pub fn ring_energy(state: &CrystalState1D, ring: &RingSpec, field: &InPlaneField) -> Result<f64> {
    check_len(state.len(), ring)?;
    Ok(ring_energy_raw(state.angles(), ring, field))
}

/// Analytic `dV/dtheta_i` (J/rad).
pub fn ring_gradient(state: &CrystalState1D, ring: &RingSpec, field: &InPlaneField) -> Result<Vec<f64>> {
    check_len(state.len(), ring)?;
    Ok(ring_gradient_raw(state.angles(), ring, field))
}

/// Analytic Hessian in angle coordinates (J/rad^2).
pub fn ring_hessian(state: &CrystalState1D, ring: &RingSpec, field: &InPlaneField) -> Result<DMatrix<f64>> {
    check_len(state.len(), ring)?;
    Ok(ring_hessian_raw(state.angles(), ring, field))
}

// ---------------------------------------------------------------------------
// Planar model.

/// Energy, gradient and Hessian in polar coordinates `(r_0..r_{N-1}, theta_0..theta_{N-1})`.
pub(crate) struct PolarDerivs {
    pub energy: f64,
    pub gradient: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

pub(crate) fn planar_polar(
    radii: &[f64],
    angles: &[f64],
    ring: &RingSpec,
    field: &InPlaneField,
    radial_omega: f64,
    r0: f64,
    want_hessian: bool,
) -> PolarDerivs {
    let n = radii.len();
    let k_rad = ring.ion_mass * radial_omega * radial_omega;
    let qe = ELEMENTARY_CHARGE;
    let sc: Vec<(f64, f64)> = angles.iter().map(|t| t.sin_cos()).collect();
    let pos: Vec<[f64; 2]> = (0..n).map(|i| [radii[i] * sc[i].0, radii[i] * sc[i].1]).collect();

    let mut energy = 0.0;
    // Cartesian gradient per ion.
    let mut gc = vec![[-qe * field.ex, -qe * field.ey]; n];
    let mut hc = if want_hessian {
        Some(vec![[[0.0f64; 2]; 2]; n * n])
    } else {
        None
    };
    for i in 0..n {
        let dr = radii[i] - r0;
        energy += 0.5 * k_rad * dr * dr - qe * (field.ex * pos[i][0] + field.ey * pos[i][1]);
        for j in i + 1..n {
            let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
            let r2 = d[0] * d[0] + d[1] * d[1];
            let rr = r2.sqrt();
            let inv3 = 1.0 / (r2 * rr);
            energy += COULOMB_E2 / rr;
            for a in 0..2 {
                let f = -COULOMB_E2 * d[a] * inv3;
                gc[i][a] += f;
                gc[j][a] -= f;
            }
            if let Some(hc) = hc.as_mut() {
                let inv5 = inv3 / r2;
                let mut m = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        m[a][b] = COULOMB_E2
                            * (3.0 * d[a] * d[b] * inv5 - if a == b { inv3 } else { 0.0 });
                    }
                }
                for a in 0..2 {
                    for b in 0..2 {
                        hc[i * n + i][a][b] += m[a][b];
                        hc[j * n + j][a][b] += m[a][b];
                        hc[i * n + j][a][b] -= m[a][b];
                        hc[j * n + i][a][b] -= m[a][b];
                    }
                }
            }
        }
    }

    // Jacobian columns: dp/dr = (sin, cos), dp/dtheta = r (cos, -sin).
    let jac = |i: usize| -> [[f64; 2]; 2] {
        let (s, c) = sc[i];
        [[s, c], [radii[i] * c, -radii[i] * s]]
    };
    let mut gradient = DVector::zeros(2 * n);
    for i in 0..n {
        let j = jac(i);
        gradient[i] = j[0][0] * gc[i][0] + j[0][1] * gc[i][1] + k_rad * (radii[i] - r0);
        gradient[n + i] = j[1][0] * gc[i][0] + j[1][1] * gc[i][1];
    }

    let hessian = hc.map(|hc| {
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let ji = jac(i);
            for j in 0..n {
                let jj = jac(j);
                let blk = &hc[i * n + j];
                for a in 0..2 {
                    for b in 0..2 {
                        let mut v = 0.0;
                        for p in 0..2 {
                            for q in 0..2 {
                                v += ji[a][p] * blk[p][q] * jj[b][q];
                            }
                        }
                        h[(a * n + i, b * n + j)] = v;
                    }
                }
            }
            // Curvature of the polar map.
            let (s, c) = sc[i];
            let g = gc[i];
            let d_rt = g[0] * c - g[1] * s;
            let d_tt = -radii[i] * (g[0] * s + g[1] * c);
            h[(i, i)] += k_rad;
            h[(i, n + i)] += d_rt;
            h[(n + i, i)] += d_rt;
            h[(n + i, n + i)] += d_tt;
        }
        h
    });

    PolarDerivs { energy, gradient, hessian }
}

fn check_planar(state: &CrystalState2D, ring: &RingSpec) -> Result<()> {
    check_len(state.len(), ring)
}

/// Planar energy (J): harmonic radial confinement, dipole coupling and full Coulomb repulsion.
pub fn planar_energy(state: &CrystalState2D, ring: &RingSpec, field: &InPlaneField) -> Result<f64> {
    check_planar(state, ring)?;
    Ok(planar_polar(state.radii(), state.angles(), ring, field, state.radial_omega, state.r0, false).energy)
}

/// Gradient over `(r_0..r_{N-1}, s_0..s_{N-1})` with arc coordinate `s_i = r0 theta_i` (J/m).
pub fn planar_gradient(state: &CrystalState2D, ring: &RingSpec, field: &InPlaneField) -> Result<Vec<f64>> {
    check_planar(state, ring)?;
    let d = planar_polar(state.radii(), state.angles(), ring, field, state.radial_omega, state.r0, false);
    let n = state.len();
    let mut g: Vec<f64> = d.gradient.iter().copied().collect();
    for v in &mut g[n..] {
        *v /= state.r0;
    }
    Ok(g)
}

/// Hessian over `(r, s)` coordinates (J/m^2).
pub fn planar_hessian(state: &CrystalState2D, ring: &RingSpec, field: &InPlaneField) -> Result<DMatrix<f64>> {
    check_planar(state, ring)?;
    let d = planar_polar(state.radii(), state.angles(), ring, field, state.radial_omega, state.r0, true);
    let n = state.len();
    let mut h = d.hessian.expect("hessian requested");
    for a in 0..2 * n {
        for b in 0..2 * n {
            if a >= n {
                h[(a, b)] /= state.r0;
            }
            if b >= n {
                h[(a, b)] /= state.r0;
            }
        }
    }
    Ok(h)
}
