//! Electrostatics of a planar electrode pattern in an otherwise grounded plane.
//!
//! Potentials are computed in the gapless-plane approximation: every electrode is a
//! patch of the plane `z = 0` held at its voltage. Discs and annuli have a closed form;
//! annular sectors are integrated numerically.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2, Vector3};

use crate::consts::ELEMENTARY_CHARGE;
use crate::elliptic;
use crate::error::{Error, Result};

/// Unit-voltage potential shape of one electrode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Disc { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    /// Annular sector; azimuths in radians measured from +x towards +y.
    Sector { inner: f64, outer: f64, start: f64, end: f64 },
}

impl Shape {
    fn radial_span(&self) -> (f64, f64) {
        match *self {
            Shape::Disc { radius } => (0.0, radius),
            Shape::Annulus { inner, outer } | Shape::Sector { inner, outer, .. } => (inner, outer),
        }
    }

    /// Azimuthal pieces inside `[0, 2 pi)`.
    fn angular_pieces(&self) -> Vec<(f64, f64)> {
        match *self {
            Shape::Sector { start, end, .. } if end - start < TAU => {
                if end <= TAU {
                    vec![(start, end)]
                } else {
                    vec![(start, TAU), (0.0, end - TAU)]
                }
            }
            _ => vec![(0.0, TAU)],
        }
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.radial_span();
        if !(a >= 0.0 && b > a && b.is_finite()) {
            return Err(Error::InvalidInput(format!("electrode radii must satisfy 0 <= inner < outer, got {a}, {b}")));
        }
        if let Shape::Sector { start, end, .. } = *self {
            if !((0.0..TAU).contains(&start) && end > start && end - start <= TAU) {
                return Err(Error::InvalidInput(format!(
                    "sector azimuths must satisfy 0 <= start < 2 pi and start < end <= start + 2 pi, got {start}, {end}"
                )));
            }
        }
        Ok(())
    }

    fn overlaps(&self, other: &Shape) -> bool {
        let (a0, a1) = self.radial_span();
        let (b0, b1) = other.radial_span();
        if a1 <= b0 || b1 <= a0 {
            return false;
        }
        self.angular_pieces()
            .iter()
            .any(|&(p0, p1)| other.angular_pieces().iter().any(|&(q0, q1)| p0 < q1 && q0 < p1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Role {
    Rf,
    /// Static electrode at the given voltage (V).
    Dc(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarElectrode {
    pub name: String,
    pub shape: Shape,
    pub role: Role,
}

impl PlanarElectrode {
    pub fn new(name: impl Into<String>, shape: Shape, role: Role) -> Result<Self> {
        shape.validate()?;
        Ok(Self { name: name.into(), shape, role })
    }
}

/// Electrode pattern; the rest of the plane is grounded.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapGeometry {
    electrodes: Vec<PlanarElectrode>,
}

const UM: f64 = 1e-6;

impl TrapGeometry {
    pub fn new(electrodes: Vec<PlanarElectrode>) -> Result<Self> {
        for (i, a) in electrodes.iter().enumerate() {
            a.shape.validate()?;
            for b in &electrodes[i + 1..] {
                if a.shape.overlaps(&b.shape) {
                    return Err(Error::InvalidInput(format!("electrodes '{}' and '{}' overlap", a.name, b.name)));
                }
            }
        }
        Ok(Self { electrodes })
    }

    /// Three concentric electrodes with outer radii 125, 600 and 1100 um (rf on the
    /// inner and outer ones) and eight 45 degree compensation sectors from 1125 um out
    /// to 3 mm. Each circular electrode extends inwards to its neighbour's outer radius.
    pub fn ring_trap() -> Self {
        let mut e = vec![
            PlanarElectrode::new("rf_inner", Shape::Disc { radius: 125.0 * UM }, Role::Rf).unwrap(),
            PlanarElectrode::new("dc_ring", Shape::Annulus { inner: 125.0 * UM, outer: 600.0 * UM }, Role::Dc(0.0))
                .unwrap(),
            PlanarElectrode::new("rf_outer", Shape::Annulus { inner: 600.0 * UM, outer: 1100.0 * UM }, Role::Rf).unwrap(),
        ];
        for k in 0..8 {
            let start = (45.0 * k as f64).to_radians();
            let end = (45.0 * (k + 1) as f64).to_radians();
            e.push(
                PlanarElectrode::new(
                    format!("comp{k}"),
                    Shape::Sector { inner: 1125.0 * UM, outer: 3000.0 * UM, start, end },
                    Role::Dc(0.0),
                )
                .unwrap(),
            );
        }
        Self::new(e).expect("default pattern is valid")
    }

    pub fn electrodes(&self) -> &[PlanarElectrode] {
        &self.electrodes
    }

    /// Static annular sectors in file order.
    pub fn compensation_electrodes(&self) -> Vec<&PlanarElectrode> {
        self.electrodes
            .iter()
            .filter(|e| matches!(e.role, Role::Dc(_)) && matches!(e.shape, Shape::Sector { .. }))
            .collect()
    }

    pub fn rf_electrodes(&self) -> impl Iterator<Item = &PlanarElectrode> {
        self.electrodes.iter().filter(|e| e.role == Role::Rf)
    }

    /// Copy with every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let electrodes = self
            .electrodes
            .iter()
            .map(|e| PlanarElectrode {
                name: e.name.clone(),
                role: e.role,
                shape: match e.shape {
                    Shape::Disc { radius } => Shape::Disc { radius: radius * s },
                    Shape::Annulus { inner, outer } => Shape::Annulus { inner: inner * s, outer: outer * s },
                    Shape::Sector { inner, outer, start, end } => {
                        Shape::Sector { inner: inner * s, outer: outer * s, start, end }
                    }
                },
            })
            .collect();
        Self { electrodes }
    }
}

impl FromStr for TrapGeometry {
    type Err = Error;

    /// One electrode per line:
    /// `name, shape, r_inner_um, r_outer_um, phi_start_deg, phi_end_deg, role, dc_voltage_V`.
    /// Blank lines and `#` comments are ignored.
    fn from_str(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("geometry line {}: {msg}", ln + 1));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields, found {}", f.len())));
            }
            let num = |i: usize| -> Result<f64> {
                f[i].parse::<f64>().map_err(|_| bad(format!("field {} is not a number: '{}'", i + 1, f[i])))
            };
            let (r0, r1) = (num(2)? * UM, num(3)? * UM);
            let (p0, p1) = (num(4)?.to_radians(), num(5)?.to_radians());
            let shape = match f[1].to_ascii_lowercase().as_str() {
                "disc" => Shape::Disc { radius: r1 },
                "annulus" => Shape::Annulus { inner: r0, outer: r1 },
                "sector" => Shape::Sector { inner: r0, outer: r1, start: p0, end: p1 },
                other => return Err(bad(format!("unknown shape '{other}'"))),
            };
            let role = match f[6].to_ascii_lowercase().as_str() {
                "rf" => Role::Rf,
                "dc" => Role::Dc(num(7)?),
                other => return Err(bad(format!("unknown role '{other}'"))),
            };
            out.push(PlanarElectrode::new(f[0], shape, role).map_err(|e| bad(e.to_string()))?);
        }
        if out.is_empty() {
            return Err(Error::Config("geometry file lists no electrodes".into()));
        }
        TrapGeometry::new(out).map_err(|e| Error::Config(e.to_string()))
    }
}

impl fmt::Display for TrapGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.electrodes {
            let (shape, r0, r1, p0, p1) = match e.shape {
                Shape::Disc { radius } => ("disc", 0.0, radius, 0.0, 360.0),
                Shape::Annulus { inner, outer } => ("annulus", inner, outer, 0.0, 360.0),
                Shape::Sector { inner, outer, start, end } => ("sector", inner, outer, start.to_degrees(), end.to_degrees()),
            };
            let (role, v) = match e.role {
                Role::Rf => ("rf", 0.0),
                Role::Dc(v) => ("dc", v),
            };
            writeln!(f, "{}, {shape}, {}, {}, {p0}, {p1}, {role}, {v}", e.name, r0 / UM, r1 / UM)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapDrive {
    /// rf amplitude (V).
    pub amplitude: f64,
    /// rf angular frequency (rad/s).
    pub omega: f64,
}

impl TrapDrive {
    pub fn new(amplitude: f64, omega: f64) -> Result<Self> {
        if !(amplitude > 0.0 && omega > 0.0 && amplitude.is_finite() && omega.is_finite()) {
            return Err(Error::InvalidInput(format!("rf drive needs positive amplitude and frequency, got {amplitude} V, {omega} rad/s")));
        }
        Ok(Self { amplitude, omega })
    }
}

impl Default for TrapDrive {
    fn default() -> Self {
        Self { amplitude: crate::consts::DEFAULT_RF_AMPLITUDE, omega: crate::consts::DEFAULT_RF_OMEGA }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Absolute tolerance on the unit-voltage potential (and on its gradient times the
    /// height above the plane).
    pub tolerance: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_intervals: 4000 }
    }
}

fn check_height(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("evaluation point must lie above the plane, got z = {z}")))
    }
}

/// Potential of a unit-voltage disc of radius `a` in a grounded plane.
pub fn disc_potential(r: f64, z: f64, a: f64) -> Result<f64> {
    check_height(z)?;
    Ok(disc_raw(r, z, a).0)
}

/// `(phi, d phi / dr, d phi / dz)` for a unit disc.
pub fn disc_with_gradient(r: f64, z: f64, a: f64) -> Result<(f64, f64, f64)> {
    check_height(z)?;
    Ok(disc_raw(r, z, a))
}

fn disc_raw(r: f64, z: f64, a: f64) -> (f64, f64, f64) {
    // The potential is the solid angle of the disc over 2 pi; its gradient is the
    // field of a current loop on the disc rim.
    let r = r.abs();
    let d = (r - a) * (r - a) + z * z;
    let q = (r + a) * (r + a) + z * z;
    let rmax = q.sqrt();
    let mc = d / q;
    let (k, e) = elliptic::complete(mc);
    let cone = 2.0 * z * k / rmax;
    let xi = z.atan2((a - r).abs());
    let omega = if r < a {
        TAU - cone - PI * elliptic::heuman_lambda(xi, mc)
    } else if r > a {
        PI * elliptic::heuman_lambda(xi, mc) - cone
    } else {
        PI - cone
    };
    let dz = -(k + (a * a - r * r - z * z) / d * e) / (PI * rmax);
    let dr = if r > 0.0 { -z * (-k + (a * a + r * r + z * z) / d * e) / (PI * r * rmax) } else { 0.0 };
    (omega / TAU, dr, dz)
}

// Gauss-Kronrod 7/15 nodes and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

type Vals = [f64; 4];

fn gk15(f: &mut dyn FnMut(f64) -> Result<Vals>, a: f64, b: f64) -> Result<(Vals, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; 4];
    let mut g = [0.0; 4];
    let fc = f(c)?;
    for m in 0..4 {
        k[m] = WGK[7] * fc[m];
        g[m] = WG[3] * fc[m];
    }
    for j in 0..7 {
        let f1 = f(c - h * XGK[j])?;
        let f2 = f(c + h * XGK[j])?;
        for m in 0..4 {
            k[m] += WGK[j] * (f1[m] + f2[m]);
            if j % 2 == 1 {
                g[m] += WG[j / 2] * (f1[m] + f2[m]);
            }
        }
    }
    let mut err = 0.0f64;
    for m in 0..4 {
        k[m] *= h;
        g[m] *= h;
        err = err.max((k[m] - g[m]).abs());
    }
    Ok((k, err))
}

/// Globally adaptive GK15 on `[a, b]` until the summed error estimate is below `tol`.
fn adaptive(f: &mut dyn FnMut(f64) -> Result<Vals>, a: f64, b: f64, tol: f64, max_intervals: usize) -> Result<Vals> {
    let (v, e) = gk15(f, a, b)?;
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= tol {
            break;
        }
        if parts.len() >= max_intervals {
            return Err(Error::Quadrature { estimate: total_err, tolerance: tol });
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::Quadrature { estimate: total_err, tolerance: tol });
        }
        let (v1, e1) = gk15(f, lo, mid)?;
        let (v2, e2) = gk15(f, mid, hi)?;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    let mut out = [0.0; 4];
    for p in &parts {
        for (o, x) in out.iter_mut().zip(&p.2) {
            *o += x;
        }
    }
    Ok(out)
}

/// Potential and gradient of a unit-voltage patch `inner <= rho <= outer`,
/// `start <= phi <= end`, by quadrature of the plane Green's function kernel.
fn patch_quadrature(p: &Vector3<f64>, inner: f64, outer: f64, start: f64, end: f64, opts: &QuadratureOptions) -> Result<Vals> {
    let (x, y, z) = (p.x, p.y, p.z);
    check_height(z)?;
    let width = end - start;
    // Gradient components are scaled by z so that every component is dimensionless.
    let tol_inner = 0.1 * opts.tolerance / width;
    let mut outer_fn = |phi: f64| -> Result<Vals> {
        let (s, c) = phi.sin_cos();
        let mut inner_fn = |rho: f64| -> Result<Vals> {
            let dx = x - rho * c;
            let dy = y - rho * s;
            let d2 = dx * dx + dy * dy + z * z;
            let d = d2.sqrt();
            let k = rho / (TAU * d2 * d);
            let k5 = 3.0 * k / d2;
            Ok([z * k, -z * z * k5 * dx, -z * z * k5 * dy, z * (k - z * z * k5)])
        };
        adaptive(&mut inner_fn, inner, outer, tol_inner, opts.max_intervals)
    };
    let v = adaptive(&mut outer_fn, start, end, opts.tolerance, opts.max_intervals)?;
    Ok([v[0], v[1] / z, v[2] / z, v[3] / z])
}

/// Unit-voltage potential of an electrode at `point` (m).
pub fn patch_potential(point: &Vector3<f64>, electrode: &PlanarElectrode, opts: &QuadratureOptions) -> Result<f64> {
    Ok(potential_and_gradient(point, &electrode.shape, opts)?.0)
}

/// Gradient of the unit-voltage potential (1/m).
pub fn patch_gradient(point: &Vector3<f64>, electrode: &PlanarElectrode, opts: &QuadratureOptions) -> Result<Vector3<f64>> {
    Ok(potential_and_gradient(point, &electrode.shape, opts)?.1)
}

fn potential_and_gradient(p: &Vector3<f64>, shape: &Shape, opts: &QuadratureOptions) -> Result<(f64, Vector3<f64>)> {
    check_height(p.z)?;
    let r = p.x.hypot(p.y);
    let disc = |a: f64| {
        let (v, dr, dz) = disc_raw(r, p.z, a);
        let (cx, cy) = if r > 0.0 { (p.x / r, p.y / r) } else { (0.0, 0.0) };
        (v, Vector3::new(dr * cx, dr * cy, dz))
    };
    match *shape {
        Shape::Disc { radius } => Ok(disc(radius)),
        Shape::Annulus { inner, outer } => {
            let (vo, go) = disc(outer);
            if inner == 0.0 {
                return Ok((vo, go));
            }
            let (vi, gi) = disc(inner);
            Ok((vo - vi, go - gi))
        }
        Shape::Sector { inner, outer, start, end } if end - start >= TAU => {
            potential_and_gradient(p, &Shape::Annulus { inner, outer }, opts)
        }
        Shape::Sector { inner, outer, start, end } => {
            let v = patch_quadrature(p, inner, outer, start, end, opts)?;
            Ok((v[0], Vector3::new(v[1], v[2], v[3])))
        }
    }
}

/// rf potential amplitude (V) at `point`.
pub fn rf_potential(point: &Vector3<f64>, geometry: &TrapGeometry, drive: &TrapDrive) -> Result<f64> {
    let opts = QuadratureOptions::default();
    let mut v = 0.0;
    for e in geometry.rf_electrodes() {
        v += potential_and_gradient(point, &e.shape, &opts)?.0;
    }
    Ok(drive.amplitude * v)
}

/// rf electric-field amplitude (V/m) at `point`.
pub fn rf_field(point: &Vector3<f64>, geometry: &TrapGeometry, drive: &TrapDrive) -> Result<Vector3<f64>> {
    let opts = QuadratureOptions::default();
    let mut g = Vector3::zeros();
    for e in geometry.rf_electrodes() {
        g += potential_and_gradient(point, &e.shape, &opts)?.1;
    }
    Ok(-drive.amplitude * g)
}

/// Static field (V/m) of the dc electrodes at their set voltages.
pub fn dc_field(point: &Vector3<f64>, geometry: &TrapGeometry, opts: &QuadratureOptions) -> Result<Vector3<f64>> {
    let mut g = Vector3::zeros();
    for e in geometry.electrodes() {
        if let Role::Dc(v) = e.role {
            if v != 0.0 {
                g -= v * potential_and_gradient(point, &e.shape, opts)?.1;
            }
        }
    }
    Ok(g)
}

/// Time-averaged pseudopotential energy (J).
pub fn pseudopotential(point: &Vector3<f64>, geometry: &TrapGeometry, drive: &TrapDrive, mass: f64) -> Result<f64> {
    let e = rf_field(point, geometry, drive)?;
    Ok(pseudo_from_field(&e, drive, mass))
}

fn pseudo_from_field(e: &Vector3<f64>, drive: &TrapDrive, mass: f64) -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * e.norm_squared() / (4.0 * mass * drive.omega * drive.omega)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingMinimum {
    /// Ring radius (m).
    pub radius: f64,
    /// Height above the plane (m).
    pub height: f64,
    /// In-plane radial secular frequency (rad/s).
    pub omega_radial: f64,
    /// Vertical secular frequency (rad/s).
    pub omega_vertical: f64,
    /// rf field amplitude left at the minimum (V/m).
    pub residual_field: f64,
}

/// rf field in the (r, z) half plane for a unit drive.
fn field_rz(geometry: &TrapGeometry, r: f64, z: f64) -> Result<Vector2<f64>> {
    let e = rf_field(&Vector3::new(r, 0.0, z), geometry, &TrapDrive { amplitude: 1.0, omega: 1.0 })?;
    Ok(Vector2::new(e.x, e.z))
}

/// Position `(r, z)` of the rf field null, independent of drive strength.
pub fn rf_null(geometry: &TrapGeometry) -> Result<(f64, f64)> {
    if geometry.rf_electrodes().next().is_none() {
        return Err(Error::NoTrapMinimum("geometry has no rf electrode".into()));
    }
    let extent = geometry
        .electrodes()
        .iter()
        .filter(|e| e.role == Role::Rf)
        .map(|e| e.shape.radial_span().1)
        .fold(0.0f64, f64::max);
    // Coarse search of |E|^2 on a grid, then Gauss-Newton on E = 0.
    let (nr, nz) = (80usize, 80usize);
    let (rmax, zmin, zmax) = (1.5 * extent, 0.01 * extent, 1.5 * extent);
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for i in 0..=nr {
        for j in 0..=nz {
            let r = rmax * i as f64 / nr as f64;
            let z = zmin + (zmax - zmin) * j as f64 / nz as f64;
            // Weight by z^2 so the growth of |E| towards electrode edges does not dominate.
            let v = field_rz(geometry, r, z)?.norm_squared() * z * z;
            if v < best.0 {
                best = (v, i, j);
            }
        }
    }
    if best.2 == 0 || best.2 == nz || best.1 == nr {
        return Err(Error::NoTrapMinimum("no field null inside the search window above the plane".into()));
    }
    let mut x = Vector2::new(rmax * best.1 as f64 / nr as f64, zmin + (zmax - zmin) * best.2 as f64 / nz as f64);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let f = field_rz(geometry, x[0], x[1])?;
        let h = 1e-6 * x[1];
        let mut jac = Matrix2::zeros();
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let d = (field_rz(geometry, xp[0].abs(), xp[1])? - field_rz(geometry, xm[0].abs(), xm[1])?) / (2.0 * h);
            jac.set_column(k, &d);
        }
        let jtj = jac.transpose() * jac;
        let jtf = jac.transpose() * f;
        let mut stepped = false;
        for _ in 0..30 {
            let a = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda;
            let Some(inv) = a.try_inverse() else { break };
            let xn = x - inv * jtf;
            if xn[1] > 0.0 {
                let fnew = field_rz(geometry, xn[0].abs(), xn[1])?;
                if fnew.norm() < f.norm() {
                    x = Vector2::new(xn[0].abs(), xn[1]);
                    lambda = (lambda * 0.3).max(1e-12);
                    stepped = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !stepped || f.norm() * x[1] < 1e-15 {
            break;
        }
    }
    if x[1] <= 0.0 {
        return Err(Error::NoTrapMinimum("field null search left the half space above the plane".into()));
    }
    Ok((x[0], x[1]))
}

/// Pseudopotential minimum in the (r, z) plane with its secular frequencies.
pub fn find_ring_minimum(geometry: &TrapGeometry, drive: &TrapDrive, mass: f64) -> Result<RingMinimum> {
    if !(mass > 0.0) {
        return Err(Error::InvalidInput(format!("ion mass must be positive, got {mass}")));
    }
    let (r0, z0) = rf_null(geometry)?;
    let psi = |r: f64, z: f64| -> Result<f64> {
        pseudopotential(&Vector3::new(r, 0.0, z), geometry, drive, mass)
    };
    // Central second differences. On the axis the radial direction folds back onto
    // itself, which the even extension r -> |r| handles.
    let h = 1e-3 * z0;
    let f = |dr: f64, dz: f64| psi((r0 + dr).abs(), z0 + dz);
    let f00 = f(0.0, 0.0)?;
    let hrr = (f(h, 0.0)? - 2.0 * f00 + f(-h, 0.0)?) / (h * h);
    let hzz = (f(0.0, h)? - 2.0 * f00 + f(0.0, -h)?) / (h * h);
    let hrz = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
    let eig = SymmetricEigen::new(Matrix2::new(hrr, hrz, hrz, hzz));
    let omega = |k: usize| (eig.eigenvalues[k].max(0.0) / mass).sqrt();
    // The eigenvector with the larger r component is the radial mode.
    let radial = usize::from(eig.eigenvectors[(0, 1)].abs() > eig.eigenvectors[(0, 0)].abs());
    if eig.eigenvalues.iter().any(|l| *l <= 0.0) {
        return Err(Error::NoTrapMinimum(format!("pseudopotential curvature not positive at r = {r0}, z = {z0}")));
    }
    Ok(RingMinimum {
        radius: r0,
        height: z0,
        omega_radial: omega(radial),
        omega_vertical: omega(1 - radial),
        residual_field: rf_field(&Vector3::new(r0, 0.0, z0), geometry, drive)?.norm(),
    })
}

/// Field (V/m per volt) at `(0, 0, z0)` of each compensation electrode, one column per
/// electrode in geometry order. `z0` is the height of the rf null.
pub fn compensation_response(geometry: &TrapGeometry, opts: &QuadratureOptions) -> Result<DMatrix<f64>> {
    let (_, z0) = rf_null(geometry)?;
    compensation_response_at(geometry, &Vector3::new(0.0, 0.0, z0), opts)
}

pub fn compensation_response_at(geometry: &TrapGeometry, point: &Vector3<f64>, opts: &QuadratureOptions) -> Result<DMatrix<f64>> {
    let comp = geometry.compensation_electrodes();
    if comp.is_empty() {
        return Err(Error::InvalidInput("geometry has no compensation sectors".into()));
    }
    let mut m = DMatrix::zeros(3, comp.len());
    for (k, e) in comp.iter().enumerate() {
        let g = potential_and_gradient(point, &e.shape, opts)?.1;
        m.set_column(k, &(-g));
    }
    Ok(m)
}

/// Minimum-norm voltages `v` with `response * v = -stray`.
pub fn solve_compensation(stray: &Vector3<f64>, response: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = response.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-10 * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let target = DVector::from_column_slice((-stray).as_slice());
    let v = svd.solve(&target, cutoff).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let residual = (response * &v - &target).norm();
    // Uniform, cosine and sine patterns span all three components.
    if rank < response.nrows().min(3) {
        return Err(Error::RankDeficient { rank, residual });
    }
    Ok(v)
}
