//! Tangential normal modes from the quadratic expansion of the ring potential.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::equilibrium::{find_equilibrium, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::model::{ring_gradient, ring_hessian, CrystalState1D, InPlaneField, RingSpec};

/// Modes below this angular frequency (rad/s) count as zero modes.
pub const ZERO_MODE_OMEGA: f64 = TAU * 10.0;

/// Gradient norm, relative to the Coulomb scale, above which a state is not treated as an equilibrium.
const EQUILIBRIUM_WARN: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpectrum {
    /// Signed angular frequencies (rad/s), ascending. Negative entries are imaginary
    /// frequencies `-sqrt(|lambda|/m)` of unstable directions.
    pub omegas: Vec<f64>,
    /// Orthonormal mode vectors (columns) in mass-weighted arc-length coordinates.
    pub vectors: DMatrix<f64>,
    pub zero_modes: usize,
    /// Number of eigenvalues below `-tolerance`: the configuration is a saddle.
    pub unstable_modes: usize,
    /// Set when the input state was not a stationary point.
    pub off_equilibrium: bool,
}

impl ModeSpectrum {
    pub fn is_stable(&self) -> bool {
        self.unstable_modes == 0
    }

    /// Lowest frequency that is neither a zero mode nor unstable (rad/s).
    pub fn lowest_nonzero(&self) -> Option<f64> {
        self.omegas.iter().copied().find(|w| *w >= ZERO_MODE_OMEGA)
    }

    pub fn max_omega(&self) -> f64 {
        self.omegas.iter().fold(0.0f64, |m, w| m.max(w.abs()))
    }
}

/// Normal modes of the tangential motion around `state`.
pub fn tangential_modes(state: &CrystalState1D, ring: &RingSpec, field: &InPlaneField) -> Result<ModeSpectrum> {
    let grad = ring_gradient(state, ring, field)?;
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let hess = ring_hessian(state, ring, field)?;
    // theta -> arc length s = R theta, then mass weighting.
    let r = ring.radius();
    let dyn_matrix = hess / (r * r * ring.ion_mass);
    let eig = SymmetricEigen::new(dyn_matrix);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * top;

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = order.len();
    let mut vectors = DMatrix::zeros(n, n);
    let mut omegas = Vec::with_capacity(n);
    let mut unstable = 0;
    for (k, &i) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        let mut v = eig.eigenvectors.column(i).into_owned();
        // Fix the sign so the largest component is positive.
        let (imax, _) = v.iter().enumerate().fold((0, 0.0f64), |acc, (j, x)| {
            if x.abs() > acc.1 + 1e-12 { (j, x.abs()) } else { acc }
        });
        if v[imax] < 0.0 {
            v = -v;
        }
        vectors.set_column(k, &v);
        if lambda < -tol {
            unstable += 1;
        }
        omegas.push(lambda.signum() * lambda.abs().sqrt());
    }
    let zero_modes = omegas.iter().filter(|w| w.abs() < ZERO_MODE_OMEGA).count();
    Ok(ModeSpectrum {
        omegas,
        vectors,
        zero_modes,
        unstable_modes: unstable,
        off_equilibrium: gnorm > EQUILIBRIUM_WARN * ring.coulomb_scale(),
    })
}

/// Lowest non-zero collective tangential frequency at equilibrium (Hz).
pub fn lowest_tangential_frequency(ring: &RingSpec, field: &InPlaneField, opts: &EquilibriumOptions) -> Result<f64> {
    if field.is_zero() {
        return Ok(0.0);
    }
    let eq = find_equilibrium(ring, field, opts)?;
    if !eq.converged {
        return Err(Error::NotConverged {
            iterations: eq.iterations,
            gradient_norm: eq.gradient_norm,
        });
    }
    let spectrum = tangential_modes(&eq.state, ring, field)?;
    spectrum.lowest_nonzero()
        .map(|w| w / TAU)
        .ok_or_else(|| Error::InvalidInput("no non-zero tangential mode".into()))
}

/// One row of a frequency sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub ions: usize,
    pub field: InPlaneField,
    pub lowest_hz: f64,
    pub zero_modes: usize,
}

/// Lowest tangential frequency over a list of `(N, field)` points.
pub fn frequency_sweep(
    diameter: f64,
    mass: f64,
    points: &[(usize, InPlaneField)],
    opts: &EquilibriumOptions,
) -> Result<Vec<SweepPoint>> {
    points
        .iter()
        .map(|&(n, field)| {
            let ring = RingSpec::new(diameter, mass, n)?;
            let eq = find_equilibrium(&ring, &field, opts)?;
            if !eq.converged {
                return Err(Error::ScanFailed {
                    ions: n,
                    source: Box::new(Error::NotConverged {
                        iterations: eq.iterations,
                        gradient_norm: eq.gradient_norm,
                    }),
                });
            }
            let spectrum = tangential_modes(&eq.state, &ring, &field)?;
            Ok(SweepPoint {
                ions: n,
                field,
                lowest_hz: spectrum.lowest_nonzero().map_or(0.0, |w| w / TAU),
                zero_modes: spectrum.zero_modes,
            })
        })
        .collect()
}
