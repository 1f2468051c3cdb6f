//! Physical constants (CODATA 2018) and the default operating point of the ring trap.

use std::f64::consts::PI;

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Unified atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of the singly charged calcium-40 ion (kg): atomic mass minus one electron.
pub const MASS_CA40_ION: f64 = 39.962_590_863 * ATOMIC_MASS_UNIT - 9.109_383_701_5e-31;

/// Coulomb constant 1/(4 pi eps0) times e^2, in J m.
pub const COULOMB_E2: f64 =
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * PI * VACUUM_PERMITTIVITY);

/// Bundle of the constants used by the model.
///
/// All values are fixed; the struct exists so callers can pass a single value around
/// and so tests can check the invariants in one place.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysConsts {
    pub elementary_charge: f64,
    pub vacuum_permittivity: f64,
    pub boltzmann: f64,
    pub mass_ca40: f64,
}

impl PhysConsts {
    pub const CODATA: PhysConsts = PhysConsts {
        elementary_charge: ELEMENTARY_CHARGE,
        vacuum_permittivity: VACUUM_PERMITTIVITY,
        boltzmann: BOLTZMANN,
        mass_ca40: MASS_CA40_ION,
    };
}

impl Default for PhysConsts {
    fn default() -> Self {
        Self::CODATA
    }
}

/// Default ring diameter (m).
pub const DEFAULT_DIAMETER: f64 = 90e-6;
/// Default in-plane radial trap frequency (rad/s).
pub const DEFAULT_RADIAL_OMEGA: f64 = 2.0 * PI * 390e3;
/// Default rf amplitude (V).
pub const DEFAULT_RF_AMPLITUDE: f64 = 220.0;
/// Default rf drive angular frequency (rad/s).
pub const DEFAULT_RF_OMEGA: f64 = 2.0 * PI * 5.81e6;
/// Default tangential temperature (K).
pub const DEFAULT_TEMPERATURE: f64 = 3e-3;
/// Default Doppler-cooling friction rate (1/s).
pub const DEFAULT_FRICTION: f64 = 1e4;

/// Converts an energy in joules to its temperature equivalent in millikelvin.
pub fn joule_to_millikelvin(energy: f64) -> f64 {
    energy / BOLTZMANN * 1e3
}

/// Converts a temperature in millikelvin to an energy in joules.
pub fn millikelvin_to_joule(temperature_mk: f64) -> f64 {
    temperature_mk * 1e-3 * BOLTZMANN
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_positive() {
        let c = PhysConsts::default();
        assert!(c.elementary_charge > 0.0);
        assert!(c.vacuum_permittivity > 0.0);
        assert!(c.boltzmann > 0.0);
        assert!(c.mass_ca40 > 0.0);
    }

    #[test]
    fn calcium_mass_in_amu() {
        let amu = MASS_CA40_ION / ATOMIC_MASS_UNIT;
        assert!((amu - 39.9626).abs() < 1e-3, "{amu}");
    }

    #[test]
    fn temperature_roundtrip() {
        let e = millikelvin_to_joule(6.0);
        assert!((joule_to_millikelvin(e) - 6.0).abs() < 1e-12);
    }
}
