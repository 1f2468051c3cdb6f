//! Doppler thermometry on a narrow optical line.
//!
//! A thermal velocity distribution broadens the line into a Gaussian whose full width is
//! `FWHM = (1/lambda) sqrt(8 ln2 kB T / m)`.

use crate::consts::BOLTZMANN;
use crate::{Error, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}

/// Gaussian FWHM (Hz) of a line at `wavelength` (m) for ions of `mass` (kg) at `temperature` (K).
///
/// `temperature = 0` gives zero width.
pub fn fwhm_from_temperature(temperature: f64, wavelength: f64, mass: f64) -> Result<f64> {
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidInput(format!("temperature must be non-negative, got {temperature}")));
    }
    check_positive("wavelength", wavelength)?;
    check_positive("mass", mass)?;
    Ok((8.0 * std::f64::consts::LN_2 * BOLTZMANN * temperature / mass).sqrt() / wavelength)
}

/// Temperature (K) inferred from a measured Doppler FWHM (Hz).
pub fn doppler_temperature(fwhm: f64, wavelength: f64, mass: f64) -> Result<f64> {
    check_positive("fwhm", fwhm)?;
    check_positive("wavelength", wavelength)?;
    check_positive("mass", mass)?;
    let v = fwhm * wavelength;
    Ok(mass * v * v / (8.0 * std::f64::consts::LN_2 * BOLTZMANN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::MASS_CA40_ION;

    #[test]
    fn three_millikelvin_calcium() {
        let f = fwhm_from_temperature(3e-3, 729e-9, MASS_CA40_ION).unwrap();
        assert!((f - 2.55e6).abs() < 0.01e6, "{f}");
        assert_eq!(fwhm_from_temperature(0.0, 729e-9, MASS_CA40_ION).unwrap(), 0.0);
        let f4 = fwhm_from_temperature(12e-3, 729e-9, MASS_CA40_ION).unwrap();
        assert!((f4 / f - 2.0).abs() < 1e-14);
    }

    #[test]
    fn round_trip() {
        for t in [1e-6, 3e-3, 0.5, 300.0] {
            let f = fwhm_from_temperature(t, 729e-9, MASS_CA40_ION).unwrap();
            let back = doppler_temperature(f, 729e-9, MASS_CA40_ION).unwrap();
            assert!((back - t).abs() <= 1e-12 * t);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(doppler_temperature(0.0, 729e-9, MASS_CA40_ION).is_err());
        assert!(doppler_temperature(1e6, -1.0, MASS_CA40_ION).is_err());
        assert!(fwhm_from_temperature(-1.0, 729e-9, MASS_CA40_ION).is_err());
        assert!(fwhm_from_temperature(1e-3, 729e-9, 0.0).is_err());
    }
}
