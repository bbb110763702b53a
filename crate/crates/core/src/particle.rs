use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A particle species in natural electron units (`c = ħ = 1`, mass in
/// electron masses).
///
/// With `c = ħ = 1` the rest energy and the rest angular frequency coincide
/// numerically with the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    rest_mass: f64,
}

impl Particle {
    pub fn new(rest_mass: f64) -> Result<Self> {
        if !(rest_mass.is_finite() && rest_mass > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rest mass must be positive and finite, got {rest_mass}"
            )));
        }
        Ok(Self { rest_mass })
    }

    pub fn electron() -> Self {
        Self { rest_mass: 1.0 }
    }

    pub fn rest_mass(&self) -> f64 {
        self.rest_mass
    }

    /// `E₀ = m₀c²`.
    pub fn rest_energy(&self) -> f64 {
        self.rest_mass
    }

    /// `ω₀ = m₀c²/ħ`.
    pub fn rest_frequency(&self) -> f64 {
        self.rest_mass
    }

    /// `λ_C = h/(m₀c)`.
    pub fn compton_wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.rest_mass
    }
}

impl Default for Particle {
    fn default() -> Self {
        Self::electron()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{si, UnitSystem};

    #[test]
    fn compton_times_rest_frequency_is_two_pi_c() {
        for m in [0.5, 1.0, 1836.15] {
            let p = Particle::new(m).unwrap();
            let product = p.compton_wavelength() * p.rest_frequency();
            assert!((product - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        }
    }

    #[test]
    fn electron_compton_wavelength_in_metres() {
        let lambda = UnitSystem::SI.length_out(Particle::electron().compton_wavelength());
        let expected = si::PLANCK / (si::ELECTRON_MASS * si::SPEED_OF_LIGHT);
        assert!((lambda / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(Particle::new(0.0).is_err());
        assert!(Particle::new(-1.0).is_err());
        assert!(Particle::new(f64::NAN).is_err());
    }
}
