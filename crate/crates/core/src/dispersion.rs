//! Dispersion of the guided mode, `ω² = ω_c² + (ck)²`, and the velocities
//! derived from it. Natural units, so `c = 1` throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle::Particle;

/// Axial wavenumber: real for propagating waves, or the decay constant `κ`
/// of an evanescent wave (`k = iκ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Wavenumber {
    Real(f64),
    Evanescent(f64),
}

impl Wavenumber {
    pub fn real(&self) -> Option<f64> {
        match *self {
            Wavenumber::Real(k) => Some(k),
            Wavenumber::Evanescent(_) => None,
        }
    }

    pub fn is_evanescent(&self) -> bool {
        matches!(self, Wavenumber::Evanescent(_))
    }

    /// `k` as a complex number, `iκ` in the evanescent case.
    pub fn as_complex(&self) -> num_complex::Complex64 {
        match *self {
            Wavenumber::Real(k) => num_complex::Complex64::new(k, 0.0),
            Wavenumber::Evanescent(kappa) => num_complex::Complex64::new(0.0, kappa),
        }
    }
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if cutoff > 0.0 && cutoff.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveCutoff(cutoff))
    }
}

pub fn omega_of_k(k: f64, cutoff: f64) -> Result<f64> {
    check_cutoff(cutoff)?;
    Ok(cutoff.hypot(k))
}

pub fn k_of_omega(omega: f64, cutoff: f64) -> Result<Wavenumber> {
    check_cutoff(cutoff)?;
    // factored form keeps precision close to cutoff
    let diff = (omega - cutoff) * (omega + cutoff);
    Ok(if diff >= 0.0 {
        Wavenumber::Real(diff.sqrt())
    } else {
        Wavenumber::Evanescent((-diff).sqrt())
    })
}

/// `v_g = c²k/ω`.
pub fn group_velocity(omega: f64, k: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("ω must be positive, got {omega}")));
    }
    Ok(k / omega)
}

/// `v_ph = ω/k`; infinite at the cutoff, reported as its own error.
pub fn phase_velocity(omega: f64, k: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("ω must be positive, got {omega}")));
    }
    if k == 0.0 {
        return Err(Error::InfinitePhaseVelocity);
    }
    Ok(omega / k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub omega: f64,
    pub k: Wavenumber,
    pub group_velocity: Option<f64>,
    pub phase_velocity: Option<f64>,
}

impl DispersionPoint {
    pub fn from_k(k: f64, cutoff: f64) -> Result<Self> {
        let omega = omega_of_k(k, cutoff)?;
        Ok(Self::assemble(omega, Wavenumber::Real(k.abs())))
    }

    pub fn from_omega(omega: f64, cutoff: f64) -> Result<Self> {
        let k = k_of_omega(omega, cutoff)?;
        Ok(Self::assemble(omega, k))
    }

    fn assemble(omega: f64, k: Wavenumber) -> Self {
        let (group_velocity, phase_velocity) = match k {
            Wavenumber::Real(k) => (group_velocity(omega, k).ok(), phase_velocity(omega, k).ok()),
            Wavenumber::Evanescent(_) => (None, None),
        };
        Self {
            omega,
            k,
            group_velocity,
            phase_velocity,
        }
    }
}

/// Low-velocity approximation of the dispersion next to the exact relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchrodingerDispersion {
    pub omega_approx: f64,
    pub omega_exact: f64,
    pub relative_error: f64,
}

/// `ħω = ħω₀ + V + (cħk)²/(2ħω₀)` compared against `ω² = (ω₀ + V/ħ)² + (ck)²`.
pub fn schrodinger_dispersion(particle: &Particle, k: f64, potential: f64) -> Result<SchrodingerDispersion> {
    let rest = particle.rest_frequency();
    let omega_approx = rest + potential + k * k / (2.0 * rest);
    let cutoff = crate::geometry::cutoff_with_potential(particle, potential)?;
    let omega_exact = omega_of_k(k, cutoff)?;
    Ok(SchrodingerDispersion {
        omega_approx,
        omega_exact,
        relative_error: (omega_approx - omega_exact).abs() / omega_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn omega_of_k_examples() {
        assert_eq!(omega_of_k(0.0, 1.0).unwrap(), 1.0);
        assert!((omega_of_k(1.0, 1.0).unwrap() - SQRT_2).abs() < 1e-15);
        let k = 1e6;
        assert!((omega_of_k(k, 1.0).unwrap() / k - 1.0).abs() < 1e-6);
        assert_eq!(omega_of_k(1.0, 0.0), Err(Error::NonPositiveCutoff(0.0)));
        assert!(omega_of_k(1.0, -2.0).is_err());
    }

    #[test]
    fn k_of_omega_examples() {
        assert_eq!(k_of_omega(1.0, 1.0).unwrap(), Wavenumber::Real(0.0));
        let k = k_of_omega(SQRT_2, 1.0).unwrap().real().unwrap();
        assert!((k - 1.0).abs() < 1e-15);
        match k_of_omega(0.8, 1.0).unwrap() {
            Wavenumber::Evanescent(kappa) => assert!((kappa - 0.6).abs() < 1e-15),
            other => panic!("expected evanescent, got {other:?}"),
        }
    }

    #[test]
    fn velocity_examples() {
        assert_eq!(group_velocity(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(phase_velocity(1.0, 0.0), Err(Error::InfinitePhaseVelocity));
        let vg = group_velocity(SQRT_2, 1.0).unwrap();
        let vph = phase_velocity(SQRT_2, 1.0).unwrap();
        assert!((vg - 1.0 / SQRT_2).abs() < 1e-15);
        assert!((vph - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn dispersion_point_at_cutoff_has_no_phase_velocity() {
        let p = DispersionPoint::from_omega(1.0, 1.0).unwrap();
        assert_eq!(p.group_velocity, Some(0.0));
        assert_eq!(p.phase_velocity, None);
        let below = DispersionPoint::from_omega(0.5, 1.0).unwrap();
        assert!(below.k.is_evanescent());
        assert_eq!(below.group_velocity, None);
    }

    #[test]
    fn schrodinger_approximation_examples() {
        let e = Particle::electron();
        let rest = schrodinger_dispersion(&e, 0.0, 0.0).unwrap();
        assert_eq!(rest.relative_error, 0.0);

        // k chosen so that the exact group velocity is 0.01 c: k = γ m v
        let at = |beta: f64| {
            let k = beta / (1.0 - beta * beta).sqrt();
            schrodinger_dispersion(&e, k, 0.0).unwrap().relative_error
        };
        assert!(at(0.01) < 1e-8);
        // leading Taylor term of the difference is (v/c)^4/8
        assert!((at(0.01) / (0.01f64.powi(4) / 8.0) - 1.0).abs() < 0.05);
        assert!(at(0.5) > 1e-2);
    }

    proptest! {
        #[test]
        fn round_trip_over_six_decades(log_k in -2.0f64..4.0, cutoff in 0.1f64..10.0) {
            let k = cutoff * 10f64.powf(log_k);
            let omega = omega_of_k(k, cutoff).unwrap();
            let back = k_of_omega(omega, cutoff).unwrap().real().unwrap();
            prop_assert!((back - k).abs() <= 1e-10 * k);
        }

        #[test]
        fn velocity_product_is_c_squared(k in 1e-6f64..1e6, cutoff in 1e-3f64..1e3) {
            let omega = omega_of_k(k, cutoff).unwrap();
            let vg = group_velocity(omega, k).unwrap();
            let vph = phase_velocity(omega, k).unwrap();
            prop_assert!((vg * vph - 1.0).abs() <= 1e-12);
            prop_assert!(vg < 1.0);
        }

        #[test]
        fn approximation_error_grows_with_speed(beta in 1e-3f64..0.9) {
            let e = Particle::electron();
            let err = |b: f64| {
                let k = b / (1.0 - b * b).sqrt();
                schrodinger_dispersion(&e, k, 0.0).unwrap().relative_error
            };
            prop_assert!(err(beta * 1.01) > err(beta));
        }
    }
}
