//! Mapping from a potential to the width of the equivalent guide.
//!
//! A potential raises the local cutoff to `ω₀ᵥ = ω₀ + V/ħ`, and the TE₁₀ width
//! follows from `a·ω₀ᵥ = πc`. With `V = 0` the width is half a Compton
//! wavelength.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dispersion::{k_of_omega, Wavenumber};
use crate::error::{Error, Result};
use crate::grid::{derivative, UniformGrid};
use crate::particle::Particle;
use crate::profile::PotentialProfile;

pub fn cutoff_with_potential(particle: &Particle, potential: f64) -> Result<f64> {
    let cutoff = particle.rest_frequency() + potential;
    if cutoff > 0.0 {
        Ok(cutoff)
    } else {
        Err(Error::NonPositiveCutoff(cutoff))
    }
}

/// TE₁₀ width `a = πc/ω_c`.
pub fn width_from_cutoff(cutoff: f64) -> Result<f64> {
    if cutoff > 0.0 && cutoff.is_finite() {
        Ok(PI / cutoff)
    } else {
        Err(Error::NonPositiveCutoff(cutoff))
    }
}

/// Local cutoff and width of the guide along a potential profile.
#[derive(Debug, Clone, Serialize)]
pub struct GuideGeometry {
    #[serde(skip)]
    profile: PotentialProfile,
    rest_frequency: f64,
    cutoff: Vec<f64>,
    width: Vec<f64>,
}

impl GuideGeometry {
    pub fn grid(&self) -> &UniformGrid {
        self.profile.grid()
    }
    pub fn profile(&self) -> &PotentialProfile {
        &self.profile
    }
    pub fn cutoff(&self) -> &[f64] {
        &self.cutoff
    }
    pub fn width(&self) -> &[f64] {
        &self.width
    }

    /// Cutoff at an arbitrary position through the profile's interpolant.
    pub fn cutoff_at(&self, x: f64) -> f64 {
        self.rest_frequency + self.profile.value(x)
    }

    pub fn width_at(&self, x: f64) -> f64 {
        PI / self.cutoff_at(x)
    }

    pub fn width_slope_at(&self, x: f64) -> f64 {
        let cutoff = self.cutoff_at(x);
        -PI * self.profile.derivative(x) / (cutoff * cutoff)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.grid().contains(x)
    }
}

pub fn potential_to_geometry(particle: &Particle, profile: &PotentialProfile) -> Result<GuideGeometry> {
    let grid = profile.grid();
    let mut cutoff = Vec::with_capacity(grid.len());
    let mut width = Vec::with_capacity(grid.len());
    for (x, &v) in grid.points().zip(profile.values()) {
        let c = cutoff_with_potential(particle, v).map_err(|_| Error::GeometryUndefined {
            x,
            cutoff: particle.rest_frequency() + v,
        })?;
        cutoff.push(c);
        width.push(width_from_cutoff(c)?);
    }
    Ok(GuideGeometry {
        profile: profile.clone(),
        rest_frequency: particle.rest_frequency(),
        cutoff,
        width,
    })
}

/// Per-point WKB smoothness metric `|da/dx|·λ_guide/a`, with `λ_guide = 2π/k`.
///
/// `None` marks points at or below the local cutoff; their indices are also
/// collected in `below_cutoff`.
#[derive(Debug, Clone, Serialize)]
pub struct WkbReport {
    pub metric: Vec<Option<f64>>,
    pub below_cutoff: Vec<usize>,
}

impl WkbReport {
    pub fn max_metric(&self) -> Option<f64> {
        self.metric.iter().flatten().copied().reduce(f64::max)
    }

    /// Indices whose metric exceeds a caller-chosen threshold.
    pub fn exceeding(&self, threshold: f64) -> Vec<usize> {
        self.metric
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.filter(|&m| m > threshold).map(|_| i))
            .collect()
    }
}

pub fn wkb_validity(geometry: &GuideGeometry, omega: f64) -> WkbReport {
    let slope = derivative(geometry.width(), geometry.grid().step());
    let mut metric = Vec::with_capacity(slope.len());
    let mut below_cutoff = Vec::new();
    for (i, (&cutoff, &a)) in geometry.cutoff().iter().zip(geometry.width()).enumerate() {
        match k_of_omega(omega, cutoff) {
            Ok(Wavenumber::Real(k)) if k > 0.0 => {
                let guide_wavelength = 2.0 * PI / k;
                metric.push(Some(slope[i].abs() * guide_wavelength / a));
            }
            _ => {
                metric.push(None);
                below_cutoff.push(i);
            }
        }
    }
    WkbReport { metric, below_cutoff }
}
