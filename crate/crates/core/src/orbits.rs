//! Circular Coulomb orbits and their quantization by phase-wave overtaking.
//!
//! The orbiting particle carries an internal clock whose phase wave runs
//! ahead of it at `v_ph = c²/v_g`. The wave laps the particle after a time
//! `τ`; requiring the particle to complete a whole number of zigzags in that
//! interval gives the quantization condition
//! `m v_g² T √(1 − v_g²/c²) = n h`, which reduces to Bohr's `M = nħ` at low
//! speed.
//!
//! All formulas take an explicit [`Coupling`] so the same code runs in
//! natural units, in SI, or with a rescaled light speed.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::particle::Particle;
use crate::raytrace::zigzag_length;
use crate::units::{format_number, si, UnitSystem, FINE_STRUCTURE};

/// Constants entering the orbit problem. `e2` is the Coulomb coupling
/// `q²/(4πε₀)`, so the attractive force is `e2/r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coupling {
    pub c: f64,
    pub hbar: f64,
    pub mass: f64,
    pub e2: f64,
}

impl Coupling {
    /// Hydrogen in natural units (`c = ħ = 1`, `e2 = α`) for `particle`.
    pub fn natural_hydrogen(particle: &Particle) -> Self {
        Self {
            c: 1.0,
            hbar: 1.0,
            mass: particle.rest_mass(),
            e2: FINE_STRUCTURE,
        }
    }

    pub fn si_hydrogen() -> Self {
        let e = si::ELEMENTARY_CHARGE;
        Self {
            c: si::SPEED_OF_LIGHT,
            hbar: si::HBAR,
            mass: si::ELECTRON_MASS,
            e2: e * e / (4.0 * PI * si::VACUUM_PERMITTIVITY),
        }
    }

    /// Same coupling with the speed of light multiplied by `factor`.
    pub fn with_light_speed_scale(self, factor: f64) -> Self {
        Self {
            c: self.c * factor,
            ..self
        }
    }

    /// `e2/(ħc)`; the fine-structure constant for hydrogen.
    pub fn strength(&self) -> f64 {
        self.e2 / (self.hbar * self.c)
    }

    /// Rest frequency `mc²/ħ`.
    pub fn rest_frequency(&self) -> f64 {
        self.mass * self.c * self.c / self.hbar
    }

    fn validate(&self) -> Result<()> {
        for (name, value) in [("c", self.c), ("hbar", self.hbar), ("mass", self.mass), ("e2", self.e2)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidArgument(format!("coupling {name} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircularOrbit {
    pub n: Option<u32>,
    pub r: f64,
    pub v_g: f64,
    pub period: f64,
    pub angular_momentum: f64,
    pub energy: f64,
}

/// Circular orbit of radius `r` under force balance `m v²/r = e2/r²`.
pub fn classical_orbit(coupling: &Coupling, r: f64) -> Result<CircularOrbit> {
    coupling.validate()?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("orbit radius must be positive, got {r}")));
    }
    let v_g = (coupling.e2 / (coupling.mass * r)).sqrt();
    Ok(CircularOrbit {
        n: None,
        r,
        v_g,
        period: 2.0 * PI * r / v_g,
        angular_momentum: coupling.mass * v_g * r,
        energy: -coupling.e2 / (2.0 * r),
    })
}

fn check_level(n: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("principal quantum number must be at least 1".into()));
    }
    Ok(())
}

/// Bohr orbit: `r_n = n²ħ²/(m e2)`.
pub fn quantize_nonrelativistic(coupling: &Coupling, n: u32) -> Result<CircularOrbit> {
    check_level(n)?;
    coupling.validate()?;
    let nf = f64::from(n);
    let r = nf * nf * coupling.hbar * coupling.hbar / (coupling.mass * coupling.e2);
    let mut orbit = classical_orbit(coupling, r)?;
    orbit.n = Some(n);
    Ok(orbit)
}

/// Orbit satisfying `m v² T √(1 − v²/c²) = n h` together with force balance.
///
/// With `v² = e2/(m r)` and `T = 2πr/v` the condition becomes
/// `e2 √(1 − v²/c²)/v = nħ`, whose left side falls monotonically from `+∞`
/// to `0` on `(0, c)`; the root is found by bisection.
pub fn quantize_relativistic(coupling: &Coupling, n: u32) -> Result<CircularOrbit> {
    check_level(n)?;
    coupling.validate()?;
    let target = f64::from(n) * coupling.hbar;
    let residual = |beta: f64| coupling.e2 * (1.0 - beta * beta).sqrt() / (beta * coupling.c) - target;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if !(residual(hi) < 0.0) {
        return Err(Error::RootNotBracketed(format!("orbit n = {n}")));
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_g = 0.5 * (lo + hi) * coupling.c;
    let mut orbit = classical_orbit(coupling, coupling.e2 / (coupling.mass * v_g * v_g))?;
    orbit.n = Some(n);
    Ok(orbit)
}

/// Relative radius change `(r_rel − r_nonrel)/r_nonrel` for level `n`.
pub fn relativistic_shift(coupling: &Coupling, n: u32) -> Result<f64> {
    let rel = quantize_relativistic(coupling, n)?;
    let nonrel = quantize_nonrelativistic(coupling, n)?;
    Ok(rel.r / nonrel.r - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OvertakeEvent {
    /// Exact time for the phase wave to lap the particle.
    pub tau: f64,
    /// Small-velocity approximation `v²T/c²`.
    pub tau_approx: f64,
    pub overtake_distance: f64,
    /// `v_g τ̃ / L`: zigzags completed while the wave catches up.
    pub zigzag_count: f64,
    /// Relative residual of `v_ph τ = (τ + T) v_g`.
    pub lap_residual: f64,
}

impl OvertakeEvent {
    pub fn ratio(&self) -> f64 {
        self.tau / self.tau_approx
    }
}

pub fn overtake_time(coupling: &Coupling, orbit: &CircularOrbit) -> Result<OvertakeEvent> {
    coupling.validate()?;
    let (c, v, t) = (coupling.c, orbit.v_g, orbit.period);
    if !(v >= 0.0 && v < c) {
        return Err(Error::Superluminal { velocity: v, c });
    }
    let tau = t * v * v / (c * c - v * v);
    let tau_approx = v * v * t / (c * c);
    let lap_residual = if v > 0.0 {
        let v_ph = c * c / v;
        let lap = (tau + t) * v;
        (v_ph * tau - lap).abs() / lap
    } else {
        0.0
    };
    let zigzag = zigzag_length(coupling.rest_frequency(), c, v);
    Ok(OvertakeEvent {
        tau,
        tau_approx,
        overtake_distance: v * tau,
        zigzag_count: if zigzag > 0.0 { v * tau_approx / zigzag } else { 0.0 },
        lap_residual,
    })
}

/// `|v_g τ̃ − nL|/(nL)` with `L` the zigzag length at `v_g`.
///
/// The quantization condition is the statement that this vanishes when the
/// overtake time is taken in its small-velocity form `τ̃`.
pub fn zigzag_consistency(coupling: &Coupling, orbit: &CircularOrbit, n: u32) -> Result<f64> {
    check_level(n)?;
    let event = overtake_time(coupling, orbit)?;
    let nl = f64::from(n) * zigzag_length(coupling.rest_frequency(), coupling.c, orbit.v_g);
    Ok((orbit.v_g * event.tau_approx - nl).abs() / nl)
}

/// Angular frequency `(E_upper − E_lower)/ħ` of the transition between two
/// levels; positive when `upper > lower`.
pub fn transition_frequency(coupling: &Coupling, upper: u32, lower: u32, relativistic: bool) -> Result<f64> {
    let level = |n| {
        if relativistic {
            quantize_relativistic(coupling, n)
        } else {
            quantize_nonrelativistic(coupling, n)
        }
    };
    Ok((level(upper)?.energy - level(lower)?.energy) / coupling.hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRow {
    pub n: u32,
    pub r: f64,
    pub v_over_c: f64,
    pub energy_ev: f64,
    pub angular_momentum_over_hbar: f64,
    pub tau_over_period: f64,
    pub relativistic_shift: f64,
}

/// Relativistic levels `1..=n_max` for a natural-unit coupling, in parallel.
pub fn level_table(coupling: &Coupling, n_max: u32) -> Result<Vec<LevelRow>> {
    use rayon::prelude::*;
    check_level(n_max)?;
    (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let orbit = quantize_relativistic(coupling, n)?;
            let event = overtake_time(coupling, &orbit)?;
            Ok(LevelRow {
                n,
                r: orbit.r,
                v_over_c: orbit.v_g / coupling.c,
                energy_ev: orbit.energy * si::ELECTRON_REST_ENERGY_EV,
                angular_momentum_over_hbar: orbit.angular_momentum / coupling.hbar,
                tau_over_period: event.tau / orbit.period,
                relativistic_shift: relativistic_shift(coupling, n)?,
            })
        })
        .collect()
}

/// Writes the level table with radii in the length unit of `units`.
pub fn write_level_table_csv<W: std::io::Write>(rows: &[LevelRow], writer: W, units: UnitSystem) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "n".to_string(),
        format!("r_{}", units.length_label()),
        "v_over_c".into(),
        "E_eV".into(),
        "M_over_hbar".into(),
        "tau_over_T".into(),
        "relativistic_shift".into(),
    ])?;
    for row in rows {
        csv.write_record([
            row.n.to_string(),
            format_number(units.length_out(row.r)),
            format_number(row.v_over_c),
            format_number(row.energy_ev),
            format_number(row.angular_momentum_over_hbar),
            format_number(row.tau_over_period),
            format_number(row.relativistic_shift),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
