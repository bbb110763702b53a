//! Unit system and physical constants.
//!
//! Internally everything is expressed in natural electron units: `c = ħ = 1`
//! and the electron mass is the unit of mass. Lengths are then measured in
//! reduced Compton wavelengths `ħ/(mₑc)`, times in `ħ/(mₑc²)` and energies in
//! `mₑc²`. Conversion to SI or electron-volts happens only when reading or
//! writing files.

use serde::{Deserialize, Serialize};

/// CODATA 2018 values.
pub mod si {
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const FINE_STRUCTURE: f64 = 7.297_352_569_3e-3;
    /// `mₑc²` in eV.
    pub const ELECTRON_REST_ENERGY_EV: f64 = 510_998.950_00;
    /// `ħ/(mₑc)` in metres.
    pub const REDUCED_COMPTON_WAVELENGTH: f64 = 3.861_592_679_6e-13;
    pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
    /// `α²mₑc²/2` in eV.
    pub const RYDBERG_ENERGY_EV: f64 = 13.605_693_122_994;
}

pub const FINE_STRUCTURE: f64 = si::FINE_STRUCTURE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnitMode {
    #[default]
    NaturalElectron,
    Si,
}

/// Converts between natural electron units and an external unit system.
///
/// In [`UnitMode::Si`] lengths are metres, times seconds, energies
/// electron-volts (the conventional choice for atomic scales), angular
/// frequencies rad/s and velocities m/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct UnitSystem {
    pub mode: UnitMode,
}

impl UnitSystem {
    pub const NATURAL: UnitSystem = UnitSystem {
        mode: UnitMode::NaturalElectron,
    };
    pub const SI: UnitSystem = UnitSystem { mode: UnitMode::Si };

    pub fn new(mode: UnitMode) -> Self {
        Self { mode }
    }

    fn length_scale(&self) -> f64 {
        match self.mode {
            UnitMode::NaturalElectron => 1.0,
            UnitMode::Si => si::REDUCED_COMPTON_WAVELENGTH,
        }
    }

    fn energy_scale(&self) -> f64 {
        match self.mode {
            UnitMode::NaturalElectron => 1.0,
            UnitMode::Si => si::ELECTRON_REST_ENERGY_EV,
        }
    }

    fn time_scale(&self) -> f64 {
        match self.mode {
            UnitMode::NaturalElectron => 1.0,
            UnitMode::Si => si::REDUCED_COMPTON_WAVELENGTH / si::SPEED_OF_LIGHT,
        }
    }

    fn velocity_scale(&self) -> f64 {
        match self.mode {
            UnitMode::NaturalElectron => 1.0,
            UnitMode::Si => si::SPEED_OF_LIGHT,
        }
    }

    pub fn length_out(&self, natural: f64) -> f64 {
        natural * self.length_scale()
    }
    pub fn length_in(&self, external: f64) -> f64 {
        external / self.length_scale()
    }
    pub fn energy_out(&self, natural: f64) -> f64 {
        natural * self.energy_scale()
    }
    pub fn energy_in(&self, external: f64) -> f64 {
        external / self.energy_scale()
    }
    pub fn time_out(&self, natural: f64) -> f64 {
        natural * self.time_scale()
    }
    pub fn time_in(&self, external: f64) -> f64 {
        external / self.time_scale()
    }
    pub fn frequency_out(&self, natural: f64) -> f64 {
        natural / self.time_scale()
    }
    pub fn frequency_in(&self, external: f64) -> f64 {
        external * self.time_scale()
    }
    pub fn velocity_out(&self, natural: f64) -> f64 {
        natural * self.velocity_scale()
    }
    pub fn velocity_in(&self, external: f64) -> f64 {
        external / self.velocity_scale()
    }
    pub fn wavenumber_out(&self, natural: f64) -> f64 {
        natural / self.length_scale()
    }
    pub fn wavenumber_in(&self, external: f64) -> f64 {
        external * self.length_scale()
    }

    pub fn length_label(&self) -> &'static str {
        match self.mode {
            UnitMode::NaturalElectron => "hbar/(m_e c)",
            UnitMode::Si => "m",
        }
    }
    pub fn energy_label(&self) -> &'static str {
        match self.mode {
            UnitMode::NaturalElectron => "m_e c^2",
            UnitMode::Si => "eV",
        }
    }
}

/// Length units accepted in CSV `# units:` headers.
pub fn parse_length_unit(label: &str) -> Option<f64> {
    // factor converting one external unit into natural lengths
    let metres = match label.trim() {
        "natural" | "compton" => return Some(1.0),
        "m" => 1.0,
        "nm" => 1e-9,
        "pm" => 1e-12,
        "angstrom" | "A" => 1e-10,
        "bohr" => si::BOHR_RADIUS,
        _ => return None,
    };
    Some(metres / si::REDUCED_COMPTON_WAVELENGTH)
}

/// Energy units accepted in CSV `# units:` headers.
pub fn parse_energy_unit(label: &str) -> Option<f64> {
    let ev = match label.trim() {
        "natural" | "mec2" => return Some(1.0),
        "eV" => 1.0,
        "keV" => 1e3,
        "meV" => 1e-3,
        "J" => 1.0 / si::ELEMENTARY_CHARGE,
        "hartree" => 2.0 * si::RYDBERG_ENERGY_EV,
        _ => return None,
    };
    Some(ev / si::ELECTRON_REST_ENERGY_EV)
}

/// Shortest round-trip text for a CSV cell, switching to exponent notation
/// outside `[1e-4, 1e6)` so SI magnitudes stay readable.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e6).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}
