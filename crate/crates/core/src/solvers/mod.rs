//! Finite-difference reference solvers for the wave equations underlying the
//! guide picture.
//!
//! These are oracles: the analogy modules are checked against them. Three
//! solvers are provided, all on a uniform 1-D grid in natural units:
//!
//! * [`schrodinger_evolve`]: Crank–Nicolson (implicit midpoint) stepping of
//!   `i∂ψ/∂t = (ω₀ + V)ψ − (1/2m)∂²ψ/∂x²`.
//! * [`klein_gordon_evolve`]: leapfrog stepping of
//!   `∂²φ/∂t² = ∂²φ/∂x² − (ω₀ + V)²φ`.
//! * [`stationary_states`]: lowest eigenpairs of the discretized
//!   Hamiltonian.

mod banded;
mod eigen;
mod klein_gordon;
mod schrodinger;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::units::{format_number, UnitSystem};

pub use eigen::{stationary_states, Confinement, Eigenstate};
pub use klein_gordon::{klein_gordon_evolve, positive_frequency_velocity, KgField, KleinGordon};
pub use schrodinger::{check_resolution, schrodinger_evolve, CrankNicolson};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Complex absorbing potential rising quadratically to `strength` over
    /// `width` at each end of the grid.
    Absorbing { width: f64, strength: f64 },
    /// Field vanishes one grid step beyond each end.
    #[default]
    Dirichlet,
}

impl Boundary {
    /// Absorption rate at each grid point (zero unless absorbing).
    pub(crate) fn absorption(&self, grid: &UniformGrid) -> Vec<f64> {
        match *self {
            Boundary::Absorbing { width, strength } => grid
                .points()
                .map(|x| {
                    let depth = (width - (x - grid.start()).min(grid.end() - x)).max(0.0) / width;
                    strength * depth * depth
                })
                .collect(),
            _ => vec![0.0; grid.len()],
        }
    }

    fn validate(&self, grid: &UniformGrid) -> Result<()> {
        if let Boundary::Absorbing { width, strength } = *self {
            if !(width > 0.0 && strength >= 0.0 && 2.0 * width < grid.length()) {
                return Err(Error::InvalidArgument(format!(
                    "absorbing layer width {width} / strength {strength} do not fit the grid"
                )));
            }
        }
        Ok(())
    }
}

/// Finite-difference approximation of `∂²/∂x²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Three-point, second order.
    #[default]
    Second,
    /// Five-point, fourth order.
    Fourth,
}

impl Stencil {
    /// Coefficients of `ψ_{i±j}` for `j = 0, 1, ...`, to be divided by `dx²`.
    pub(crate) fn coefficients(&self) -> &'static [f64] {
        match self {
            Stencil::Second => &[-2.0, 1.0],
            Stencil::Fourth => &[-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
        }
    }

    pub(crate) fn half_width(&self) -> usize {
        self.coefficients().len() - 1
    }

    /// Eigenvalue of `−∂²` for the lattice mode `e^{ikx}`.
    pub fn symbol(&self, k: f64, dx: f64) -> f64 {
        let theta = k * dx;
        -self
            .coefficients()
            .iter()
            .enumerate()
            .map(|(j, c)| if j == 0 { *c } else { 2.0 * c * (j as f64 * theta).cos() })
            .sum::<f64>()
            / (dx * dx)
    }

    /// Largest eigenvalue of `−∂²` on the lattice.
    pub fn max_symbol(&self, dx: f64) -> f64 {
        self.symbol(PI / dx, dx)
    }

    /// `∂²u` with the given boundary treatment (absorbing behaves as
    /// Dirichlet here; absorption is added separately).
    pub(crate) fn apply(&self, u: &[Complex64], dx: f64, periodic: bool, out: &mut [Complex64]) {
        let n = u.len() as isize;
        let coeffs = self.coefficients();
        let scale = 1.0 / (dx * dx);
        let at = |i: isize| -> Complex64 {
            if (0..n).contains(&i) {
                u[i as usize]
            } else if periodic {
                u[i.rem_euclid(n) as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        for (i, o) in out.iter_mut().enumerate() {
            let i = i as isize;
            let mut acc = coeffs[0] * u[i as usize];
            for (j, c) in coeffs.iter().enumerate().skip(1) {
                let j = j as isize;
                acc += *c * (at(i - j) + at(i + j));
            }
            *o = acc * scale;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub boundary: Boundary,
    /// Keep every `snapshot_every`-th state; `0` keeps only the first and last.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub stencil: Stencil,
    /// Carry the `e^{−iω₀t}` rest-frequency phase in Schrödinger runs. It is
    /// applied exactly and never changes densities.
    #[serde(default)]
    pub include_rest_phase: bool,
}

impl EvolutionConfig {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            boundary: Boundary::Dirichlet,
            snapshot_every: 0,
            stencil: Stencil::Second,
            include_rest_phase: false,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn with_snapshots(mut self, every: usize) -> Self {
        self.snapshot_every = every;
        self
    }

    pub fn with_rest_phase(mut self, on: bool) -> Self {
        self.include_rest_phase = on;
        self
    }

    pub(crate) fn validate(&self, grid: &UniformGrid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.dt)));
        }
        if grid.len() < 2 * self.stencil.half_width() + 2 {
            return Err(Error::InvalidGrid(format!("{} points is too few for the stencil", grid.len())));
        }
        self.boundary.validate(grid)
    }

    pub(crate) fn keeps(&self, step: usize) -> bool {
        step == self.n_steps || (self.snapshot_every > 0 && step % self.snapshot_every == 0)
    }
}

/// Complex wavefunction samples at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveField {
    pub grid: UniformGrid,
    pub psi: Vec<Complex64>,
    pub t: f64,
}

impl WaveField {
    pub fn new(grid: UniformGrid, psi: Vec<Complex64>, t: f64) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} samples for a grid of {} points",
                psi.len(),
                grid.len()
            )));
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("wavefunction has non-finite samples".into()));
        }
        Ok(Self { grid, psi, t })
    }

    /// Normalized Gaussian packet `exp(−(x−x₀)²/4σ² + ik₀x)`; `sigma` is the
    /// standard deviation of `|ψ|²`.
    pub fn gaussian_packet(grid: UniformGrid, x0: f64, sigma: f64, k0: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("packet width must be positive, got {sigma}")));
        }
        let psi = grid
            .points()
            .map(|x| {
                let d = x - x0;
                Complex64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), k0 * x)
            })
            .collect();
        let mut field = Self::new(grid, psi, 0.0)?;
        field.normalize();
        Ok(field)
    }

    pub fn from_real(grid: UniformGrid, values: &[f64], t: f64) -> Result<Self> {
        Self::new(grid, values.iter().map(|v| Complex64::new(*v, 0.0)).collect(), t)
    }

    /// `∫|ψ|² dx` (rectangle rule, exact for the lattice inner product).
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.step()
    }

    pub fn normalize(&mut self) {
        let s = self.norm().sqrt();
        if s > 0.0 {
            self.psi.iter_mut().for_each(|z| *z /= s);
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Probability in `x > x_split`.
    pub fn probability_right_of(&self, x_split: f64) -> f64 {
        self.grid
            .points()
            .zip(&self.psi)
            .filter(|(x, _)| *x > x_split)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * self.grid.step()
    }

    /// `⟨x⟩` and the standard deviation of `|ψ|²`.
    pub fn position_moments(&self) -> (f64, f64) {
        let norm: f64 = self.psi.iter().map(|z| z.norm_sqr()).sum();
        let mean = self.grid.points().zip(&self.psi).map(|(x, z)| x * z.norm_sqr()).sum::<f64>() / norm;
        let var = self
            .grid
            .points()
            .zip(&self.psi)
            .map(|(x, z)| (x - mean).powi(2) * z.norm_sqr())
            .sum::<f64>()
            / norm;
        (mean, var.sqrt())
    }

    /// Snapshot as `x,re,im,density` with lengths in `units`; densities are
    /// rescaled so that they still integrate to the norm.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, units: UnitSystem) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["x", "re_psi", "im_psi", "density"])?;
        let amp = units.length_out(1.0).sqrt().recip();
        for (x, z) in self.grid.points().zip(&self.psi) {
            csv.write_record([
                format_number(units.length_out(x)),
                format_number(z.re * amp),
                format_number(z.im * amp),
                format_number(z.norm_sqr() * amp * amp),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub(crate) fn potential_on_grid(profile: &crate::profile::PotentialProfile, grid: &UniformGrid) -> Vec<f64> {
    grid.points().map(|x| profile.value(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_symbols() {
        let dx = 0.1;
        for stencil in [Stencil::Second, Stencil::Fourth] {
            assert!(stencil.symbol(0.0, dx).abs() < 1e-12);
            let k = 0.3;
            assert!((stencil.symbol(k, dx) / (k * k) - 1.0).abs() < 1e-3);
        }
        assert!((Stencil::Second.max_symbol(dx) - 4.0 / (dx * dx)).abs() < 1e-9);
        assert!((Stencil::Fourth.max_symbol(dx) - 16.0 / (3.0 * dx * dx)).abs() < 1e-9);
    }

    #[test]
    fn stencil_applies_to_periodic_mode() {
        let grid = UniformGrid::new(0.0, 2.0 * PI / 64.0, 64).unwrap();
        let u: Vec<Complex64> = grid.points().map(|x| Complex64::from_polar(1.0, 3.0 * x)).collect();
        for stencil in [Stencil::Second, Stencil::Fourth] {
            let mut out = vec![Complex64::new(0.0, 0.0); 64];
            stencil.apply(&u, grid.step(), true, &mut out);
            let lambda = stencil.symbol(3.0, grid.step());
            for (o, v) in out.iter().zip(&u) {
                assert!((o + lambda * v).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_packet_moments() {
        let grid = UniformGrid::spanning(-20.0, 20.0, 2001).unwrap();
        let f = WaveField::gaussian_packet(grid, 1.5, 2.0, 0.7).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-12);
        let (mean, sd) = f.position_moments();
        assert!((mean - 1.5).abs() < 1e-10);
        assert!((sd - 2.0).abs() < 1e-8);
        assert!((f.probability_right_of(1.5) - 0.5).abs() < 1e-2);
    }

    #[test]
    fn absorbing_profile_is_zero_in_interior() {
        let grid = UniformGrid::spanning(0.0, 10.0, 101).unwrap();
        let w = Boundary::Absorbing { width: 2.0, strength: 1.0 }.absorption(&grid);
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert_eq!(w[50], 0.0);
        assert!((w[100] - 1.0).abs() < 1e-12);
        assert!(Boundary::Absorbing { width: 6.0, strength: 1.0 }.validate(&grid).is_err());
    }
}
