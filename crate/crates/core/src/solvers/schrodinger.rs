use num_complex::Complex64;
use rustfft::FftPlanner;

use super::banded::BandedSystem;
use super::{potential_on_grid, Boundary, EvolutionConfig, Stencil, WaveField};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::particle::Particle;
use crate::profile::PotentialProfile;

/// Minimum number of grid points per shortest significant wavelength.
const POINTS_PER_WAVELENGTH: f64 = 16.0;

/// Refuses fields whose spectrum holds significant power (above 1e-8 of the
/// peak) at wavelengths shorter than 16 grid steps.
pub fn check_resolution(field: &WaveField) -> Result<()> {
    let n = field.psi.len();
    let mut spectrum = field.psi.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut spectrum);
    let power: Vec<f64> = spectrum.iter().map(|z| z.norm_sqr()).collect();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let dx = field.grid.step();
    let k_max = power
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 1e-8 * peak)
        .map(|(j, _)| {
            let j = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            (2.0 * std::f64::consts::PI * j / (n as f64 * dx)).abs()
        })
        .fold(0.0, f64::max);
    if k_max > 0.0 {
        let points = 2.0 * std::f64::consts::PI / k_max / dx;
        if points < POINTS_PER_WAVELENGTH {
            return Err(Error::Unresolved(format!(
                "shortest significant wavelength spans {points:.1} grid steps (need {POINTS_PER_WAVELENGTH}); \
                 refine the grid below dx = {:.3e}",
                2.0 * std::f64::consts::PI / k_max / POINTS_PER_WAVELENGTH
            )));
        }
    }
    Ok(())
}

/// Crank–Nicolson stepper for `i∂ψ/∂t = (V − iW)ψ − (1/2m)∂²ψ/∂x²`, where
/// `W` is the absorbing layer (zero unless [`Boundary::Absorbing`]).
///
/// The rest-frequency term `ω₀ψ` commutes with everything else and is left
/// to the caller as an exact phase.
pub struct CrankNicolson {
    dt: f64,
    dx: f64,
    stencil: Stencil,
    periodic: bool,
    inverse_mass: f64,
    /// Diagonal of `H` excluding the kinetic part.
    local: Vec<Complex64>,
    system: BandedSystem,
    scratch: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(
        grid: &UniformGrid,
        profile: &PotentialProfile,
        particle: &Particle,
        dt: f64,
        boundary: Boundary,
        stencil: Stencil,
    ) -> Result<Self> {
        let v = potential_on_grid(profile, grid);
        Self::from_potential(grid, &v, particle, dt, boundary, stencil)
    }

    pub fn from_potential(
        grid: &UniformGrid,
        potential: &[f64],
        particle: &Particle,
        dt: f64,
        boundary: Boundary,
        stencil: Stencil,
    ) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::InvalidGrid("potential length differs from grid".into()));
        }
        let dx = grid.step();
        let inverse_mass = 1.0 / particle.rest_mass();
        let absorption = boundary.absorption(grid);
        let local: Vec<Complex64> = potential
            .iter()
            .zip(&absorption)
            .map(|(v, w)| Complex64::new(*v, -*w))
            .collect();
        let coeffs = stencil.coefficients();
        let kinetic = -0.5 * inverse_mass / (dx * dx);
        let half = Complex64::new(0.0, 0.5 * dt);
        let diag: Vec<Complex64> = local
            .iter()
            .map(|h| Complex64::new(1.0, 0.0) + half * (h + kinetic * coeffs[0]))
            .collect();
        let off: Vec<Complex64> = coeffs[1..].iter().map(|c| half * (kinetic * c)).collect();
        let periodic = matches!(boundary, Boundary::Periodic);
        Ok(Self {
            dt,
            dx,
            stencil,
            periodic,
            inverse_mass,
            local,
            system: BandedSystem::new(&diag, &off, periodic)?,
            scratch: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `Hψ` for the discretized Hamiltonian (without the rest term).
    pub fn apply_hamiltonian(&mut self, psi: &[Complex64], out: &mut [Complex64]) {
        self.stencil.apply(psi, self.dx, self.periodic, out);
        for ((o, h), p) in out.iter_mut().zip(&self.local).zip(psi) {
            *o = *h * p - 0.5 * self.inverse_mass * *o;
        }
    }

    pub fn step(&mut self, psi: &mut [Complex64]) {
        let mut h_psi = std::mem::take(&mut self.scratch);
        self.apply_hamiltonian(psi, &mut h_psi);
        let half = Complex64::new(0.0, 0.5 * self.dt);
        for (p, h) in psi.iter_mut().zip(&h_psi) {
            *p -= half * h;
        }
        self.system.solve_in_place(psi);
        self.scratch = h_psi;
    }
}

/// Evolves `initial` and returns the snapshots selected by `config`, the
/// initial state first.
pub fn schrodinger_evolve(
    initial: &WaveField,
    profile: &PotentialProfile,
    particle: &Particle,
    config: &EvolutionConfig,
) -> Result<Vec<WaveField>> {
    config.validate(&initial.grid)?;
    check_resolution(initial)?;
    let mut stepper = CrankNicolson::new(
        &initial.grid,
        profile,
        particle,
        config.dt,
        config.boundary,
        config.stencil,
    )?;
    let rest = if config.include_rest_phase {
        particle.rest_frequency()
    } else {
        0.0
    };
    let t0 = initial.t;
    let mut psi = initial.psi.clone();
    let mut out = vec![initial.clone()];
    for step in 1..=config.n_steps {
        stepper.step(&mut psi);
        if config.keeps(step) {
            let t = t0 + step as f64 * config.dt;
            let phase = Complex64::from_polar(1.0, -rest * (t - t0));
            out.push(WaveField {
                grid: initial.grid,
                psi: psi.iter().map(|z| z * phase).collect(),
                t,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{stationary_states, Confinement};

    fn free_profile(grid: &UniformGrid) -> PotentialProfile {
        PotentialProfile::constant(*grid, 0.0).unwrap()
    }

    /// Exact free evolution of the packet built by `gaussian_packet`.
    fn free_packet(x: f64, t: f64, x0: f64, sigma: f64, k0: f64, mass: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let s = Complex64::new(1.0, t / (2.0 * mass * sigma * sigma));
        let d = x - x0 - k0 * t / mass;
        let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
        norm / s.sqrt() * (-d * d / (4.0 * sigma * sigma * s) + i * (k0 * (x - x0) - k0 * k0 * t / (2.0 * mass))).exp()
            * Complex64::from_polar(1.0, k0 * x0)
    }

    #[test]
    fn refuses_unresolved_packets() {
        let grid = UniformGrid::spanning(-20.0, 20.0, 256).unwrap();
        let fine = WaveField::gaussian_packet(grid, 0.0, 2.0, 1.0).unwrap();
        assert!(check_resolution(&fine).is_ok());
        let coarse = WaveField::gaussian_packet(grid, 0.0, 2.0, 4.0).unwrap();
        let config = EvolutionConfig::new(0.01, 1);
        assert!(matches!(
            schrodinger_evolve(&coarse, &free_profile(&grid), &Particle::electron(), &config),
            Err(Error::Unresolved(_))
        ));
    }

    #[test]
    fn norm_is_conserved_per_step() {
        let grid = UniformGrid::spanning(-30.0, 30.0, 1024).unwrap();
        let profile = PotentialProfile::from_fn(grid, Default::default(), |x| 0.3 * (-x * x / 8.0).exp()).unwrap();
        for (boundary, stencil) in [
            (Boundary::Dirichlet, Stencil::Second),
            (Boundary::Periodic, Stencil::Fourth),
            (Boundary::Periodic, Stencil::Second),
        ] {
            let f = WaveField::gaussian_packet(grid, -10.0, 2.0, 1.0).unwrap();
            let config = EvolutionConfig::new(0.05, 200).with_boundary(boundary).with_stencil(stencil).with_snapshots(1);
            let run = schrodinger_evolve(&f, &profile, &Particle::electron(), &config).unwrap();
            for w in run.windows(2) {
                assert!((w[1].norm() - w[0].norm()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn periodic_packet_wraps_around() {
        let grid = UniformGrid::new(-30.0, 60.0 / 768.0, 768).unwrap();
        let f = WaveField::gaussian_packet(grid, 0.0, 4.0, 1.0).unwrap();
        let config = EvolutionConfig::new(0.02, 1500).with_boundary(Boundary::Periodic).with_stencil(Stencil::Fourth);
        let run = schrodinger_evolve(&f, &free_profile(&grid), &Particle::electron(), &config).unwrap();
        let last = run.last().unwrap();
        // the centre has moved by 30 and now sits on the seam at ±30
        let near: f64 = last
            .grid
            .points()
            .zip(&last.psi)
            .filter(|(x, _)| x.abs() > 16.0)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * grid.step();
        assert!(near > 0.95, "{near}");
        assert!(f.probability_right_of(16.0) < 1e-4);
    }

    #[test]
    fn free_packet_matches_analytic_motion_and_spread() {
        let (x0, sigma, k0) = (-10.0, 1.5, 1.0);
        let grid = UniformGrid::spanning(-40.0, 40.0, 4096).unwrap();
        let f = WaveField::gaussian_packet(grid, x0, sigma, k0).unwrap();
        let config = EvolutionConfig::new(0.01, 1500).with_stencil(Stencil::Fourth);
        let run = schrodinger_evolve(&f, &free_profile(&grid), &Particle::electron(), &config).unwrap();
        let last = run.last().unwrap();
        let t = last.t;
        let (mean, sd) = last.position_moments();
        assert!(((mean - x0) / (k0 * t) - 1.0).abs() < 5e-3);
        let expected_sd = sigma * (1.0 + (t / (2.0 * sigma * sigma)).powi(2)).sqrt();
        assert!((sd / expected_sd - 1.0).abs() < 1e-2);
        let err = grid
            .points()
            .zip(&last.psi)
            .map(|(x, z)| (z - free_packet(x, t, x0, sigma, k0, 1.0)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn second_order_convergence_in_space_and_time() {
        let (x0, sigma, k0, t_end) = (0.0, 1.0, 1.0, 2.0);
        let error = |n: usize| {
            let grid = UniformGrid::spanning(-20.0, 20.0, n).unwrap();
            let f = WaveField::gaussian_packet(grid, x0, sigma, k0).unwrap();
            let dt = 0.5 * grid.step();
            let steps = (t_end / dt).round() as usize;
            let config = EvolutionConfig::new(t_end / steps as f64, steps);
            let run = schrodinger_evolve(&f, &free_profile(&grid), &Particle::electron(), &config).unwrap();
            let last = run.last().unwrap();
            let sq: f64 = grid
                .points()
                .zip(&last.psi)
                .map(|(x, z)| (z - free_packet(x, t_end, x0, sigma, k0, 1.0)).norm_sqr())
                .sum();
            (sq * grid.step()).sqrt()
        };
        let e: Vec<f64> = [513, 1025, 2049].iter().map(|n| error(*n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..2.2).contains(&order), "order {order}, errors {e:?}");
        }
    }

    #[test]
    fn eigenstate_is_stationary() {
        let grid = UniformGrid::spanning(-8.0, 8.0, 400).unwrap();
        let profile = PotentialProfile::from_fn(grid, Default::default(), |x| 0.5 * x * x).unwrap();
        let particle = Particle::electron();
        let states = stationary_states(&profile, &particle, 3, Confinement::Box).unwrap();
        let f = WaveField::from_real(grid, &states[2].psi, 0.0).unwrap();
        let config = EvolutionConfig::new(0.01, 500).with_rest_phase(true);
        let run = schrodinger_evolve(&f, &profile, &particle, &config).unwrap();
        let last = run.last().unwrap();
        for (a, b) in f.psi.iter().zip(&last.psi) {
            assert!((a.norm() - b.norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn rest_phase_is_a_global_phase() {
        let grid = UniformGrid::spanning(-20.0, 20.0, 512).unwrap();
        let f = WaveField::gaussian_packet(grid, 0.0, 2.0, 0.5).unwrap();
        let particle = Particle::electron();
        let config = EvolutionConfig::new(0.05, 40);
        let without = schrodinger_evolve(&f, &free_profile(&grid), &particle, &config).unwrap();
        let with = schrodinger_evolve(&f, &free_profile(&grid), &particle, &config.with_rest_phase(true)).unwrap();
        let (a, b) = (without.last().unwrap(), with.last().unwrap());
        let phase = Complex64::from_polar(1.0, -particle.rest_frequency() * a.t);
        for (x, y) in a.psi.iter().zip(&b.psi) {
            assert!((x * phase - y).norm() < 1e-14);
        }
    }

    #[test]
    fn absorbing_layer_removes_outgoing_packet() {
        let grid = UniformGrid::spanning(-30.0, 30.0, 1200).unwrap();
        let f = WaveField::gaussian_packet(grid, 10.0, 2.0, 1.5).unwrap();
        let config = EvolutionConfig::new(0.05, 800).with_boundary(Boundary::Absorbing { width: 10.0, strength: 1.0 });
        let run = schrodinger_evolve(&f, &free_profile(&grid), &Particle::electron(), &config).unwrap();
        assert!(run.last().unwrap().norm() < 1e-3);
    }
}
