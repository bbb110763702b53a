use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{potential_on_grid, Boundary, EvolutionConfig, Stencil};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::particle::Particle;
use crate::profile::PotentialProfile;

/// Field `φ` and its time derivative at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KgField {
    pub grid: UniformGrid,
    pub phi: Vec<Complex64>,
    pub dphi_dt: Vec<Complex64>,
    pub t: f64,
}

impl KgField {
    pub fn new(grid: UniformGrid, phi: Vec<Complex64>, dphi_dt: Vec<Complex64>, t: f64) -> Result<Self> {
        if phi.len() != grid.len() || dphi_dt.len() != grid.len() {
            return Err(Error::InvalidGrid("field length differs from grid".into()));
        }
        Ok(Self { grid, phi, dphi_dt, t })
    }

    /// `∫|φ|² dx`.
    pub fn norm(&self) -> f64 {
        self.phi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.step()
    }

    /// Centroid of `|φ|²`.
    pub fn centroid(&self) -> f64 {
        let w: f64 = self.phi.iter().map(|z| z.norm_sqr()).sum();
        self.grid.points().zip(&self.phi).map(|(x, z)| x * z.norm_sqr()).sum::<f64>() / w
    }

    /// `∫φ(x)e^{−ikx}dx`, the amplitude of the plane-wave component `k`.
    pub fn projection(&self, k: f64) -> Complex64 {
        self.grid
            .points()
            .zip(&self.phi)
            .map(|(x, z)| z * Complex64::from_polar(1.0, -k * x))
            .sum::<Complex64>()
            * self.grid.step()
    }
}

/// `∂φ/∂t` that makes `phi` a purely positive-frequency solution
/// (`e^{i(kx − ωt)}` components only) in a uniform section with cutoff
/// `cutoff`, using the lattice dispersion of `stencil` on a periodic grid.
pub fn positive_frequency_velocity(grid: &UniformGrid, phi: &[Complex64], cutoff: f64, stencil: Stencil) -> Vec<Complex64> {
    let n = phi.len();
    let dx = grid.step();
    let mut planner = FftPlanner::new();
    let mut spectrum = phi.to_vec();
    planner.plan_fft_forward(n).process(&mut spectrum);
    for (j, z) in spectrum.iter_mut().enumerate() {
        let j = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let k = 2.0 * std::f64::consts::PI * j / (n as f64 * dx);
        let omega = (stencil.symbol(k, dx) + cutoff * cutoff).sqrt();
        *z *= Complex64::new(0.0, -omega) / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut spectrum);
    spectrum
}

/// Velocity-Verlet stepper for `∂²φ/∂t² = ∂²φ/∂x² − (ω₀ + V)²φ`.
pub struct KleinGordon {
    dt: f64,
    dx: f64,
    stencil: Stencil,
    periodic: bool,
    /// `(ω₀ + V)²` per grid point.
    mass_term: Vec<f64>,
    /// Per-step damping factor of `∂φ/∂t` in the absorbing layer.
    damping: Option<Vec<f64>>,
    scratch: Vec<Complex64>,
}

impl KleinGordon {
    pub fn new(
        grid: &UniformGrid,
        profile: &PotentialProfile,
        particle: &Particle,
        dt: f64,
        boundary: Boundary,
        stencil: Stencil,
    ) -> Result<Self> {
        let dx = grid.step();
        let mass_term: Vec<f64> = potential_on_grid(profile, grid)
            .iter()
            .map(|v| (particle.rest_frequency() + v).powi(2))
            .collect();
        let lambda_max = stencil.max_symbol(dx) + mass_term.iter().cloned().fold(0.0, f64::max);
        let limit = dx.min(2.0 / lambda_max.sqrt());
        // light speed is 1: the light-cone condition is dt ≤ dx; leapfrog
        // also needs dt²λ_max/4 < 1 for the stiffest lattice mode
        if !(dt > 0.0) || dt > dx || dt * dt * lambda_max / 4.0 >= 1.0 {
            return Err(Error::CflViolation { dt, limit });
        }
        let damping = match boundary {
            Boundary::Absorbing { .. } => Some(boundary.absorption(grid).iter().map(|w| (-w * dt).exp()).collect()),
            _ => None,
        };
        Ok(Self {
            dt,
            dx,
            stencil,
            periodic: matches!(boundary, Boundary::Periodic),
            mass_term,
            damping,
            scratch: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    /// `Kφ = −∂²φ + (ω₀ + V)²φ`.
    fn apply_k(&self, phi: &[Complex64], out: &mut [Complex64]) {
        self.stencil.apply(phi, self.dx, self.periodic, out);
        for ((o, m), p) in out.iter_mut().zip(&self.mass_term).zip(phi) {
            *o = *m * p - *o;
        }
    }

    pub fn step(&mut self, field: &mut KgField) {
        let half = 0.5 * self.dt;
        let mut k = std::mem::take(&mut self.scratch);
        self.apply_k(&field.phi, &mut k);
        for (v, a) in field.dphi_dt.iter_mut().zip(&k) {
            *v -= half * a;
        }
        for (p, v) in field.phi.iter_mut().zip(&field.dphi_dt) {
            *p += self.dt * v;
        }
        self.apply_k(&field.phi, &mut k);
        for (v, a) in field.dphi_dt.iter_mut().zip(&k) {
            *v -= half * a;
        }
        if let Some(d) = &self.damping {
            field.dphi_dt.iter_mut().zip(d).for_each(|(v, f)| *v *= f);
        }
        field.t += self.dt;
        self.scratch = k;
    }

    /// Discrete energy `½|π|² + ½⟨φ,Kφ⟩ − (dt²/8)|Kφ|²` (times `dx`), which
    /// the leapfrog scheme conserves exactly in the absence of absorption.
    pub fn energy(&self, field: &KgField) -> f64 {
        let mut k = vec![Complex64::new(0.0, 0.0); field.phi.len()];
        self.apply_k(&field.phi, &mut k);
        let kinetic: f64 = field.dphi_dt.iter().map(|v| v.norm_sqr()).sum();
        let potential: f64 = field.phi.iter().zip(&k).map(|(p, q)| (p.conj() * q).re).sum();
        let correction: f64 = k.iter().map(|q| q.norm_sqr()).sum();
        self.dx * (0.5 * kinetic + 0.5 * potential - self.dt * self.dt / 8.0 * correction)
    }
}

/// Evolves `initial` and returns the snapshots selected by `config`, the
/// initial state first.
pub fn klein_gordon_evolve(
    initial: &KgField,
    profile: &PotentialProfile,
    particle: &Particle,
    config: &EvolutionConfig,
) -> Result<Vec<KgField>> {
    config.validate(&initial.grid)?;
    let mut stepper = KleinGordon::new(&initial.grid, profile, particle, config.dt, config.boundary, config.stencil)?;
    let mut field = initial.clone();
    let mut out = vec![initial.clone()];
    for step in 1..=config.n_steps {
        stepper.step(&mut field);
        if config.keeps(step) {
            out.push(field.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(grid: UniformGrid, x0: f64, sigma: f64, k0: f64, cutoff: f64, stencil: Stencil) -> KgField {
        let phi: Vec<Complex64> = grid
            .points()
            .map(|x| Complex64::from_polar((-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp(), k0 * x))
            .collect();
        let v = positive_frequency_velocity(&grid, &phi, cutoff, stencil);
        KgField::new(grid, phi, v, 0.0).unwrap()
    }

    #[test]
    fn refuses_unstable_steps() {
        let grid = UniformGrid::new(0.0, 0.1, 200).unwrap();
        let profile = PotentialProfile::constant(grid, 0.0).unwrap();
        let p = Particle::electron();
        assert!(matches!(
            KleinGordon::new(&grid, &profile, &p, 0.11, Boundary::Periodic, Stencil::Second),
            Err(Error::CflViolation { .. })
        ));
        // within the light cone but too stiff for the mass term
        let heavy = Particle::new(25.0).unwrap();
        assert!(KleinGordon::new(&grid, &profile, &heavy, 0.09, Boundary::Periodic, Stencil::Second).is_err());
        assert!(KleinGordon::new(&grid, &profile, &p, 0.05, Boundary::Periodic, Stencil::Second).is_ok());
    }

    #[test]
    fn energy_is_conserved() {
        let grid = UniformGrid::new(-40.0, 0.1, 800).unwrap();
        let profile = PotentialProfile::from_fn(grid, Default::default(), |x| 0.3 * (-x * x / 20.0).exp()).unwrap();
        let p = Particle::electron();
        for stencil in [Stencil::Second, Stencil::Fourth] {
            let mut field = packet(grid, -10.0, 3.0, 1.0, 1.0, stencil);
            let mut kg = KleinGordon::new(&grid, &profile, &p, 0.05, Boundary::Periodic, stencil).unwrap();
            let e0 = kg.energy(&field);
            for _ in 0..10_000 {
                kg.step(&mut field);
            }
            assert!(((kg.energy(&field) - e0) / e0).abs() < 1e-6);
        }
    }

    #[test]
    fn rest_packet_oscillates_at_cutoff() {
        let grid = UniformGrid::new(-50.0, 0.1, 1000).unwrap();
        let profile = PotentialProfile::constant(grid, 0.0).unwrap();
        let p = Particle::electron();
        let initial = packet(grid, 0.0, 5.0, 0.0, 1.0, Stencil::Second);
        let config = EvolutionConfig::new(0.02, 1000).with_boundary(Boundary::Periodic).with_snapshots(10);
        let run = klein_gordon_evolve(&initial, &profile, &p, &config).unwrap();
        let t: Vec<f64> = run.iter().map(|f| f.t).collect();
        let phase: Vec<f64> = run.iter().map(|f| f.projection(0.0).arg()).collect();
        let mut unwrapped = vec![phase[0]];
        for w in phase.windows(2) {
            let mut d = w[1] - w[0];
            d -= 2.0 * std::f64::consts::PI * (d / (2.0 * std::f64::consts::PI)).round();
            unwrapped.push(unwrapped.last().unwrap() + d);
        }
        let (slope, _) = crate::grid::linear_fit(&t, &unwrapped);
        let omega_k = (1.0 + Stencil::Second.symbol(0.0, 0.1)).sqrt();
        assert!((-slope / omega_k - 1.0).abs() < 1e-3, "slope {slope}");
        let drift = run.iter().map(|f| (f.centroid() - run[0].centroid()).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-6, "drift {drift}");
    }
}
