use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle::Particle;
use crate::profile::PotentialProfile;

/// How the eigenproblem is closed at the grid ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Confinement {
    /// The potential itself must confine: every reported state lies below
    /// the potential at both ends.
    #[default]
    Potential,
    /// Hard walls one grid step beyond each end; the box width is
    /// `(N + 1)·dx`.
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenstate {
    /// Energy excluding the rest term.
    pub energy: f64,
    /// Real, normalized so that `Σψ²dx = 1`; first significant lobe positive.
    pub psi: Vec<f64>,
    /// `‖Hψ − Eψ‖/‖ψ‖`.
    pub residual: f64,
}

struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    /// Number of eigenvalues below `lambda` (Sturm sequence count).
    fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        let off2 = self.off * self.off;
        for (i, d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - lambda } else { d - lambda - off2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().cloned().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    fn eigenvalue(&self, index: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T − λ)y = b` by elimination, nudging vanishing pivots.
    fn shifted_solve(&self, lambda: f64, b: &mut [f64]) {
        let n = b.len();
        let tiny = f64::EPSILON * (self.bounds().1 - self.bounds().0).abs().max(1.0);
        let mut c = vec![0.0; n];
        let mut pivot = self.diag[0] - lambda;
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - lambda - self.off * c[i - 1];
                b[i] -= self.off * b[i - 1];
            }
            if pivot.abs() < tiny {
                pivot = tiny;
            }
            c[i] = self.off / pivot;
            b[i] /= pivot;
        }
        for i in (0..n - 1).rev() {
            b[i] -= c[i] * b[i + 1];
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off * x[i + 1];
            }
            out[i] = acc;
        }
    }
}

/// Lowest `n_states` eigenpairs of the three-point Hamiltonian
/// `V − (1/2m)∂²` on the profile's grid.
pub fn stationary_states(
    profile: &PotentialProfile,
    particle: &Particle,
    n_states: usize,
    confinement: Confinement,
) -> Result<Vec<Eigenstate>> {
    let grid = profile.grid();
    let n = grid.len();
    if n_states == 0 || n_states > n {
        return Err(Error::InvalidArgument(format!("cannot compute {n_states} states on {n} points")));
    }
    let dx = grid.step();
    let kinetic = 1.0 / (2.0 * particle.rest_mass() * dx * dx);
    let values = profile.values();
    let h = Tridiagonal {
        diag: values.iter().map(|v| v + 2.0 * kinetic).collect(),
        off: -kinetic,
    };
    let boundary = values[0].min(values[n - 1]);
    let mut states: Vec<Eigenstate> = Vec::with_capacity(n_states);
    let mut work = vec![0.0; n];
    for index in 0..n_states {
        let energy = h.eigenvalue(index);
        if confinement == Confinement::Potential && energy >= boundary {
            return Err(Error::NonConfining { energy, boundary });
        }
        let mut psi: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 101) as f64).collect();
        for _ in 0..4 {
            h.shifted_solve(energy, &mut psi);
            for prev in &states {
                let overlap: f64 = prev.psi.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>() * dx;
                psi.iter_mut().zip(&prev.psi).for_each(|(p, q)| *p -= overlap * q);
            }
            let norm = (psi.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
            psi.iter_mut().for_each(|v| *v /= norm);
        }
        let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(first) = psi.iter().find(|v| v.abs() > 1e-3 * peak) {
            if *first < 0.0 {
                psi.iter_mut().for_each(|v| *v = -*v);
            }
        }
        h.apply(&psi, &mut work);
        let residual = (work.iter().zip(&psi).map(|(a, b)| (a - energy * b).powi(2)).sum::<f64>()
            / psi.iter().map(|v| v * v).sum::<f64>())
        .sqrt();
        states.push(Eigenstate { energy, psi, residual });
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid;
    use std::f64::consts::PI;

    #[test]
    fn infinite_box_levels() {
        let n = 600;
        let dx = 0.01;
        let grid = UniformGrid::new(dx, dx, n).unwrap();
        let width = (n + 1) as f64 * dx;
        let profile = PotentialProfile::constant(grid, 0.0).unwrap();
        let states = stationary_states(&profile, &Particle::electron(), 5, Confinement::Box).unwrap();
        for (i, s) in states.iter().enumerate() {
            let k = (i + 1) as f64 * PI / width;
            assert!((s.energy / (0.5 * k * k) - 1.0).abs() < 1e-3);
            assert!(s.residual <= 1e-9);
        }
        assert!(matches!(
            stationary_states(&profile, &Particle::electron(), 1, Confinement::Potential),
            Err(Error::NonConfining { .. })
        ));
    }

    #[test]
    fn harmonic_spacing_orthonormality_and_nodes() {
        let grid = UniformGrid::spanning(-10.0, 10.0, 1001).unwrap();
        let profile = PotentialProfile::from_fn(grid, Default::default(), |x| 0.5 * x * x).unwrap();
        let states = stationary_states(&profile, &Particle::electron(), 6, Confinement::Potential).unwrap();
        for w in states.windows(2) {
            assert!((w[1].energy - w[0].energy - 1.0).abs() < 1e-3);
        }
        for (i, a) in states.iter().enumerate() {
            assert!(a.residual <= 1e-9);
            for (j, b) in states.iter().enumerate() {
                let dot: f64 = a.psi.iter().zip(&b.psi).map(|(x, y)| x * y).sum::<f64>() * grid.step();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-10);
            }
            let peak = a.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let significant: Vec<f64> = a.psi.iter().cloned().filter(|v| v.abs() > 1e-6 * peak).collect();
            let changes = significant.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
            assert_eq!(changes, i);
            assert!(significant[0] > 0.0);
        }
    }
}
