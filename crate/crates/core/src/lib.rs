//! Numerical toolkit for the waveguide picture of single-particle quantum
//! mechanics.
//!
//! A particle of rest frequency `ω₀` is modelled as the TE₁₀ mode of a
//! rectangular guide whose cutoff is shifted by the local potential,
//! `ω₀ᵥ(x) = ω₀ + V(x)/ħ`. The crate covers the dispersion kinematics of that
//! mode, the mapping from a potential to a guide width, the zigzag ray picture,
//! transfer-matrix tunneling through piecewise-constant sections, the circular
//! orbit quantization built on phase-wave overtaking, and the local quantum
//! potential. The [`solvers`] module holds independent finite-difference
//! Schrödinger and Klein-Gordon solvers used to cross-check all of the above.
//!
//! All computations use natural electron units (`c = ħ = mₑ = 1`); see
//! [`units`] for conversion at I/O boundaries.

pub mod dispersion;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod orbits;
pub mod particle;
pub mod profile;
pub mod qpotential;
pub mod raytrace;
pub mod scatter;
pub mod solvers;
pub mod units;
pub mod validation;

pub use error::{Error, Result};
pub use grid::UniformGrid;
pub use particle::Particle;
pub use profile::{Interpolation, PotentialFamily, PotentialProfile};
