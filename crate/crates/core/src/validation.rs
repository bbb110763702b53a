//! Cross-module acceptance checks.
//!
//! Each criterion runs a small, fixed experiment and compares the outcome with
//! an independent reference: a closed form, a published number, or one of the
//! [`crate::solvers`] oracles. The same functions back the `acceptance` test
//! target and the command-line `validate` subcommand.

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::DispersionPoint;
use crate::error::Result;
use crate::geometry::{potential_to_geometry, width_from_cutoff};
use crate::grid::{linear_fit, UniformGrid};
use crate::orbits::{
    quantize_nonrelativistic, quantize_relativistic, relativistic_shift, zigzag_consistency, Coupling,
};
use crate::particle::Particle;
use crate::profile::{Interpolation, PotentialFamily, PotentialProfile};
use crate::qpotential::{bohm_quantum_potential, continuity_residual, sign_arbitration, wkb_density};
use crate::raytrace::{clock_frequency, trace, zigzag_period, RayState, TraceOutcome};
use crate::scatter::{scattering, transmission_spectrum, Segment, Structure, WaveRegime};
use crate::solvers::{
    klein_gordon_evolve, positive_frequency_velocity, schrodinger_evolve, stationary_states, Boundary, Confinement,
    EvolutionConfig, KgField, Stencil, WaveField,
};
use crate::units::{si, UnitSystem, FINE_STRUCTURE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    /// Human-readable acceptance bound, e.g. `"= 0.2108 ± 1e-8 rel"`.
    pub bound: String,
    pub passed: bool,
}

impl Check {
    fn relative(label: &str, measured: f64, reference: f64, tolerance: f64) -> Self {
        let passed = ((measured - reference) / reference).abs() <= tolerance;
        Self {
            label: label.into(),
            measured,
            bound: format!("{reference:.6e} within {tolerance:.0e} relative"),
            passed,
        }
    }

    fn at_most(label: &str, measured: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            bound: format!("<= {limit:.3e}"),
            passed: measured <= limit,
        }
    }

    fn in_range(label: &str, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            bound: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&measured),
        }
    }

    fn failed(label: &str, error: impl std::fmt::Display) -> Self {
        Self {
            label: format!("{label}: {error}"),
            measured: f64::NAN,
            bound: "computation must succeed".into(),
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// One line: status, id, title and each check's measured value.
    pub fn summary_line(&self) -> String {
        let details: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{} = {:.6e} ({})", c.label, c.measured, c.bound))
            .collect();
        format!(
            "[{}] criterion {:>2}: {} | {} | {:.2}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            details.join("; "),
            self.seconds
        )
    }
}

type Runner = fn() -> Result<Vec<Check>>;

/// `(id, title, runner)` for every criterion, in order.
pub const CRITERIA: [(u8, &str, Runner); 10] = [
    (1, "guide width of a free electron", guide_width),
    (2, "group and phase velocity product", kinematic_identity),
    (3, "zigzag ray in a constant guide", ray_trace),
    (4, "tunneling through a rectangular barrier", tunneling),
    (5, "unitarity and reciprocity of scattering", unitarity),
    (6, "Bohr levels and zigzag quantization", bohr_levels),
    (7, "local quantum potential against amplitude oracle", quantum_potential),
    (8, "continuity equation on an evolved packet", continuity),
    (9, "Klein-Gordon packet dispersion", klein_gordon),
    (10, "WKB density against a high-n eigenstate", wkb_eigenstate),
];

pub fn run(id: u8) -> Option<CriterionReport> {
    let (id, title, runner) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let checks = runner().unwrap_or_else(|e| vec![Check::failed("run", e)]);
    Some(CriterionReport {
        id: *id,
        title: (*title).into(),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every criterion (in parallel) and returns the reports in id order.
pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.par_iter().filter_map(|(id, _, _)| run(*id)).collect()
}

fn guide_width() -> Result<Vec<Check>> {
    let e = Particle::electron();
    let width = UnitSystem::SI.length_out(width_from_cutoff(e.rest_frequency())?);
    Ok(vec![Check::relative("a [m]", width, 1.213e-12, 1e-3)])
}

fn kinematic_identity() -> Result<Vec<Check>> {
    let decades = |i: usize| 10f64.powf(-2.0 + 4.0 * i as f64 / 99.0);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let cutoff = decades(i);
        for j in 0..100 {
            let point = DispersionPoint::from_k(decades(j) * cutoff, cutoff)?;
            let product = point.group_velocity.unwrap_or(f64::NAN) * point.phase_velocity.unwrap_or(f64::NAN);
            worst = worst.max((product - 1.0).abs());
        }
    }
    Ok(vec![Check::at_most("max |v_g v_ph / c² - 1|", worst, 1e-12)])
}

fn ray_trace() -> Result<Vec<Check>> {
    let e = Particle::electron();
    let grid = UniformGrid::spanning(0.0, 2000.0, 2001)?;
    let profile = PotentialProfile::constant(grid, 0.0)?;
    let geometry = potential_to_geometry(&e, &profile)?;
    let omega = SQRT_2;
    let vg = DispersionPoint::from_omega(omega, e.rest_frequency())?
        .group_velocity
        .unwrap_or(f64::NAN);
    let period_length = zigzag_period(&e, vg)?;
    let t = trace(omega, &geometry, RayState::centered(&geometry, 1.0), 100.0 * period_length / vg)?;
    let mut checks = vec![Check::relative("effective velocity", t.effective_velocity, vg, 1e-3)];
    if t.outcome != TraceOutcome::Completed {
        checks.push(Check::failed("trace", format!("{:?}", t.outcome)));
    }
    checks.push(Check::relative(
        "zigzag length",
        t.mean_zigzag_length().unwrap_or(f64::NAN),
        period_length,
        1e-3,
    ));
    checks.push(Check::relative(
        "bounce angular frequency",
        t.zigzag_angular_frequency().unwrap_or(f64::NAN),
        clock_frequency(&e, vg)?,
        5e-3,
    ));
    Ok(checks)
}

/// Transmitted probability of a narrow-band packet (energy 1, σ_x = 35)
/// through the unit barrier, and the transfer-matrix value at its centre.
pub fn packet_transmission() -> Result<(f64, f64)> {
    let e = Particle::electron();
    let (height, length, energy) = (2.0, 1.0, 1.0);
    // dx = 0.2 with points at half-integer multiples, so exactly five
    // samples fall inside [0, 1] and the sampled barrier has width 1
    let n = 4096;
    let dx = 0.2;
    let grid = UniformGrid::new(-0.5 * (n as f64 - 1.0) * dx + 0.1 - 0.1 * (n % 2) as f64, dx, n)?;
    debug_assert!(grid.points().filter(|x| (0.0..=length).contains(x)).count() == 5);
    let family = PotentialFamily::SquareBarrier {
        height,
        left: 0.0,
        right: length,
    };
    let profile = PotentialProfile::from_family(grid, Interpolation::Linear, &family)?;
    let k0 = (2.0 * energy * e.rest_mass()).sqrt();
    let initial = WaveField::gaussian_packet(grid, -205.0, 35.0, k0)?;
    let dt = 0.05;
    let steps = (298.0 / dt) as usize;
    let config = EvolutionConfig::new(dt, steps).with_stencil(Stencil::Fourth);
    let run = schrodinger_evolve(&initial, &profile, &e, &config)?;
    let transmitted = run.last().map_or(f64::NAN, |f| f.probability_right_of(length));
    let structure = Structure::barrier(0.0, height, length)?;
    let reference = scattering(&structure, e.rest_frequency() + energy, &e, WaveRegime::Schrodinger)?.transmittance;
    Ok((transmitted, reference))
}

fn tunneling() -> Result<Vec<Check>> {
    let e = Particle::electron();
    let omega = e.rest_frequency() + 1.0;
    let barrier = Structure::barrier(0.0, 2.0, 1.0)?;
    let t = scattering(&barrier, omega, &e, WaveRegime::Schrodinger)?.transmittance;
    let analytic = 1.0 / SQRT_2.cosh().powi(2);
    let mut checks = vec![Check::relative("transfer-matrix T", t, analytic, 1e-8)];
    let (packet, reference) = packet_transmission()?;
    checks.push(Check::relative("packet transmission", packet, reference, 2e-2));
    let lengths: Vec<f64> = (2..=6).map(f64::from).collect();
    let log_t = lengths
        .iter()
        .map(|l| Ok(scattering(&Structure::barrier(0.0, 2.0, *l)?, omega, &e, WaveRegime::Schrodinger)?.log_transmittance))
        .collect::<Result<Vec<f64>>>()?;
    let (slope, _) = linear_fit(&lengths, &log_t);
    let kappa = (2.0 * e.rest_mass() * (2.0 - 1.0)).sqrt();
    checks.push(Check::relative("d ln T / dL", slope, -2.0 * kappa, 2e-2));
    Ok(checks)
}

fn unitarity() -> Result<Vec<Check>> {
    let e = Particle::electron();
    let structure = Structure::new(vec![
        Segment::lead(0.0),
        Segment::section(0.7, 0.9),
        Segment::section(1.3, -0.3),
        Segment::section(0.4, 1.6),
        Segment::section(2.1, 0.2),
        Segment::section(0.9, 1.1),
        Segment::lead(0.25),
    ])?;
    let (lo, hi) = (e.rest_frequency() + 0.3, e.rest_frequency() + 4.0);
    let forward = transmission_spectrum(&structure, lo, hi, 200, &e, WaveRegime::Schrodinger)?;
    let backward = transmission_spectrum(&structure.reversed(), lo, hi, 200, &e, WaveRegime::Schrodinger)?;
    let mut flux: f64 = 0.0;
    let mut reciprocity: f64 = 0.0;
    let mut gaps = 0;
    for (f, b) in forward.iter().zip(&backward) {
        match (&f.result, &b.result) {
            (Some(f), Some(b)) => {
                flux = flux.max((f.reflectance + f.transmittance - 1.0).abs());
                reciprocity = reciprocity.max((f.transmittance - b.transmittance).abs());
            }
            _ => gaps += 1,
        }
    }
    let mut checks = vec![
        Check::at_most("max |R + T - 1|", flux, 1e-10),
        Check::at_most("max |T_fwd - T_rev|", reciprocity, 1e-10),
    ];
    if gaps > 0 {
        checks.push(Check::failed("spectrum", format!("{gaps} points without a channel")));
    }
    Ok(checks)
}

fn bohr_levels() -> Result<Vec<Check>> {
    let si_coupling = Coupling::si_hydrogen();
    let ground = quantize_nonrelativistic(&si_coupling, 1)?;
    let natural = Coupling::natural_hydrogen(&Particle::electron());
    let e1 = quantize_nonrelativistic(&natural, 1)?.energy;
    let mut spread: f64 = 0.0;
    for n in 1..=10u32 {
        let en = quantize_nonrelativistic(&natural, n)?.energy;
        spread = spread.max((en * f64::from(n * n) / e1 - 1.0).abs());
    }
    let shift = relativistic_shift(&natural, 1)?;
    let rel = quantize_relativistic(&natural, 1)?;
    Ok(vec![
        Check::relative("r_1 [m]", ground.r, 5.292e-11, 1e-3),
        Check::relative("E_1 [eV]", ground.energy / si::ELEMENTARY_CHARGE, -13.606, 1e-3),
        Check::at_most("max |E_n n² / E_1 - 1|", spread, 1e-12),
        Check::in_range("relativistic shift / α²", shift / FINE_STRUCTURE.powi(2), 0.5, 2.0),
        Check::at_most("zigzag residual n = 1", zigzag_consistency(&natural, &rel, 1)?, 1e-8),
    ])
}

fn quantum_potential() -> Result<Vec<Check>> {
    let e = Particle::electron();
    let grid = UniformGrid::spanning(-6.0, 6.0, 12_001)?;
    let family = PotentialFamily::GaussianBump {
        height: 0.5,
        center: 0.0,
        width: 1.0,
    };
    let profile = PotentialProfile::from_family(grid, Interpolation::CubicSpline, &family)?;
    let omega = e.rest_frequency() + 1.0;
    let arbitration = sign_arbitration(&e, omega, &profile)?;
    let amplitude = wkb_density(&e, omega, &profile)?.amplitude();
    let base = bohm_quantum_potential(&grid, &amplitude, &e)?;
    let mut binary: f64 = 0.0;
    for factor in [0.25, 8.0, 1024.0] {
        let scaled: Vec<f64> = amplitude.iter().map(|r| r * factor).collect();
        let other = bohm_quantum_potential(&grid, &scaled, &e)?;
        binary = binary.max(base.relative_difference(&other).unwrap_or(f64::NAN));
    }
    let mut general: f64 = 0.0;
    for factor in [0.37, 3.3, 71.0] {
        let scaled: Vec<f64> = amplitude.iter().map(|r| r * factor).collect();
        let other = bohm_quantum_potential(&grid, &scaled, &e)?;
        general = general.max(base.relative_difference(&other).unwrap_or(f64::NAN));
    }
    Ok(vec![
        Check::at_most("local (+5/4) vs amplitude oracle", arbitration.plus, 1e-6),
        Check {
            label: "local (-5/4) vs amplitude oracle".into(),
            measured: arbitration.minus,
            bound: "> 1e-2 (rejected sign)".into(),
            passed: arbitration.minus > 1e-2,
        },
        Check::at_most("scale invariance, binary factors", binary, 0.0),
        // other factors agree to the rounding level of the stencil
        Check::at_most(
            "scale invariance, general factors (max |ΔU|)",
            general * base.max_abs(),
            64.0 * f64::EPSILON / (grid.step() * grid.step()),
        ),
    ])
}

/// L2 continuity residual for the free packet on `n` points over `[−20, 20)`.
pub fn continuity_at(n: usize) -> Result<f64> {
    let e = Particle::electron();
    let dx = 40.0 / n as f64;
    let grid = UniformGrid::new(-20.0, dx, n)?;
    let initial = WaveField::gaussian_packet(grid, -2.0, 1.0, 1.0)?;
    let dt = 0.5 * dx;
    let steps = (2.0 / dt).round() as usize;
    let config = EvolutionConfig::new(dt, steps).with_snapshots(1);
    let run = schrodinger_evolve(&initial, &PotentialProfile::constant(grid, 0.0)?, &e, &config)?;
    Ok(continuity_residual(&run, &e)?.l2)
}

fn continuity() -> Result<Vec<Check>> {
    let residuals = [512, 1024, 2048]
        .par_iter()
        .map(|n| continuity_at(*n))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vec![
        Check::in_range("order 512 -> 1024", (residuals[0] / residuals[1]).log2(), 1.8, 2.2),
        Check::in_range("order 1024 -> 2048", (residuals[1] / residuals[2]).log2(), 1.8, 2.2),
    ])
}

fn kg_packet(grid: UniformGrid, x0: f64, sigma: f64, k0: f64, cutoff: f64) -> Result<KgField> {
    let phi: Vec<num_complex::Complex64> = grid
        .points()
        .map(|x| num_complex::Complex64::from_polar((-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp(), k0 * x))
        .collect();
    let velocity = positive_frequency_velocity(&grid, &phi, cutoff, Stencil::Fourth);
    KgField::new(grid, phi, velocity, 0.0)
}

/// Centroid speed of a Klein-Gordon packet with carrier `k0` and spectral
/// width 0.05.
pub fn klein_gordon_centroid_speed(k0: f64) -> Result<f64> {
    let e = Particle::electron();
    let grid = UniformGrid::new(-60.0, 0.1, 2600)?;
    let profile = PotentialProfile::constant(grid, 0.0)?;
    let initial = kg_packet(grid, 0.0, 10.0, k0, e.rest_frequency())?;
    let config = EvolutionConfig::new(0.05, 3000)
        .with_boundary(Boundary::Periodic)
        .with_stencil(Stencil::Fourth)
        .with_snapshots(100);
    let run = klein_gordon_evolve(&initial, &profile, &e, &config)?;
    let t: Vec<f64> = run.iter().map(|f| f.t).collect();
    let x: Vec<f64> = run.iter().map(|f| f.centroid()).collect();
    Ok(linear_fit(&t, &x).0)
}

/// Frequency of the `k0` component of a Klein-Gordon packet, from the phase
/// slope of its plane-wave projection.
pub fn klein_gordon_frequency(k0: f64) -> Result<f64> {
    let e = Particle::electron();
    let grid = UniformGrid::new(-130.0, 0.1, 2600)?;
    let profile = PotentialProfile::constant(grid, 0.0)?;
    let initial = kg_packet(grid, 0.0, 10.0, k0, e.rest_frequency())?;
    let config = EvolutionConfig::new(0.05, 400)
        .with_boundary(Boundary::Periodic)
        .with_stencil(Stencil::Fourth)
        .with_snapshots(4);
    let run = klein_gordon_evolve(&initial, &profile, &e, &config)?;
    let t: Vec<f64> = run.iter().map(|f| f.t).collect();
    let mut phase: Vec<f64> = Vec::with_capacity(run.len());
    for f in &run {
        let raw = f.projection(k0).arg();
        phase.push(match phase.last() {
            None => raw,
            Some(&p) => p + (raw - p) - 2.0 * PI * ((raw - p) / (2.0 * PI)).round(),
        });
    }
    Ok(-linear_fit(&t, &phase).0)
}

fn klein_gordon() -> Result<Vec<Check>> {
    let e = Particle::electron();
    let speed = klein_gordon_centroid_speed(e.rest_frequency())?;
    let ks = [0.5, 1.0, 1.5, 2.0, 2.5];
    let measured = ks
        .par_iter()
        .map(|k| klein_gordon_frequency(*k))
        .collect::<Result<Vec<f64>>>()?;
    let misfit = ks
        .iter()
        .zip(&measured)
        .map(|(k, w)| (w / k.hypot(e.rest_frequency()) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::relative("centroid speed at k0 = ω0/c", speed, 1.0 / SQRT_2, 1e-2),
        Check::at_most("max ω(k) misfit", misfit, 1e-2),
    ])
}

/// Largest relative deviation between the wavelength-averaged density of
/// harmonic eigenstate `n` and the WKB density, over `|x| ≤ 0.8 x_t`.
pub fn wkb_eigenstate_deviation(n: usize) -> Result<f64> {
    let e = Particle::electron();
    let grid = UniformGrid::spanning(-14.0, 14.0, 2048)?;
    let family = PotentialFamily::Harmonic {
        stiffness: 1.0,
        center: 0.0,
    };
    let profile = PotentialProfile::from_family(grid, Interpolation::CubicSpline, &family)?;
    let states = stationary_states(&profile, &e, n + 1, Confinement::Potential)?;
    let state = &states[n];
    let density: Vec<f64> = state.psi.iter().map(|v| v * v).collect();
    let wkb = wkb_density(&e, e.rest_frequency() + state.energy, &profile)?;
    let xt = (2.0 * state.energy).sqrt();
    let mut worst: f64 = 0.0;
    for (i, x) in grid.points().enumerate() {
        if x.abs() > 0.8 * xt {
            continue;
        }
        let p_local = (2.0 * e.rest_mass() * (state.energy - 0.5 * x * x)).sqrt();
        let window = 2.0 * PI / p_local;
        let average = window_average(&grid, &density, x - 0.5 * window, x + 0.5 * window);
        worst = worst.max((average / wkb.p[i] - 1.0).abs());
    }
    Ok(worst)
}

/// Mean of the piecewise-linear interpolant of `values` over `[a, b]`.
fn window_average(grid: &UniformGrid, values: &[f64], a: f64, b: f64) -> f64 {
    let value_at = |x: f64| {
        let (i, t) = grid.locate(x);
        values[i] * (1.0 - t) + values[i + 1] * t
    };
    let h = grid.step();
    let mut nodes = vec![a];
    let first = ((a - grid.start()) / h).floor() as i64 + 1;
    let mut j = first;
    while grid.start() + j as f64 * h < b {
        nodes.push(grid.start() + j as f64 * h);
        j += 1;
    }
    nodes.push(b);
    let integral: f64 = nodes
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (value_at(w[0]) + value_at(w[1])))
        .sum();
    integral / (b - a)
}

fn wkb_eigenstate() -> Result<Vec<Check>> {
    Ok(vec![Check::at_most(
        "max |<|ψ|²> / p_WKB - 1|, n = 40",
        wkb_eigenstate_deviation(40)?,
        5e-2,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_average_of_linear_function_is_midpoint() {
        let grid = UniformGrid::spanning(0.0, 10.0, 101).unwrap();
        let values: Vec<f64> = grid.points().map(|x| 3.0 * x + 1.0).collect();
        let avg = window_average(&grid, &values, 2.33, 5.71);
        assert!((avg - (3.0 * 0.5 * (2.33 + 5.71) + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn quick_criteria_pass() {
        for id in [1, 2, 5, 6] {
            let report = run(id).unwrap();
            assert!(report.passed(), "{}", report.summary_line());
        }
        assert!(run(11).is_none());
    }
}
