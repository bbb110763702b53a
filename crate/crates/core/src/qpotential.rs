//! Probability density, quantum potential and Bohm's polar form.
//!
//! In the guide picture the particle's axial speed is the group velocity, so
//! the time it spends near `x`, and hence the probability of finding it
//! there, goes as `1/v_g ∝ E_kin^{−1/2}`. The amplitude `R = p^{1/2}` then
//! defines a quantum potential `U = −(ħ²/2m)R''/R`; for the WKB amplitude it
//! can be written locally in terms of `V'`, `V''` and `E_kin`:
//!
//! `U = −(ħ²/8m)·[V''/E_kin + (5/4)·V'²/E_kin²]`.
//!
//! Everything here uses `ħ = 1`; `S` is therefore the phase of `ψ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::particle::Particle;
use crate::profile::{Interpolation, PotentialProfile};
use crate::solvers::WaveField;
use crate::units::{format_number, UnitSystem};

/// Fraction of `max|E_kin|` below which a point counts as a turning point.
pub const TURNING_FRACTION: f64 = 1e-3;

/// Sign of the `V'²` term in the local quantum potential.
///
/// Differentiating `R ∝ E_kin^{−1/4}` twice gives `+5/4`; the opposite sign
/// is kept only so that [`sign_arbitration`] can show which one the
/// finite-difference oracle selects.
pub const LOCAL_SIGN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KineticField {
    pub grid: UniformGrid,
    /// `ω − ω₀ − V(x)`.
    pub e_kin: Vec<f64>,
    pub allowed: Vec<bool>,
    /// Points within the turning-point exclusion band `|E_kin| ≤ ε_turn`.
    pub near_turning: Vec<bool>,
    pub epsilon_turn: f64,
}

pub fn kinetic_field(particle: &Particle, omega: f64, profile: &PotentialProfile) -> KineticField {
    let grid = *profile.grid();
    let e_kin: Vec<f64> = profile
        .values()
        .iter()
        .map(|v| omega - particle.rest_frequency() - v)
        .collect();
    let epsilon_turn = TURNING_FRACTION * e_kin.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    KineticField {
        grid,
        allowed: e_kin.iter().map(|e| *e > 0.0).collect(),
        near_turning: e_kin.iter().map(|e| e.abs() <= epsilon_turn).collect(),
        e_kin,
        epsilon_turn,
    }
}

impl KineticField {
    /// Positions where `E_kin` changes sign, linearly interpolated.
    pub fn turning_points(&self) -> Vec<f64> {
        self.e_kin
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[0] > 0.0) != (w[1] > 0.0))
            .map(|(i, w)| self.grid.x(i) + self.grid.step() * w[0] / (w[0] - w[1]))
            .collect()
    }

    /// `∫E_kin^{−1/2}dx` over the allowed region, treating `E_kin` as
    /// piecewise linear so that the integrable turning-point singularities
    /// are captured exactly.
    fn inverse_sqrt_integral(&self) -> f64 {
        let h = self.grid.step();
        self.e_kin
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                match (a > 0.0, b > 0.0) {
                    (true, true) => 2.0 * h / (a.sqrt() + b.sqrt()),
                    (true, false) => 2.0 * a.sqrt() * h / (a - b),
                    (false, true) => 2.0 * b.sqrt() * h / (b - a),
                    (false, false) => 0.0,
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityField {
    pub grid: UniformGrid,
    pub p: Vec<f64>,
    pub turning_points: Vec<f64>,
    /// Normalization constant: `p = C·E_kin^{−1/2}`.
    pub scale: f64,
    kinetic: KineticField,
}

impl DensityField {
    /// `∫p dx` with the same piecewise-linear rule used to normalize.
    pub fn integral(&self) -> f64 {
        self.scale * self.kinetic.inverse_sqrt_integral()
    }

    pub fn kinetic(&self) -> &KineticField {
        &self.kinetic
    }

    /// `R = p^{1/2}`.
    pub fn amplitude(&self) -> Vec<f64> {
        self.p.iter().map(|v| v.sqrt()).collect()
    }
}

/// Normalized `p ∝ E_kin^{−1/2}` on the classically allowed region.
pub fn wkb_density(particle: &Particle, omega: f64, profile: &PotentialProfile) -> Result<DensityField> {
    let kinetic = kinetic_field(particle, omega, profile);
    let total = kinetic.inverse_sqrt_integral();
    if !(total > 0.0) {
        return Err(Error::EmptyAllowedRegion);
    }
    let scale = 1.0 / total;
    Ok(DensityField {
        grid: kinetic.grid,
        p: kinetic
            .e_kin
            .iter()
            .map(|e| if *e > 0.0 { scale / e.sqrt() } else { 0.0 })
            .collect(),
        turning_points: kinetic.turning_points(),
        scale,
        kinetic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumPotentialSource {
    LocalFormula,
    BohmFromAmplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantumPotentialField {
    pub grid: UniformGrid,
    /// `None` at excluded points (turning points, nodes, forbidden region,
    /// or too close to the grid ends for the stencil).
    pub u: Vec<Option<f64>>,
    pub source: QuantumPotentialSource,
}

impl QuantumPotentialField {
    pub fn max_abs(&self) -> f64 {
        self.u.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn excluded(&self) -> usize {
        self.u.iter().filter(|v| v.is_none()).count()
    }

    /// `max|U_a − U_b| / max|U_a|` over points defined in both; `None` when
    /// they share no points.
    pub fn relative_difference(&self, other: &QuantumPotentialField) -> Option<f64> {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut any = false;
        for (a, b) in self.u.iter().zip(&other.u) {
            if let (Some(a), Some(b)) = (a, b) {
                diff = diff.max((a - b).abs());
                scale = scale.max(a.abs());
                any = true;
            }
        }
        any.then(|| if scale > 0.0 { diff / scale } else { diff })
    }
}

/// Local quantum potential from `V'`, `V''` and `E_kin` with the given sign
/// on the `V'²` term. Points with `E_kin ≤ ε_turn` are excluded.
pub fn quantum_potential_local_with_sign(
    particle: &Particle,
    omega: f64,
    profile: &PotentialProfile,
    sign: f64,
) -> QuantumPotentialField {
    let kinetic = kinetic_field(particle, omega, profile);
    let m = particle.rest_mass();
    let u = kinetic
        .grid
        .points()
        .zip(&kinetic.e_kin)
        .map(|(x, e)| {
            (*e > kinetic.epsilon_turn).then(|| {
                let d1 = profile.derivative(x);
                let d2 = profile.second_derivative(x);
                -(d2 / e + sign * 1.25 * d1 * d1 / (e * e)) / (8.0 * m)
            })
        })
        .collect();
    QuantumPotentialField {
        grid: kinetic.grid,
        u,
        source: QuantumPotentialSource::LocalFormula,
    }
}

pub fn quantum_potential_local(particle: &Particle, omega: f64, profile: &PotentialProfile) -> QuantumPotentialField {
    quantum_potential_local_with_sign(particle, omega, profile, LOCAL_SIGN)
}

/// `−(1/2m)R''/R` with a fourth-order central stencil, without the
/// convergence check.
fn bohm_raw(grid: &UniformGrid, r: &[f64], particle: &Particle) -> Vec<Option<f64>> {
    let n = r.len();
    let h2 = grid.step() * grid.step();
    let floor = 1e-12 * r.iter().fold(0.0f64, |m, v| m.max(*v));
    let m = particle.rest_mass();
    (0..n)
        .map(|i| {
            if i < 2 || i + 2 >= n || r[i - 2..=i + 2].iter().any(|v| *v <= floor) {
                return None;
            }
            let d2 = (-r[i - 2] + 16.0 * r[i - 1] - 30.0 * r[i] + 16.0 * r[i + 1] - r[i + 2]) / (12.0 * h2);
            Some(-d2 / (2.0 * m * r[i]))
        })
        .collect()
}

/// Bohm's quantum potential `U = −(1/2m)R''/R` of a sampled amplitude.
///
/// The result is compared against the same stencil on every other point;
/// if the two disagree by more than 1% of `max|U|` the grid is too coarse
/// and [`Error::Unresolved`] is returned.
pub fn bohm_quantum_potential(grid: &UniformGrid, r: &[f64], particle: &Particle) -> Result<QuantumPotentialField> {
    if r.len() != grid.len() {
        return Err(Error::InvalidGrid("amplitude length differs from grid".into()));
    }
    if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("amplitude must be finite and non-negative".into()));
    }
    let u = bohm_raw(grid, r, particle);
    let coarse_r: Vec<f64> = r.iter().step_by(2).copied().collect();
    if let Some(coarse_grid) = grid.coarsened().filter(|g| g.len() == coarse_r.len() && g.len() >= 5) {
        let coarse = bohm_raw(&coarse_grid, &coarse_r, particle);
        let scale = u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = coarse
            .iter()
            .enumerate()
            .filter_map(|(j, c)| Some((c.as_ref()?, u[2 * j].as_ref()?)))
            .fold(0.0f64, |m, (c, f)| m.max((c - f).abs()));
        if scale > 0.0 && worst > 1e-2 * scale {
            return Err(Error::Unresolved(format!(
                "quantum potential changes by {:.2e} of its maximum between dx and 2dx",
                worst / scale
            )));
        }
    }
    Ok(QuantumPotentialField {
        grid: *grid,
        u,
        source: QuantumPotentialSource::BohmFromAmplitude,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignArbitration {
    /// Relative difference from the amplitude oracle with `+5/4`.
    pub plus: f64,
    /// Relative difference with `−5/4`.
    pub minus: f64,
}

impl SignArbitration {
    pub fn selected_sign(&self) -> f64 {
        if self.plus <= self.minus {
            1.0
        } else {
            -1.0
        }
    }
}

/// Compares both signs of the local formula against
/// [`bohm_quantum_potential`] applied to `R = p^{1/2}` of the WKB density.
pub fn sign_arbitration(particle: &Particle, omega: f64, profile: &PotentialProfile) -> Result<SignArbitration> {
    let density = wkb_density(particle, omega, profile)?;
    let oracle = bohm_quantum_potential(&density.grid, &density.amplitude(), particle)?;
    let measure = |sign| {
        quantum_potential_local_with_sign(particle, omega, profile, sign)
            .relative_difference(&oracle)
            .ok_or(Error::EmptyAllowedRegion)
    };
    Ok(SignArbitration {
        plus: measure(1.0)?,
        minus: measure(-1.0)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarWave {
    pub grid: UniformGrid,
    pub r: Vec<f64>,
    /// Unwrapped phase; `None` where `R ≤ floor`. Unwrapping restarts after
    /// each excluded stretch.
    pub s: Vec<Option<f64>>,
    pub floor: f64,
    pub t: f64,
}

impl PolarWave {
    /// `R·e^{iS}` where defined.
    pub fn reconstruct(&self) -> Vec<Option<num_complex::Complex64>> {
        self.r
            .iter()
            .zip(&self.s)
            .map(|(r, s)| s.map(|s| num_complex::Complex64::from_polar(*r, s)))
            .collect()
    }

    /// Bohm velocity `S'/m` by central differences; `None` unless both
    /// neighbours carry a phase.
    pub fn velocity(&self, particle: &Particle) -> Vec<Option<f64>> {
        let n = self.s.len();
        let h = self.grid.step();
        (0..n)
            .map(|i| {
                if i == 0 || i + 1 == n {
                    return None;
                }
                Some((self.s[i + 1]? - self.s[i - 1]?) / (2.0 * h * particle.rest_mass()))
            })
            .collect()
    }
}

/// `ψ = R e^{iS}` with `R = |ψ|` and `S` unwrapped along the grid.
pub fn polar_decompose(field: &WaveField) -> PolarWave {
    let r: Vec<f64> = field.psi.iter().map(|z| z.norm()).collect();
    let floor = 1e-12 * r.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut s = Vec::with_capacity(r.len());
    let mut previous: Option<f64> = None;
    for (z, amp) in field.psi.iter().zip(&r) {
        if *amp <= floor {
            s.push(None);
            previous = None;
            continue;
        }
        let raw = z.arg();
        let value = match previous {
            None => raw,
            Some(p) => {
                let two_pi = 2.0 * std::f64::consts::PI;
                p + (raw - p) - two_pi * ((raw - p) / two_pi).round()
            }
        };
        s.push(Some(value));
        previous = Some(value);
    }
    PolarWave {
        grid: field.grid,
        r,
        s,
        floor,
        t: field.t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityResidual {
    pub max: f64,
    pub l2: f64,
    pub points: usize,
}

/// Residual of `∂R/∂t = −(1/2m)(R S'' + 2R'S')` between consecutive slices,
/// with the right side averaged over the two slices. Points where `R` falls
/// below `1e-6·max R` or the phase is undefined nearby are skipped.
pub fn continuity_residual_polar(slices: &[PolarWave], particle: &Particle) -> Result<ContinuityResidual> {
    if slices.len() < 2 {
        return Err(Error::InvalidArgument("need at least two time slices".into()));
    }
    let grid = slices[0].grid;
    let h = grid.step();
    let m = particle.rest_mass();
    let rhs = |w: &PolarWave, i: usize| -> Option<f64> {
        let floor = 1e-6 * w.r.iter().fold(0.0f64, |a, v| a.max(*v));
        if w.r[i - 1..=i + 1].iter().any(|v| *v <= floor) {
            return None;
        }
        let (s0, s1, s2) = (w.s[i - 1]?, w.s[i]?, w.s[i + 1]?);
        let ds = (s2 - s0) / (2.0 * h);
        let d2s = (s2 - 2.0 * s1 + s0) / (h * h);
        let dr = (w.r[i + 1] - w.r[i - 1]) / (2.0 * h);
        Some(-(w.r[i] * d2s + 2.0 * dr * ds) / (2.0 * m))
    };
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    let mut points = 0;
    for pair in slices.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.grid != grid || a.grid != grid {
            return Err(Error::InvalidGrid("time slices use different grids".into()));
        }
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("time slices must be increasing in t".into()));
        }
        for i in 1..grid.len() - 1 {
            if let (Some(ra), Some(rb)) = (rhs(a, i), rhs(b, i)) {
                let res = (b.r[i] - a.r[i]) / dt - 0.5 * (ra + rb);
                max = max.max(res.abs());
                sum += res * res * h;
                points += 1;
            }
        }
    }
    Ok(ContinuityResidual {
        max,
        l2: (sum / (slices.len() - 1) as f64).sqrt(),
        points,
    })
}

pub fn continuity_residual(slices: &[WaveField], particle: &Particle) -> Result<ContinuityResidual> {
    let polar: Vec<PolarWave> = slices.iter().map(polar_decompose).collect();
    continuity_residual_polar(&polar, particle)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantumForce {
    Off,
    /// Local quantum potential for a wave of total frequency `omega`.
    Local { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    /// `½mv² + V + U`.
    pub e_mech: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryOutcome {
    Completed,
    LeftDomain { x: f64 },
    EnteredExcludedZone { x: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub outcome: TrajectoryOutcome,
}

impl Trajectory {
    /// Largest `|E − E₀|/|E₀|` along the path.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].e_mech;
        self.samples
            .iter()
            .map(|s| (s.e_mech - e0).abs())
            .fold(0.0, f64::max)
            / e0.abs()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W, units: UnitSystem) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["t", "x", "v", "E_mech"])?;
        for s in &self.samples {
            csv.write_record([
                format_number(units.time_out(s.t)),
                format_number(units.length_out(s.x)),
                format_number(units.velocity_out(s.v)),
                format_number(units.energy_out(s.e_mech)),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// `V + U` as a spline, together with the excluded-zone mask of `U`.
struct ForceField {
    total: PotentialProfile,
    excluded: Vec<bool>,
}

impl ForceField {
    fn new(particle: &Particle, profile: &PotentialProfile, force: QuantumForce) -> Result<Self> {
        let grid = *profile.grid();
        let (u, excluded) = match force {
            QuantumForce::Off => (vec![0.0; grid.len()], vec![false; grid.len()]),
            QuantumForce::Local { omega } => {
                let field = quantum_potential_local(particle, omega, profile);
                let excluded: Vec<bool> = field.u.iter().map(|v| v.is_none()).collect();
                // excluded samples take the nearest defined value so the
                // spline stays tame; trajectories stop before reaching them
                let mut filled: Vec<f64> = Vec::with_capacity(field.u.len());
                let first = field.u.iter().flatten().next().copied().unwrap_or(0.0);
                let mut last = first;
                for v in &field.u {
                    if let Some(v) = v {
                        last = *v;
                    }
                    filled.push(last);
                }
                (filled, excluded)
            }
        };
        let total: Vec<f64> = profile.values().iter().zip(&u).map(|(v, u)| v + u).collect();
        Ok(Self {
            total: PotentialProfile::new(grid, total, Interpolation::CubicSpline)?,
            excluded,
        })
    }

    fn in_excluded_cell(&self, x: f64) -> bool {
        let (i, _) = self.total.grid().locate(x);
        self.excluded[i] || self.excluded[i + 1]
    }

    /// Largest `|∂²(V + U)/∂x²|` over the grid nodes.
    fn max_curvature(&self) -> f64 {
        self.total
            .grid()
            .points()
            .map(|x| self.total.second_derivative(x).abs())
            .fold(0.0, f64::max)
    }
}

/// Characteristic time `2π/√(max|∂²(V+U)/∂x²|/m)` of the steepest force
/// scale; `None` when the force field is flat.
pub fn characteristic_time(particle: &Particle, profile: &PotentialProfile, force: QuantumForce) -> Result<Option<f64>> {
    let field = ForceField::new(particle, profile, force)?;
    let k = field.max_curvature();
    Ok((k > 0.0).then(|| 2.0 * std::f64::consts::PI / (k / particle.rest_mass()).sqrt()))
}

/// Integrates `m ẍ = −∂(V + U)/∂x` with kick-drift-kick leapfrog.
///
/// Refuses time steps for which the stiffest local oscillation
/// `ω² = max|∂²(V+U)|/m` is unstable (`ω·dt ≥ 2`).
#[allow(clippy::too_many_arguments)]
pub fn modified_newton_trajectory(
    particle: &Particle,
    profile: &PotentialProfile,
    force: QuantumForce,
    x0: f64,
    v0: f64,
    duration: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && duration >= 0.0) {
        return Err(Error::InvalidArgument(format!("bad time stepping: dt = {dt}, duration = {duration}")));
    }
    let field = ForceField::new(particle, profile, force)?;
    let m = particle.rest_mass();
    let omega_max = (field.max_curvature() / m).sqrt();
    if omega_max * dt >= 2.0 {
        return Err(Error::CflViolation {
            dt,
            limit: 2.0 / omega_max,
        });
    }
    let grid = *profile.grid();
    if !grid.contains(x0) {
        return Err(Error::InvalidArgument(format!("start point {x0} lies outside the profile")));
    }
    if field.in_excluded_cell(x0) {
        return Ok(Trajectory {
            samples: vec![],
            outcome: TrajectoryOutcome::EnteredExcludedZone { x: x0 },
        });
    }
    let energy = |x: f64, v: f64| 0.5 * m * v * v + field.total.value(x);
    let accel = |x: f64| -field.total.derivative(x) / m;
    let steps = (duration / dt).round() as usize;
    let (mut x, mut v) = (x0, v0);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(TrajectorySample {
        t: 0.0,
        x,
        v,
        e_mech: energy(x, v),
    });
    let mut a = accel(x);
    let mut outcome = TrajectoryOutcome::Completed;
    for step in 1..=steps {
        v += 0.5 * dt * a;
        x += dt * v;
        if !grid.contains(x) {
            outcome = TrajectoryOutcome::LeftDomain { x };
            break;
        }
        if field.in_excluded_cell(x) {
            outcome = TrajectoryOutcome::EnteredExcludedZone { x };
            break;
        }
        a = accel(x);
        v += 0.5 * dt * a;
        samples.push(TrajectorySample {
            t: step as f64 * dt,
            x,
            v,
            e_mech: energy(x, v),
        });
    }
    Ok(Trajectory { samples, outcome })
}

/// Writes `x,V,E_kin,p,U`; excluded `U` and forbidden-region `p` are left
/// empty and zero respectively.
pub fn write_fields_csv<W: std::io::Write>(
    profile: &PotentialProfile,
    density: &DensityField,
    potential: &QuantumPotentialField,
    writer: W,
    units: UnitSystem,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["x", "V", "E_kin", "p", "U"])?;
    let inverse_length = units.length_out(1.0).recip();
    for (i, x) in density.grid.points().enumerate() {
        csv.write_record([
            format_number(units.length_out(x)),
            format_number(units.energy_out(profile.values()[i])),
            format_number(units.energy_out(density.kinetic.e_kin[i])),
            format_number(density.p[i] * inverse_length),
            potential.u[i].map_or_else(String::new, |u| format_number(units.energy_out(u))),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
