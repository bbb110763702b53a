//! Zigzag ray picture of the guided mode.
//!
//! The particle is carried by a ray moving at `c` between the two walls of the
//! guide. At axial angle `φ` (measured from the transverse direction) the
//! axial speed is `c·sin φ = v_g`, so a narrowing guide slows the ray's axial
//! progress and a guide pinched below the frequency's cutoff turns it back.
//!
//! The bottom wall sits at `y = 0` and the top wall at `y = a(x)`. The angle is
//! re-evaluated from the local dispersion at the midpoint of every straight
//! segment; segments end at a wall, or earlier when the width would change by
//! more than [`TraceOptions::max_width_change`]. Reflection is specular in the
//! guide's local frame (wall slope ignored).

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::GuideGeometry;
use crate::particle::Particle;
use crate::units::{format_number, UnitSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayState {
    pub x: f64,
    pub y: f64,
    /// +1 moving toward the top wall, −1 toward the bottom wall.
    pub transverse: f64,
    /// +1 moving toward increasing x, −1 toward decreasing x.
    pub axial: f64,
    pub phi: f64,
    pub t: f64,
    /// Accumulated `∫ ω₀ᵥ cos φ dt`.
    pub clock_phase: f64,
}

impl RayState {
    /// Ray at mid-width moving down and forward, the default launch.
    pub fn centered(geometry: &GuideGeometry, x: f64) -> Self {
        Self {
            x,
            y: 0.5 * geometry.width_at(x),
            transverse: -1.0,
            axial: 1.0,
            phi: 0.0,
            t: 0.0,
            clock_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceOutcome {
    Completed,
    DomainExit { x: f64 },
    TurningPoint { x: f64 },
    SegmentLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TurningPolicy {
    /// Stop the trace and report the turning point.
    Terminate,
    /// Record the turning point and continue with the axial direction reversed.
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Relative width change that forces a segment to be split.
    pub max_width_change: f64,
    pub turning_policy: TurningPolicy,
    pub max_segments: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            max_width_change: 1e-3,
            turning_policy: TurningPolicy::Terminate,
            max_segments: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZigzagTrace {
    pub omega: f64,
    pub states: Vec<RayState>,
    /// Indices into `states` of wall contacts.
    pub reflections: Vec<usize>,
    pub walls: Vec<Wall>,
    pub turning_points: Vec<f64>,
    pub effective_velocity: f64,
    pub outcome: TraceOutcome,
}

fn angle(omega: f64, cutoff: f64) -> Option<f64> {
    if omega > cutoff && cutoff > 0.0 {
        let k = ((omega - cutoff) * (omega + cutoff)).sqrt();
        Some((k / omega).min(1.0).asin())
    } else {
        None
    }
}

/// `φ = arcsin(v_g/c)` from the local dispersion at `x`.
pub fn local_angle(omega: f64, geometry: &GuideGeometry, x: f64) -> Result<f64> {
    let cutoff = geometry.cutoff_at(x);
    angle(omega, cutoff).ok_or(Error::BelowCutoff { x, omega, cutoff })
}

fn check_velocity(v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::Superluminal { velocity: v, c: 1.0 });
    }
    Ok(())
}

/// Axial length of one full zigzag, `λ₀ tan φ`, for a particle of rest
/// frequency `rest_frequency` moving at `v` with light speed `c`.
///
/// Units are whatever `rest_frequency`, `c` and `v` are expressed in; the
/// result is `2πc/ω₀ · (v/c)/√(1 − v²/c²)`.
pub fn zigzag_length(rest_frequency: f64, c: f64, v: f64) -> f64 {
    let beta = v / c;
    2.0 * PI * c / rest_frequency * beta / (1.0 - beta * beta).sqrt()
}

pub fn zigzag_period(particle: &Particle, v_g: f64) -> Result<f64> {
    check_velocity(v_g)?;
    Ok(zigzag_length(particle.rest_frequency(), 1.0, v_g))
}

/// Zigzag length inside a section whose cutoff is `cutoff` rather than `ω₀`.
pub fn zigzag_period_in_guide(cutoff: f64, v_g: f64) -> Result<f64> {
    check_velocity(v_g)?;
    if !(cutoff > 0.0) {
        return Err(Error::NonPositiveCutoff(cutoff));
    }
    Ok(zigzag_length(cutoff, 1.0, v_g))
}

/// Moving clock rate `ω₀ cos φ = ω₀√(1 − v²/c²)`.
pub fn clock_frequency(particle: &Particle, v_g: f64) -> Result<f64> {
    check_velocity(v_g)?;
    Ok(particle.rest_frequency() * (1.0 - v_g * v_g).sqrt())
}

struct Segment {
    length: f64,
    hits_wall: bool,
}

struct Tracer<'a> {
    omega: f64,
    geometry: &'a GuideGeometry,
    options: TraceOptions,
}

impl Tracer<'_> {
    fn angle_at(&self, x: f64) -> Option<f64> {
        angle(self.omega, self.geometry.cutoff_at(x))
    }

    fn plan(&self, state: &RayState, phi: f64) -> Segment {
        let (sin, cos) = phi.sin_cos();
        let g = self.geometry;
        let wall_distance = if state.transverse < 0.0 {
            state.y / cos
        } else {
            // solve y + s cos φ = a(x + s sin φ) by Newton
            let mut s = ((g.width_at(state.x) - state.y) / cos).max(0.0);
            for _ in 0..50 {
                let x = state.x + state.axial * sin * s;
                let residual = state.y + cos * s - g.width_at(x);
                let slope = cos - state.axial * sin * g.width_slope_at(x);
                let delta = residual / slope;
                s = (s - delta).max(0.0);
                if delta.abs() <= 1e-15 * (s + g.width_at(x)) {
                    break;
                }
            }
            s
        };
        let a0 = g.width_at(state.x);
        let x_end = state.x + state.axial * sin * wall_distance;
        let change = (g.width_at(x_end) - a0).abs() / a0;
        if change > self.options.max_width_change && wall_distance.is_finite() {
            Segment {
                length: wall_distance * 0.5 * self.options.max_width_change / change,
                hits_wall: false,
            }
        } else {
            Segment {
                length: wall_distance,
                hits_wall: true,
            }
        }
    }

    /// Last allowed position between an allowed `from` and forbidden `to`.
    fn turning_point(&self, from: f64, to: f64) -> f64 {
        let (mut lo, mut hi) = (from, to);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.angle_at(mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo).abs() <= 1e-14 * lo.abs().max(1.0) {
                break;
            }
        }
        lo
    }
}

pub fn trace(omega: f64, geometry: &GuideGeometry, initial: RayState, duration: f64) -> Result<ZigzagTrace> {
    trace_with(omega, geometry, initial, duration, TraceOptions::default())
}

pub fn trace_with(
    omega: f64,
    geometry: &GuideGeometry,
    initial: RayState,
    duration: f64,
    options: TraceOptions,
) -> Result<ZigzagTrace> {
    if !geometry.contains(initial.x) {
        return Err(Error::InvalidArgument(format!(
            "initial x = {} lies outside the guide",
            initial.x
        )));
    }
    let a0 = geometry.width_at(initial.x);
    if !(initial.y >= 0.0 && initial.y <= a0) {
        return Err(Error::InvalidArgument(format!(
            "initial y = {} lies outside the walls [0, {a0}]",
            initial.y
        )));
    }
    if !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be non-negative, got {duration}")));
    }
    let tracer = Tracer {
        omega,
        geometry,
        options,
    };

    let mut state = initial;
    state.phi = local_angle(omega, geometry, initial.x)?;
    state.transverse = if initial.transverse >= 0.0 { 1.0 } else { -1.0 };
    state.axial = if initial.axial >= 0.0 { 1.0 } else { -1.0 };

    let mut states = vec![state];
    let mut reflections = Vec::new();
    let mut walls = Vec::new();
    let mut turning_points = Vec::new();
    let mut phi_hint: Option<f64> = None;
    let (x_min, x_max) = (geometry.grid().start(), geometry.grid().end());

    let outcome = loop {
        if state.t >= duration {
            break TraceOutcome::Completed;
        }
        if states.len() > options.max_segments {
            break TraceOutcome::SegmentLimit;
        }

        let phi_start = match phi_hint.take().or_else(|| tracer.angle_at(state.x)) {
            Some(phi) => phi,
            None => {
                turning_points.push(state.x);
                break TraceOutcome::TurningPoint { x: state.x };
            }
        };
        // midpoint re-evaluation of the angle
        let trial = tracer.plan(&state, phi_start);
        let x_mid = state.x + state.axial * phi_start.sin() * trial.length * 0.5;
        let phi = tracer.angle_at(x_mid).filter(|p| *p > 0.0).unwrap_or(phi_start);
        let mut segment = tracer.plan(&state, phi);
        let (sin, cos) = phi.sin_cos();

        let mut x_end = state.x + state.axial * sin * segment.length;
        let mut event = None;
        if tracer.angle_at(x_end).is_none() && geometry.contains(x_end) {
            let x_tp = tracer.turning_point(state.x, x_end);
            segment = Segment {
                length: (x_tp - state.x).abs() / sin,
                hits_wall: false,
            };
            x_end = x_tp;
            event = Some(TraceOutcome::TurningPoint { x: x_tp });
        }
        if !(x_min..=x_max).contains(&x_end) {
            let boundary = x_end.clamp(x_min, x_max);
            segment = Segment {
                length: (boundary - state.x).abs() / sin,
                hits_wall: false,
            };
            event = Some(TraceOutcome::DomainExit { x: boundary });
        }
        if state.t + segment.length > duration {
            segment = Segment {
                length: duration - state.t,
                hits_wall: false,
            };
            event = None;
        }

        let s = segment.length;
        let midpoint = state.x + state.axial * sin * s * 0.5;
        let mut next = state;
        next.x = state.x + state.axial * sin * s;
        next.y = state.y + state.transverse * cos * s;
        next.t = state.t + s;
        next.phi = phi;
        next.clock_phase = state.clock_phase + geometry.cutoff_at(midpoint) * cos * s;
        let width = geometry.width_at(next.x);
        next.y = next.y.clamp(0.0, width);

        if segment.hits_wall {
            let wall = if state.transverse < 0.0 {
                next.y = 0.0;
                Wall::Bottom
            } else {
                next.y = width;
                Wall::Top
            };
            next.transverse = -state.transverse;
            reflections.push(states.len());
            walls.push(wall);
        }

        let progress = sin * s;
        states.push(next);
        state = next;

        match event {
            Some(TraceOutcome::TurningPoint { x }) => {
                turning_points.push(x);
                match options.turning_policy {
                    TurningPolicy::Terminate => break TraceOutcome::TurningPoint { x },
                    TurningPolicy::Reverse => {
                        state.axial = -state.axial;
                        if let Some(last) = states.last_mut() {
                            last.axial = state.axial;
                        }
                        phi_hint = Some(phi);
                    }
                }
            }
            Some(exit @ TraceOutcome::DomainExit { .. }) => break exit,
            _ => {
                // stalled against the cutoff without crossing it
                if !segment.hits_wall && progress <= 1e-14 * width && s < duration - state.t {
                    turning_points.push(state.x);
                    break TraceOutcome::TurningPoint { x: state.x };
                }
            }
        }
    };

    let first = states[0];
    let last = *states.last().unwrap_or(&first);
    let effective_velocity = if last.t > first.t {
        (last.x - first.x) / (last.t - first.t)
    } else {
        first.phi.sin() * first.axial
    };

    Ok(ZigzagTrace {
        omega,
        states,
        reflections,
        walls,
        turning_points,
        effective_velocity,
        outcome,
    })
}

impl ZigzagTrace {
    fn reflection_states(&self) -> impl Iterator<Item = &RayState> {
        self.reflections.iter().map(|&i| &self.states[i])
    }

    /// Mean axial advance over one full zigzag (twice the wall-to-wall
    /// advance).
    pub fn mean_zigzag_length(&self) -> Option<f64> {
        let xs: Vec<f64> = self.reflection_states().map(|s| s.x).collect();
        if xs.len() < 2 {
            return None;
        }
        Some(2.0 * (xs[xs.len() - 1] - xs[0]).abs() / (xs.len() - 1) as f64)
    }

    /// Angular frequency of the zigzag, `2π` over the time of two wall
    /// crossings.
    pub fn zigzag_angular_frequency(&self) -> Option<f64> {
        let ts: Vec<f64> = self.reflection_states().map(|s| s.t).collect();
        if ts.len() < 2 {
            return None;
        }
        let crossing = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        Some(PI / crossing)
    }

    /// Mean axial velocity between successive reflections.
    pub fn interval_velocities(&self) -> Vec<f64> {
        self.reflections
            .windows(2)
            .map(|w| {
                let (a, b) = (&self.states[w[0]], &self.states[w[1]]);
                (b.x - a.x) / (b.t - a.t)
            })
            .collect()
    }

    /// `(Δx² + Δy²)/Δt²` for every recorded segment.
    pub fn segment_speeds_squared(&self) -> Vec<f64> {
        self.states
            .windows(2)
            .filter(|w| w[1].t > w[0].t)
            .map(|w| {
                let (dx, dy, dt) = (w[1].x - w[0].x, w[1].y - w[0].y, w[1].t - w[0].t);
                (dx * dx + dy * dy) / (dt * dt)
            })
            .collect()
    }

    /// CSV with columns `t, x, y, phi, v_eff`, where `v_eff` is the running
    /// mean axial velocity since launch.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, units: UnitSystem) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["t", "x", "y", "phi", "v_eff"])?;
        let first = self.states[0];
        for s in &self.states {
            let v_eff = if s.t > first.t {
                (s.x - first.x) / (s.t - first.t)
            } else {
                first.axial * first.phi.sin()
            };
            csv.write_record([
                format_number(units.time_out(s.t)),
                format_number(units.length_out(s.x)),
                format_number(units.length_out(s.y)),
                format_number(s.phi),
                format_number(units.velocity_out(v_eff)),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::potential_to_geometry;
    use crate::grid::UniformGrid;
    use crate::profile::{Interpolation, PotentialFamily, PotentialProfile};
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn geometry(family: PotentialFamily, lo: f64, hi: f64) -> GuideGeometry {
        let grid = UniformGrid::spanning(lo, hi, 4001).unwrap();
        let profile = PotentialProfile::from_family(grid, Interpolation::CubicSpline, &family).unwrap();
        potential_to_geometry(&Particle::electron(), &profile).unwrap()
    }

    fn flat() -> GuideGeometry {
        geometry(PotentialFamily::Constant { value: 0.0 }, 0.0, 2000.0)
    }

    #[test]
    fn local_angle_limits() {
        let g = flat();
        assert!((local_angle(SQRT_2, &g, 10.0).unwrap() - FRAC_PI_4).abs() < 1e-14);
        assert!(local_angle(1.0 + 1e-10, &g, 10.0).unwrap() < 1e-4);
        assert!((local_angle(1e6, &g, 10.0).unwrap() - PI / 2.0).abs() < 1e-5);
        assert!(matches!(local_angle(0.9, &g, 10.0), Err(Error::BelowCutoff { .. })));
    }

    #[test]
    fn constant_guide_recovers_group_velocity_and_zigzag_length() {
        let g = flat();
        let e = Particle::electron();
        for omega in [1.1, SQRT_2, 2.0] {
            let k = ((omega * omega) - 1.0f64).sqrt();
            let vg = k / omega;
            let period_time = zigzag_period(&e, vg).unwrap() / vg;
            let t = trace(omega, &g, RayState::centered(&g, 1.0), 100.0 * period_time).unwrap();
            assert_eq!(t.outcome, TraceOutcome::Completed);
            assert!((t.effective_velocity / vg - 1.0).abs() < 1e-3);
            let length = t.mean_zigzag_length().unwrap();
            assert!((length / zigzag_period(&e, vg).unwrap() - 1.0).abs() < 1e-3);
            let rate = t.zigzag_angular_frequency().unwrap();
            assert!((rate / clock_frequency(&e, vg).unwrap() - 1.0).abs() < 5e-3);
        }
    }

    #[test]
    fn path_speed_is_c_and_walls_alternate() {
        let g = geometry(PotentialFamily::Ramp { slope: 2e-4, offset: 0.0 }, 0.0, 500.0);
        let t = trace(1.5, &g, RayState::centered(&g, 1.0), 300.0).unwrap();
        for v2 in t.segment_speeds_squared() {
            assert!((v2 - 1.0).abs() < 1e-10, "speed² {v2}");
        }
        assert!(t.walls.windows(2).all(|w| w[0] != w[1]));
        for s in &t.states {
            assert!(s.y >= 0.0 && s.y <= g.width_at(s.x));
        }
        // ω constant along the trace; clock phase increases
        assert!(t.states.windows(2).all(|w| w[1].clock_phase > w[0].clock_phase));
    }

    #[test]
    fn narrowing_guide_slows_the_ray() {
        let g = geometry(PotentialFamily::Ramp { slope: 1e-3, offset: 0.0 }, 0.0, 300.0);
        let t = trace(1.5, &g, RayState::centered(&g, 1.0), 200.0).unwrap();
        let v = t.interval_velocities();
        assert!(v.len() > 20);
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bump_above_frequency_turns_the_ray() {
        let g = geometry(
            PotentialFamily::GaussianBump { height: 0.3, center: 0.0, width: 20.0 },
            -150.0,
            150.0,
        );
        let omega = 1.2;
        let t = trace(omega, &g, RayState::centered(&g, -100.0), 1e5).unwrap();
        let TraceOutcome::TurningPoint { x } = t.outcome else {
            panic!("expected a turning point, got {:?}", t.outcome);
        };
        assert!((g.cutoff_at(x) - omega).abs() < 1e-9);
        // expected position from V(x) = 0.2
        let expected = -20.0 * (2.0 * (0.3f64 / 0.2).ln()).sqrt();
        assert!((x - expected).abs() < 1e-6);
    }

    #[test]
    fn reversed_trace_is_mirror_symmetric_about_turning_point() {
        let g = geometry(
            PotentialFamily::GaussianBump { height: 0.3, center: 0.0, width: 20.0 },
            -150.0,
            150.0,
        );
        let options = TraceOptions {
            turning_policy: TurningPolicy::Reverse,
            ..TraceOptions::default()
        };
        let t = trace_with(1.2, &g, RayState::centered(&g, -100.0), 1500.0, options).unwrap();
        assert_eq!(t.turning_points.len(), 1);
        let tp_index = t.states.iter().position(|s| s.axial < 0.0).unwrap();
        let t_tp = t.states[tp_index].t;
        let x_tp = t.states[tp_index].x;
        let x_at = |time: f64| {
            let i = t.states.partition_point(|s| s.t < time).clamp(1, t.states.len() - 1);
            let (a, b) = (&t.states[i - 1], &t.states[i]);
            a.x + (b.x - a.x) * (time - a.t) / (b.t - a.t)
        };
        let zigzag = g.width_at(-60.0) * 2.0;
        for tau in [50.0, 200.0, 500.0] {
            let inbound = x_at(t_tp - tau);
            let outbound = x_at(t_tp + tau);
            assert!(inbound < x_tp && outbound < x_tp);
            assert!((inbound - outbound).abs() < zigzag, "τ = {tau}: {inbound} vs {outbound}");
        }
    }

    #[test]
    fn zigzag_formulas() {
        let e = Particle::electron();
        assert_eq!(zigzag_period(&e, 0.0).unwrap(), 0.0);
        let l = zigzag_period(&e, 1.0 / SQRT_2).unwrap();
        assert!((l - e.compton_wavelength()).abs() < 1e-12);
        assert!(zigzag_period(&e, 1.0).is_err());
        assert_eq!(clock_frequency(&e, 0.0).unwrap(), 1.0);
        assert!((clock_frequency(&e, 3f64.sqrt() / 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(clock_frequency(&e, 1.5).is_err());
        assert!((zigzag_period_in_guide(2.0, 1.0 / SQRT_2).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_launch() {
        let g = flat();
        let mut outside = RayState::centered(&g, 1.0);
        outside.y = 10.0;
        assert!(trace(1.5, &g, outside, 10.0).is_err());
        assert!(trace(0.5, &g, RayState::centered(&g, 1.0), 10.0).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let g = flat();
        let t = trace(1.5, &g, RayState::centered(&g, 1.0), 30.0).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out, UnitSystem::NATURAL).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,x,y,phi,v_eff\n"));
        assert_eq!(text.lines().count(), t.states.len() + 1);
    }
}
