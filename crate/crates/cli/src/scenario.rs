//! Scenario files: one TOML document per run, versioned, validated before
//! any computation. Quantities are read in the scenario's unit system and
//! converted to natural units here.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use guideq::grid::UniformGrid;
use guideq::particle::Particle;
use guideq::profile::{Interpolation, PotentialFamily, PotentialProfile};
use guideq::scatter::{Segment, Structure, WaveRegime};
use guideq::solvers::{Boundary, Confinement, Stencil};
use guideq::units::{UnitMode, UnitSystem};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::output::sha256_hex;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// ħ = c = mₑ = 1
    #[default]
    Natural,
    /// metres, seconds, electron-volts
    Si,
}

impl Units {
    pub fn system(self) -> UnitSystem {
        match self {
            Units::Natural => UnitSystem::new(UnitMode::NaturalElectron),
            Units::Si => UnitSystem::new(UnitMode::Si),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Units::Natural => "natural",
            Units::Si => "si",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub particle: ParticleSpec,
    pub potential: Option<PotentialSpec>,
    pub dispersion: Option<DispersionBlock>,
    pub trace: Option<TraceBlock>,
    pub tunnel: Option<TunnelBlock>,
    #[serde(default)]
    pub orbits: OrbitsBlock,
    pub qpotential: Option<QpotentialBlock>,
    pub evolve: Option<EvolveBlock>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ParticleSpec {
    /// Rest mass in electron masses.
    #[serde(default = "one")]
    pub mass: f64,
}

impl Default for ParticleSpec {
    fn default() -> Self {
        Self { mass: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Samples {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PotentialSpec {
    pub grid: Option<GridSpec>,
    /// Evaluated in the scenario's units on `grid`.
    pub family: Option<PotentialFamily>,
    /// Relative to the scenario file; units come from its `# units:` line.
    pub csv: Option<PathBuf>,
    pub samples: Option<Samples>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DispersionBlock {
    pub energy_min: f64,
    pub energy_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub potential: f64,
}

fn default_points() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TurningChoice {
    #[default]
    Terminate,
    Reverse,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TraceBlock {
    /// Kinetic energy `ħω − m₀c²`.
    pub energy: f64,
    pub x0: Option<f64>,
    pub duration: Option<f64>,
    /// Alternative to `duration`: number of local zigzag periods.
    pub periods: Option<f64>,
    #[serde(default)]
    pub turning: TurningChoice,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SegmentSpec {
    pub length: f64,
    pub potential: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TunnelBlock {
    #[serde(default)]
    pub lead_left: f64,
    #[serde(default)]
    pub lead_right: f64,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
    /// Structure CSV relative to the scenario file, instead of `segments`.
    pub csv: Option<PathBuf>,
    pub energy_min: f64,
    pub energy_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub regime: WaveRegime,
    #[serde(default)]
    pub find_peak: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OrbitsBlock {
    #[serde(default = "default_levels")]
    pub n_max: u32,
}

impl Default for OrbitsBlock {
    fn default() -> Self {
        Self { n_max: default_levels() }
    }
}

fn default_levels() -> u32 {
    5
}

#[derive(Debug, Clone, Deserialize)]
pub struct TrajectorySpec {
    pub x0: f64,
    /// Defaults to the classical speed `√(2E_kin/m)` at `x0`.
    pub v0: Option<f64>,
    pub duration: f64,
    pub dt: f64,
    #[serde(default = "yes")]
    pub quantum_force: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct QpotentialBlock {
    pub energy: f64,
    pub trajectory: Option<TrajectorySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Schrodinger,
    KleinGordon,
    Eigen,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PacketSpec {
    pub x0: f64,
    pub sigma: f64,
    pub k0: Option<f64>,
    /// Kinetic energy, used when `k0` is absent.
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Periodic,
    Absorbing,
    Dirichlet,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub width: Option<f64>,
    /// Peak absorption rate (1/time).
    pub strength: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EvolveBlock {
    pub solver: SolverKind,
    pub packet: Option<PacketSpec>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    #[serde(default)]
    pub snapshot_every: usize,
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub stencil: Stencil,
    #[serde(default)]
    pub rest_phase: bool,
    #[serde(default = "default_states")]
    pub n_states: usize,
    #[serde(default)]
    pub confinement: Confinement,
}

fn default_states() -> usize {
    5
}

/// A parsed scenario together with where it came from.
pub struct Loaded {
    pub scenario: Scenario,
    pub dir: PathBuf,
    pub path: PathBuf,
    pub sha256: String,
    pub unknown_keys: Vec<String>,
}

pub fn load(path: &Path, strict: bool) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut unknown_keys = Vec::new();
    let deserializer = toml::Deserializer::new(&text);
    let scenario: Scenario = serde_ignored::deserialize(deserializer, |p| unknown_keys.push(p.to_string()))
        .map_err(|e| CliError::Validation(e.to_string().trim_end().to_string()))?;
    if strict && !unknown_keys.is_empty() {
        return Err(CliError::Validation(format!("unknown keys: {}", unknown_keys.join(", "))));
    }
    scenario.validate()?;
    Ok(Loaded {
        scenario,
        dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
        unknown_keys,
    })
}

fn require(ok: bool, field: &str, message: impl std::fmt::Display) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{field}: {message}")))
    }
}

fn positive(value: f64, field: &str) -> CliResult<()> {
    require(value > 0.0 && value.is_finite(), field, format!("must be positive, got {value}"))
}

fn finite(value: f64, field: &str) -> CliResult<()> {
    require(value.is_finite(), field, format!("must be finite, got {value}"))
}

fn energy_range(min: f64, max: f64, points: usize, block: &str) -> CliResult<()> {
    positive(min, &format!("{block}.energy_min"))?;
    require(
        max > min && max.is_finite(),
        &format!("{block}.energy_max"),
        format!("must exceed energy_min = {min}, got {max}"),
    )?;
    require(points >= 2, &format!("{block}.points"), format!("needs at least 2, got {points}"))
}

impl Scenario {
    pub fn validate(&self) -> CliResult<()> {
        require(
            self.version == SCENARIO_VERSION,
            "version",
            format!("unsupported version {}, expected {SCENARIO_VERSION}", self.version),
        )?;
        require(!self.name.trim().is_empty(), "name", "must not be empty")?;
        positive(self.particle.mass, "particle.mass")?;
        if let Some(p) = &self.potential {
            let sources = [p.family.is_some(), p.csv.is_some(), p.samples.is_some()];
            require(
                sources.iter().filter(|s| **s).count() == 1,
                "potential",
                "give exactly one of family, csv or samples",
            )?;
            if let Some(family) = &p.family {
                family.validate().map_err(|e| CliError::invalid("potential.family", e))?;
                let grid = p
                    .grid
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("potential.grid: required with potential.family".into()))?;
                finite(grid.start, "potential.grid.start")?;
                require(
                    grid.end > grid.start && grid.end.is_finite(),
                    "potential.grid.end",
                    format!("must exceed start = {}, got {}", grid.start, grid.end),
                )?;
                require(grid.points >= 3, "potential.grid.points", format!("needs at least 3, got {}", grid.points))?;
            } else {
                require(p.grid.is_none(), "potential.grid", "only used with potential.family")?;
            }
            if let Some(s) = &p.samples {
                require(
                    s.x.len() == s.v.len(),
                    "potential.samples",
                    format!("x has {} values but v has {}", s.x.len(), s.v.len()),
                )?;
            }
        }
        if let Some(d) = &self.dispersion {
            energy_range(d.energy_min, d.energy_max, d.points, "dispersion")?;
            finite(d.potential, "dispersion.potential")?;
        }
        if let Some(t) = &self.trace {
            positive(t.energy, "trace.energy")?;
            require(
                !(t.duration.is_some() && t.periods.is_some()),
                "trace",
                "give duration or periods, not both",
            )?;
            if let Some(d) = t.duration {
                positive(d, "trace.duration")?;
            }
            if let Some(n) = t.periods {
                positive(n, "trace.periods")?;
            }
        }
        if let Some(t) = &self.tunnel {
            energy_range(t.energy_min, t.energy_max, t.points, "tunnel")?;
            require(
                t.csv.is_none() || t.segments.is_empty(),
                "tunnel",
                "give segments or csv, not both",
            )?;
            for (i, s) in t.segments.iter().enumerate() {
                positive(s.length, &format!("tunnel.segments[{i}].length"))?;
                finite(s.potential, &format!("tunnel.segments[{i}].potential"))?;
            }
        }
        require(
            (1..=1000).contains(&self.orbits.n_max),
            "orbits.n_max",
            format!("must be in 1..=1000, got {}", self.orbits.n_max),
        )?;
        if let Some(q) = &self.qpotential {
            positive(q.energy, "qpotential.energy")?;
            if let Some(t) = &q.trajectory {
                finite(t.x0, "qpotential.trajectory.x0")?;
                positive(t.duration, "qpotential.trajectory.duration")?;
                positive(t.dt, "qpotential.trajectory.dt")?;
            }
        }
        if let Some(e) = &self.evolve {
            match e.solver {
                SolverKind::Eigen => require(e.n_states >= 1, "evolve.n_states", "must be at least 1")?,
                _ => {
                    let packet = e
                        .packet
                        .as_ref()
                        .ok_or_else(|| CliError::Validation("evolve.packet: required for time evolution".into()))?;
                    finite(packet.x0, "evolve.packet.x0")?;
                    positive(packet.sigma, "evolve.packet.sigma")?;
                    require(
                        packet.k0.is_some() != packet.energy.is_some(),
                        "evolve.packet",
                        "give exactly one of k0 or energy",
                    )?;
                    if let Some(k) = packet.k0 {
                        finite(k, "evolve.packet.k0")?;
                    }
                    if let Some(en) = packet.energy {
                        require(en >= 0.0 && en.is_finite(), "evolve.packet.energy", format!("must be non-negative, got {en}"))?;
                    }
                    positive(e.dt.unwrap_or(f64::NAN), "evolve.dt")?;
                    require(e.steps.unwrap_or(0) >= 1, "evolve.steps", "must be at least 1")?;
                }
            }
            if let Some(b) = &e.boundary {
                if b.kind == BoundaryKind::Absorbing {
                    if let Some(w) = b.width {
                        positive(w, "evolve.boundary.width")?;
                    }
                    if let Some(s) = b.strength {
                        positive(s, "evolve.boundary.strength")?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn particle(&self) -> CliResult<Particle> {
        Particle::new(self.particle.mass).map_err(|e| CliError::invalid("particle.mass", e))
    }

    /// Potential profile in natural units.
    pub fn profile(&self, dir: &Path) -> CliResult<PotentialProfile> {
        let spec = self
            .potential
            .as_ref()
            .ok_or_else(|| CliError::Validation("potential: this subcommand needs a [potential] block".into()))?;
        let u = self.units.system();
        let bad = |e| CliError::invalid("potential", e);
        if let Some(family) = &spec.family {
            let g = spec.grid.as_ref().expect("validated");
            let external = UniformGrid::spanning(g.start, g.end, g.points).map_err(bad)?;
            let grid = UniformGrid::new(u.length_in(g.start), u.length_in(external.step()), g.points).map_err(bad)?;
            let values = external.points().map(|x| u.energy_in(family.eval(x))).collect();
            return PotentialProfile::new(grid, values, spec.interpolation).map_err(bad);
        }
        if let Some(s) = &spec.samples {
            let x: Vec<f64> = s.x.iter().map(|x| u.length_in(*x)).collect();
            let v = s.v.iter().map(|v| u.energy_in(*v)).collect();
            return PotentialProfile::from_samples(&x, v, spec.interpolation).map_err(bad);
        }
        let path = dir.join(spec.csv.as_ref().expect("validated"));
        PotentialProfile::load_csv(&path, spec.interpolation).map_err(|e| CliError::invalid("potential.csv", e))
    }

    /// Scattering structure in natural units.
    pub fn structure(&self, dir: &Path) -> CliResult<Structure> {
        let t = self.tunnel.as_ref().expect("caller checked");
        if let Some(csv) = &t.csv {
            return Structure::load_csv(dir.join(csv)).map_err(|e| CliError::invalid("tunnel.csv", e));
        }
        let u = self.units.system();
        let mut segments = vec![Segment::lead(u.energy_in(t.lead_left))];
        segments.extend(
            t.segments
                .iter()
                .map(|s| Segment::section(u.length_in(s.length), u.energy_in(s.potential))),
        );
        segments.push(Segment::lead(u.energy_in(t.lead_right)));
        Structure::new(segments).map_err(|e| CliError::invalid("tunnel.segments", e))
    }
}

impl EvolveBlock {
    /// Boundary in natural units; absorbing layers default to a tenth of
    /// the domain with a rate that damps a wave of speed `speed` by about
    /// e⁻¹⁰ on a single pass.
    pub fn boundary(&self, units: UnitSystem, grid: &UniformGrid, speed: f64) -> Boundary {
        let default_kind = match self.solver {
            SolverKind::KleinGordon => BoundaryKind::Periodic,
            _ => BoundaryKind::Absorbing,
        };
        let spec = self.boundary.clone().unwrap_or(BoundarySpec {
            kind: default_kind,
            width: None,
            strength: None,
        });
        match spec.kind {
            BoundaryKind::Periodic => Boundary::Periodic,
            BoundaryKind::Dirichlet => Boundary::Dirichlet,
            BoundaryKind::Absorbing => {
                let width = spec.width.map_or(0.1 * grid.length(), |w| units.length_in(w));
                // ∫W dx over the layer is strength·width/3; one pass damps
                // the amplitude by exp(−strength·width/(3v))
                let strength = spec
                    .strength
                    .map_or(30.0 * speed.max(1e-3) / width, |s| units.frequency_in(s));
                Boundary::Absorbing { width, strength }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<Scenario> {
        let mut unknown = Vec::new();
        let s: Scenario = serde_ignored::deserialize(toml::Deserializer::new(text), |p| unknown.push(p.to_string()))
            .map_err(|e| CliError::Validation(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    #[test]
    fn negative_mass_names_the_field() {
        let err = parse("version = 1\nname = \"x\"\n[particle]\nmass = -1.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("particle.mass"), "{err}");
    }

    #[test]
    fn family_needs_grid_and_single_source() {
        let text = "version = 1\nname = \"x\"\n[potential]\nfamily = { kind = \"constant\", value = 0.0 }\n";
        assert!(parse(text).unwrap_err().to_string().contains("potential.grid"));
        let text = "version = 1\nname = \"x\"\n[potential]\nsamples = { x = [0.0, 1.0], v = [0.0, 0.0] }\ncsv = \"v.csv\"\n";
        assert!(parse(text).unwrap_err().to_string().contains("exactly one"));
    }

    #[test]
    fn si_family_is_converted_to_natural_units() {
        let text = "version = 1\nname = \"x\"\nunits = \"si\"\n[potential]\ngrid = { start = 0.0, end = 1e-10, points = 11 }\nfamily = { kind = \"constant\", value = 13.6 }\n";
        let s = parse(text).unwrap();
        let profile = s.profile(Path::new(".")).unwrap();
        let u = UnitSystem::new(UnitMode::Si);
        assert!((u.energy_out(profile.values()[3]) - 13.6).abs() < 1e-12);
        assert!((u.length_out(profile.grid().end()) - 1e-10).abs() < 1e-22);
    }

    #[test]
    fn wrong_version_is_rejected() {
        assert!(parse("version = 2\nname = \"x\"\n").unwrap_err().to_string().contains("version"));
    }
}
