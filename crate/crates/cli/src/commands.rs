//! One function per subcommand. Each reads the validated scenario, writes
//! its tables and plots into `Outputs`, and returns a JSON summary.

use std::io::Write;

use guideq::dispersion::DispersionPoint;
use guideq::geometry::potential_to_geometry;
use guideq::orbits::{level_table, write_level_table_csv, Coupling};
use guideq::particle::Particle;
use guideq::qpotential::{
    modified_newton_trajectory, quantum_potential_local, sign_arbitration, wkb_density, write_fields_csv, QuantumForce,
};
use guideq::raytrace::{trace_with, zigzag_period_in_guide, RayState, TraceOptions, TurningPolicy};
use guideq::scatter::{transmission_peak, transmission_spectrum};
use guideq::solvers::{
    klein_gordon_evolve, positive_frequency_velocity, schrodinger_evolve, stationary_states, EvolutionConfig, KgField,
    WaveField,
};
use guideq::units::UnitSystem;
use guideq::validation::run_all;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::{write_rows, Outputs};
use crate::scenario::{Loaded, SolverKind, TurningChoice};
use crate::svg::{LinePlot, Series};

pub struct Run<'a> {
    pub loaded: &'a Loaded,
    /// Units of the written files.
    pub out: UnitSystem,
    pub outputs: &'a mut Outputs,
}

impl Run<'_> {
    fn input(&self) -> UnitSystem {
        self.loaded.scenario.units.system()
    }

    fn particle(&self) -> CliResult<Particle> {
        self.loaded.scenario.particle()
    }

    fn missing(block: &str) -> CliError {
        CliError::Validation(format!("{block}: this subcommand needs a [{block}] block"))
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

pub fn dispersion(run: &mut Run) -> CliResult<Value> {
    let block = run.loaded.scenario.dispersion.clone().ok_or_else(|| Run::missing("dispersion"))?;
    let (u, o) = (run.input(), run.out);
    let cutoff = run.particle()?.rest_frequency() + u.energy_in(block.potential);
    let mut rows = Vec::with_capacity(block.points);
    let mut worst: f64 = 0.0;
    for e in linspace(block.energy_min, block.energy_max, block.points) {
        let omega = cutoff + u.energy_in(e);
        let p = DispersionPoint::from_omega(omega, cutoff)?;
        let k = p.k.real().unwrap_or(f64::NAN);
        let (vg, vph) = (p.group_velocity.unwrap_or(f64::NAN), p.phase_velocity.unwrap_or(f64::NAN));
        worst = worst.max((vg * vph - 1.0).abs());
        rows.push(vec![
            o.energy_out(u.energy_in(e)),
            o.frequency_out(omega),
            o.wavenumber_out(k),
            vg,
            vph,
            vg * vph,
        ]);
    }
    let plot = LinePlot::new("guide dispersion", "E", "velocity / c")
        .with(Series::new("v_g", rows.iter().map(|r| r[0]), rows.iter().map(|r| r[3])))
        .with(Series::new("v_ph", rows.iter().map(|r| r[0]), rows.iter().map(|r| r[4])));
    run.outputs.csv("dispersion.csv", |w| {
        write_rows(
            w,
            &header(&["E", "omega", "k", "v_g_over_c", "v_ph_over_c", "v_g_v_ph_over_c2"]),
            rows,
        )
    })?;
    run.outputs.plot("dispersion.svg", &plot)?;
    Ok(json!({ "cutoff": o.frequency_out(cutoff), "max_identity_error": worst }))
}

pub fn geometry(run: &mut Run) -> CliResult<Value> {
    let o = run.out;
    let profile = run.loaded.scenario.profile(&run.loaded.dir)?;
    let g = potential_to_geometry(&run.particle()?, &profile)?;
    let rows: Vec<Vec<f64>> = g
        .grid()
        .points()
        .enumerate()
        .map(|(i, x)| {
            vec![
                o.length_out(x),
                o.energy_out(profile.values()[i]),
                o.frequency_out(g.cutoff()[i]),
                o.length_out(g.width()[i]),
            ]
        })
        .collect();
    let plot = LinePlot::new("guide width", "x", "width")
        .with(Series::new("a(x)", rows.iter().map(|r| r[0]), rows.iter().map(|r| r[3])));
    let widths: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    run.outputs
        .csv("geometry.csv", |w| write_rows(w, &header(&["x", "V", "cutoff", "width"]), rows))?;
    run.outputs.plot("geometry.svg", &plot)?;
    Ok(json!({
        "width_min": widths.iter().cloned().fold(f64::INFINITY, f64::min),
        "width_max": widths.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }))
}

pub fn trace(run: &mut Run) -> CliResult<Value> {
    let block = run.loaded.scenario.trace.clone().ok_or_else(|| Run::missing("trace"))?;
    let (u, o) = (run.input(), run.out);
    let particle = run.particle()?;
    let profile = run.loaded.scenario.profile(&run.loaded.dir)?;
    let g = potential_to_geometry(&particle, &profile)?;
    let omega = particle.rest_frequency() + u.energy_in(block.energy);
    let x0 = block
        .x0
        .map_or(g.grid().start() + 0.01 * g.grid().length(), |x| u.length_in(x));
    let local = DispersionPoint::from_omega(omega, g.cutoff_at(x0))?;
    let duration = match (block.duration, block.periods) {
        (Some(d), _) => u.time_in(d),
        (None, Some(n)) => {
            let vg = local.group_velocity.ok_or_else(|| {
                CliError::Numerical(format!("energy {} is below the local cutoff at x0", block.energy))
            })?;
            n * zigzag_period_in_guide(g.cutoff_at(x0), vg)? / vg
        }
        // light crosses the guide twice
        (None, None) => 2.0 * g.grid().length(),
    };
    let options = TraceOptions {
        turning_policy: match block.turning {
            TurningChoice::Terminate => TurningPolicy::Terminate,
            TurningChoice::Reverse => TurningPolicy::Reverse,
        },
        ..TraceOptions::default()
    };
    let t = trace_with(omega, &g, RayState::centered(&g, x0), duration, options)?;
    let plot = LinePlot::new("zigzag ray", "x", "y").with(Series::new(
        "ray",
        t.states.iter().map(|s| o.length_out(s.x)),
        t.states.iter().map(|s| o.length_out(s.y)),
    ));
    run.outputs.csv("trace.csv", |w| Ok(t.write_csv(w, o)?))?;
    run.outputs.plot("trace.svg", &plot)?;
    Ok(json!({
        "omega": o.frequency_out(omega),
        "duration": o.time_out(duration),
        "reflections": t.reflections.len(),
        "effective_velocity_over_c": t.effective_velocity,
        "group_velocity_over_c": local.group_velocity,
        "mean_zigzag_length": t.mean_zigzag_length().map(|l| o.length_out(l)),
        "zigzag_angular_frequency": t.zigzag_angular_frequency().map(|w| o.frequency_out(w)),
        "turning_points": t.turning_points.iter().map(|x| o.length_out(*x)).collect::<Vec<_>>(),
        "outcome": t.outcome,
    }))
}

pub fn tunnel(run: &mut Run) -> CliResult<Value> {
    let block = run.loaded.scenario.tunnel.clone().ok_or_else(|| Run::missing("tunnel"))?;
    let (u, o) = (run.input(), run.out);
    let particle = run.particle()?;
    let structure = run.loaded.scenario.structure(&run.loaded.dir)?;
    let rest = particle.rest_frequency();
    let (lo, hi) = (rest + u.energy_in(block.energy_min), rest + u.energy_in(block.energy_max));
    let spectrum = transmission_spectrum(&structure, lo, hi, block.points, &particle, block.regime)?;
    let rows: Vec<Vec<f64>> = spectrum
        .iter()
        .map(|p| {
            let (t, r) = p
                .result
                .as_ref()
                .map_or((f64::NAN, f64::NAN), |s| (s.transmittance, s.reflectance));
            vec![o.energy_out(p.omega - rest), t, r]
        })
        .collect();
    let plot = LinePlot::new("transmission spectrum", "E", "probability")
        .with(Series::new("T", rows.iter().map(|r| r[0]), rows.iter().map(|r| r[1])))
        .with(Series::new("R", rows.iter().map(|r| r[0]), rows.iter().map(|r| r[2])));
    let gaps = spectrum.iter().filter(|p| p.result.is_none()).count();
    let flux = rows
        .iter()
        .filter(|r| r[1].is_finite())
        .map(|r| (r[1] + r[2] - 1.0).abs())
        .fold(0.0, f64::max);
    run.outputs.csv("spectrum.csv", |w| write_rows(w, &header(&["E", "T", "R"]), rows))?;
    run.outputs.plot("spectrum.svg", &plot)?;
    let mut summary = json!({
        "regime": block.regime,
        "points": spectrum.len(),
        "gaps": gaps,
        "max_flux_error": flux,
    });
    if block.find_peak {
        let (omega, t) = transmission_peak(&structure, lo, hi, block.points, &particle, block.regime)?;
        summary["peak"] = json!({ "E": o.energy_out(omega - rest), "T": t });
    }
    Ok(summary)
}

pub fn orbits(run: &mut Run) -> CliResult<Value> {
    let block = run.loaded.scenario.orbits.clone();
    let o = run.out;
    let coupling = Coupling::natural_hydrogen(&run.particle()?);
    let rows = level_table(&coupling, block.n_max)?;
    let plot = LinePlot::new("orbit energies", "n", "E [eV]").with(Series::new(
        "E_n",
        rows.iter().map(|r| f64::from(r.n)),
        rows.iter().map(|r| r.energy_ev),
    ));
    run.outputs.csv("levels.csv", |w| Ok(write_level_table_csv(&rows, w, o)?))?;
    run.outputs.plot("levels.svg", &plot)?;
    Ok(json!({
        "levels": rows.iter().map(|r| json!({
            "n": r.n,
            "r": o.length_out(r.r),
            "v_over_c": r.v_over_c,
            "E_eV": r.energy_ev,
            "relativistic_shift": r.relativistic_shift,
        })).collect::<Vec<_>>(),
    }))
}

pub fn qpotential(run: &mut Run) -> CliResult<Value> {
    let block = run.loaded.scenario.qpotential.clone().ok_or_else(|| Run::missing("qpotential"))?;
    let (u, o) = (run.input(), run.out);
    let particle = run.particle()?;
    let profile = run.loaded.scenario.profile(&run.loaded.dir)?;
    let omega = particle.rest_frequency() + u.energy_in(block.energy);
    let density = wkb_density(&particle, omega, &profile)?;
    let potential = quantum_potential_local(&particle, omega, &profile);
    // the oracle check needs a fine grid; report why it is missing otherwise
    let arbitration = match sign_arbitration(&particle, omega, &profile) {
        Ok(a) => json!({ "plus": a.plus, "minus": a.minus, "selected_sign": a.selected_sign() }),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    let x: Vec<f64> = profile.grid().points().map(|x| o.length_out(x)).collect();
    let plot = LinePlot::new("potential and quantum potential", "x", "energy")
        .with(Series::new("V", x.clone(), profile.values().iter().map(|v| o.energy_out(*v))))
        .with(Series::new(
            "U",
            x,
            potential.u.iter().map(|v| v.map_or(f64::NAN, |v| o.energy_out(v))),
        ));
    run.outputs
        .csv("fields.csv", |w| Ok(write_fields_csv(&profile, &density, &potential, w, o)?))?;
    run.outputs.plot("qpotential.svg", &plot)?;
    let mut summary = json!({
        "omega": o.frequency_out(omega),
        "turning_points": density.turning_points.iter().map(|x| o.length_out(*x)).collect::<Vec<_>>(),
        "excluded_points": potential.excluded(),
        "max_abs_u": o.energy_out(potential.max_abs()),
        "sign_arbitration": arbitration,
    });
    if let Some(spec) = block.trajectory {
        let x0 = u.length_in(spec.x0);
        let v0 = match spec.v0 {
            Some(v) => u.velocity_in(v),
            None => {
                let e_kin = omega - particle.rest_frequency() - profile.value(x0);
                if e_kin <= 0.0 {
                    return Err(CliError::Validation(
                        "qpotential.trajectory.x0: classically forbidden, give v0".into(),
                    ));
                }
                (2.0 * e_kin / particle.rest_mass()).sqrt()
            }
        };
        let force = if spec.quantum_force {
            QuantumForce::Local { omega }
        } else {
            QuantumForce::Off
        };
        let path = modified_newton_trajectory(
            &particle,
            &profile,
            force,
            x0,
            v0,
            u.time_in(spec.duration),
            u.time_in(spec.dt),
        )?;
        let plot = LinePlot::new("trajectory", "t", "x").with(Series::new(
            "x(t)",
            path.samples.iter().map(|s| o.time_out(s.t)),
            path.samples.iter().map(|s| o.length_out(s.x)),
        ));
        run.outputs.csv("trajectory.csv", |w| Ok(path.write_csv(w, o)?))?;
        run.outputs.plot("trajectory.svg", &plot)?;
        summary["trajectory"] = json!({
            "samples": path.samples.len(),
            "energy_drift": path.energy_drift(),
            "outcome": path.outcome,
        });
    }
    Ok(summary)
}

fn write_kg_csv<W: Write>(field: &KgField, writer: W, o: UnitSystem) -> CliResult<()> {
    let amp = o.length_out(1.0).sqrt().recip();
    write_rows(
        writer,
        &header(&["x", "re_phi", "im_phi", "abs2"]),
        field.grid.points().zip(&field.phi).map(|(x, z)| {
            vec![o.length_out(x), z.re * amp, z.im * amp, z.norm_sqr() * amp * amp]
        }),
    )
}

pub fn evolve(run: &mut Run) -> CliResult<Value> {
    let block = run.loaded.scenario.evolve.clone().ok_or_else(|| Run::missing("evolve"))?;
    let (u, o) = (run.input(), run.out);
    let particle = run.particle()?;
    let profile = run.loaded.scenario.profile(&run.loaded.dir)?;
    let grid = *profile.grid();
    if block.solver == SolverKind::Eigen {
        let states = stationary_states(&profile, &particle, block.n_states, block.confinement)?;
        let amp = o.length_out(1.0).sqrt().recip();
        let mut names = vec!["x".to_string()];
        names.extend((0..states.len()).map(|n| format!("psi_{n}")));
        let rows = grid.points().enumerate().map(|(i, x)| {
            let mut row = vec![o.length_out(x)];
            row.extend(states.iter().map(|s| s.psi[i] * amp));
            row
        });
        run.outputs.csv("states.csv", |w| write_rows(w, &names, rows))?;
        run.outputs.csv("energies.csv", |w| {
            write_rows(
                w,
                &header(&["n", "E", "residual"]),
                states
                    .iter()
                    .enumerate()
                    .map(|(n, s)| vec![n as f64, o.energy_out(s.energy), s.residual]),
            )
        })?;
        let mut plot = LinePlot::new("stationary states", "x", "psi");
        for (n, s) in states.iter().enumerate() {
            plot = plot.with(Series::new(
                &format!("psi_{n}"),
                grid.points().map(|x| o.length_out(x)),
                s.psi.iter().map(|v| v * amp),
            ));
        }
        run.outputs.plot("states.svg", &plot)?;
        return Ok(json!({
            "energies": states.iter().map(|s| o.energy_out(s.energy)).collect::<Vec<_>>(),
            "max_residual": states.iter().map(|s| s.residual).fold(0.0, f64::max),
        }));
    }
    let packet = block.packet.clone().expect("validated");
    let (x0, sigma) = (u.length_in(packet.x0), u.length_in(packet.sigma));
    let local_cutoff = particle.rest_frequency() + profile.value(x0);
    let k0 = match (packet.k0, packet.energy) {
        (Some(k), _) => u.wavenumber_in(k),
        (None, Some(e)) => {
            let e = u.energy_in(e);
            match block.solver {
                SolverKind::KleinGordon => ((local_cutoff + e).powi(2) - local_cutoff.powi(2)).sqrt(),
                _ => (2.0 * particle.rest_mass() * e).sqrt(),
            }
        }
        (None, None) => unreachable!("validated"),
    };
    let speed = match block.solver {
        SolverKind::KleinGordon => k0 / k0.hypot(local_cutoff),
        _ => k0 / particle.rest_mass(),
    };
    let config = EvolutionConfig::new(u.time_in(block.dt.expect("validated")), block.steps.expect("validated"))
        .with_boundary(block.boundary(u, &grid, speed))
        .with_stencil(block.stencil)
        .with_snapshots(block.snapshot_every)
        .with_rest_phase(block.rest_phase);
    let x_out: Vec<f64> = grid.points().map(|x| o.length_out(x)).collect();
    let amp2 = o.length_out(1.0).recip();
    let mut snapshots = Vec::new();
    let plot = match block.solver {
        SolverKind::Schrodinger => {
            let initial = WaveField::gaussian_packet(grid, x0, sigma, k0)?;
            let run_states = schrodinger_evolve(&initial, &profile, &particle, &config)?;
            for (i, f) in run_states.iter().enumerate() {
                run.outputs
                    .csv(&format!("snapshots/psi_{i:04}.csv"), |w| Ok(f.write_csv(w, o)?))?;
                let (mean, sd) = f.position_moments();
                snapshots.push(json!({
                    "t": o.time_out(f.t),
                    "norm": f.norm(),
                    "mean_x": o.length_out(mean),
                    "sd_x": o.length_out(sd),
                }));
            }
            let last = run_states.last().expect("initial state is always kept");
            LinePlot::new("probability density", "x", "|psi|^2")
                .with(Series::new("initial", x_out.clone(), initial.density().iter().map(|d| d * amp2)))
                .with(Series::new("final", x_out, last.density().iter().map(|d| d * amp2)))
        }
        SolverKind::KleinGordon => {
            let phi: Vec<Complex64> = grid
                .points()
                .map(|x| Complex64::from_polar((-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp(), k0 * x))
                .collect();
            let velocity = positive_frequency_velocity(&grid, &phi, local_cutoff, block.stencil);
            let initial = KgField::new(grid, phi, velocity, 0.0)?;
            let run_states = klein_gordon_evolve(&initial, &profile, &particle, &config)?;
            for (i, f) in run_states.iter().enumerate() {
                run.outputs
                    .csv(&format!("snapshots/phi_{i:04}.csv"), |w| write_kg_csv(f, w, o))?;
                snapshots.push(json!({
                    "t": o.time_out(f.t),
                    "norm": f.norm(),
                    "centroid": o.length_out(f.centroid()),
                }));
            }
            let last = run_states.last().expect("initial state is always kept");
            let abs2 = |f: &KgField| f.phi.iter().map(|z| z.norm_sqr() * amp2).collect::<Vec<_>>();
            LinePlot::new("field intensity", "x", "|phi|^2")
                .with(Series::new("initial", x_out.clone(), abs2(&initial)))
                .with(Series::new("final", x_out, abs2(last)))
        }
        SolverKind::Eigen => unreachable!("handled above"),
    };
    run.outputs.plot("evolve.svg", &plot)?;
    Ok(json!({
        "k0": o.wavenumber_out(k0),
        "dt": o.time_out(config.dt),
        "steps": config.n_steps,
        "boundary": config.boundary,
        "snapshots": snapshots,
    }))
}

pub fn validate(run: &mut Run) -> CliResult<Value> {
    let reports = run_all();
    let mut table = Vec::new();
    let mut csv = ::csv::Writer::from_writer(&mut table);
    csv.write_record(["id", "criterion", "check", "measured", "bound", "passed"])?;
    for r in &reports {
        for c in &r.checks {
            csv.write_record([
                r.id.to_string(),
                r.title.clone(),
                c.label.clone(),
                guideq::units::format_number(c.measured),
                c.bound.clone(),
                c.passed.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    drop(csv);
    run.outputs.write("validation.csv", &table)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for r in &reports {
        writeln!(lock, "{}", r.summary_line())?;
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    writeln!(
        lock,
        "{}/{} criteria passed",
        reports.len() - failed.len(),
        reports.len()
    )?;
    if !failed.is_empty() {
        return Err(CliError::Numerical(format!("acceptance criteria failed: {failed:?}")));
    }
    Ok(json!({
        "criteria": reports.iter().map(|r| json!({
            "id": r.id,
            "title": r.title,
            "passed": r.passed(),
        })).collect::<Vec<_>>(),
    }))
}
