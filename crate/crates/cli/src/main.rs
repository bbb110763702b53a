mod commands;
mod error;
mod output;
mod scenario;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::commands::Run;
use crate::error::{CliError, CliResult};
use crate::output::{Outputs, RunManifest};
use crate::scenario::Units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subcommand {
    /// ω(k), group and phase velocity table
    Dispersion,
    /// potential profile to guide width
    Geometry,
    /// zigzag ray through the guide
    Trace,
    /// transmission spectrum of a layered structure
    Tunnel,
    /// quantized circular orbit table
    Orbits,
    /// WKB density, local quantum potential and trajectories
    Qpotential,
    /// Schrödinger, Klein-Gordon or eigenstate solver run
    Evolve,
    /// full cross-module acceptance suite
    Validate,
}

impl Subcommand {
    fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

/// Waveguide analogy of single-particle quantum mechanics.
#[derive(Debug, Parser)]
#[command(name = "guideq", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Units of the written files; defaults to the scenario's units
    #[arg(long, value_enum)]
    units: Option<Units>,
    /// Reject unknown scenario keys instead of warning
    #[arg(long)]
    strict: bool,
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("GUIDEQ_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("GUIDEQ_THREADS: expected a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Numerical(e.to_string()))
}

fn execute(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let loaded = scenario::load(&cli.scenario, cli.strict)?;
    for key in &loaded.unknown_keys {
        eprintln!("warning: ignoring unknown scenario key `{key}`");
    }
    let units = cli.units.unwrap_or(loaded.scenario.units);
    let started = chrono::Utc::now();
    let mut outputs = Outputs::new(&cli.out)?;
    let mut run = Run {
        loaded: &loaded,
        out: units.system(),
        outputs: &mut outputs,
    };
    let result = match cli.subcommand {
        Subcommand::Dispersion => commands::dispersion(&mut run),
        Subcommand::Geometry => commands::geometry(&mut run),
        Subcommand::Trace => commands::trace(&mut run),
        Subcommand::Tunnel => commands::tunnel(&mut run),
        Subcommand::Orbits => commands::orbits(&mut run),
        Subcommand::Qpotential => commands::qpotential(&mut run),
        Subcommand::Evolve => commands::evolve(&mut run),
        Subcommand::Validate => commands::validate(&mut run),
    };
    let status = match &result {
        Ok(summary) => {
            outputs.json("summary.json", summary)?;
            "ok".to_string()
        }
        Err(e) => e.to_string(),
    };
    let manifest = RunManifest {
        tool: "guideq",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.subcommand.name(),
        scenario_name: loaded.scenario.name.clone(),
        scenario_path: loaded.path.display().to_string(),
        scenario_sha256: loaded.sha256.clone(),
        units: units.name().into(),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        status,
        outputs: outputs.entries().to_vec(),
    };
    // the manifest lists the other outputs and is not listed itself
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(cli.out.join("manifest.json"), text + "\n")?;
    result.map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("guideq {}: {e}", cli.subcommand.name());
            ExitCode::from(e.exit_code())
        }
    }
}
