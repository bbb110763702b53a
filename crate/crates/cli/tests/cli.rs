use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn guideq(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guideq"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn geometry_of_free_electron_is_compton_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let run = guideq(&["geometry"], &scenario("free_electron"), tmp.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let mut reader = csv::Reader::from_path(tmp.path().join("geometry.csv")).unwrap();
    assert_eq!(&reader.headers().unwrap()[3], "width");
    let mut rows = 0;
    for record in reader.records() {
        let width: f64 = record.unwrap()[3].parse().unwrap();
        assert!((width / 1.213e-12 - 1.0).abs() < 1e-3, "width {width}");
        rows += 1;
    }
    assert_eq!(rows, 201);
    assert!(tmp.path().join("geometry.svg").exists());
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["units"], "si");
}

#[test]
fn manifest_hashes_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    let run = guideq(&["tunnel"], &scenario("rectangular_barrier"), tmp.path());
    assert!(run.status.success());
    let m = manifest(tmp.path());
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o["path"] == "spectrum.csv"));
    for o in outputs {
        let bytes = std::fs::read(tmp.path().join(o["path"].as_str().unwrap())).unwrap();
        let digest: String = <sha2::Sha256 as sha2::Digest>::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(o["sha256"], digest.as_str());
    }
}

#[test]
fn reruns_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for subcommand in ["tunnel", "evolve"] {
        for dir in [&a, &b] {
            assert!(guideq(&[subcommand], &scenario("rectangular_barrier"), dir.path()).status.success());
        }
        // timestamps differ; the output list with hashes does not
        assert_eq!(manifest(a.path())["outputs"], manifest(b.path())["outputs"]);
        assert_eq!(manifest(a.path())["scenario_sha256"], manifest(b.path())["scenario_sha256"]);
    }
}

#[test]
fn negative_mass_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "version = 1\nname = \"bad\"\n[particle]\nmass = -1.0\n");
    let run = guideq(&["orbits"], &path, &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("particle.mass"));
}

#[test]
fn unknown_keys_warn_or_fail_in_strict_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "version = 1\nname = \"x\"\ncolour = \"red\"\n[orbits]\nn_max = 2\n");
    let lenient = guideq(&["orbits"], &path, &tmp.path().join("a"));
    assert!(lenient.status.success());
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("colour"));
    let strict = guideq(&["orbits", "--strict"], &path, &tmp.path().join("b"));
    assert_eq!(strict.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("colour"));
}

#[test]
fn missing_block_and_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let run = guideq(&["trace"], &scenario("hydrogen"), tmp.path());
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("[trace]"));
    let run = guideq(&["orbits"], &tmp.path().join("absent.toml"), tmp.path());
    assert_eq!(run.status.code(), Some(4));
}

#[test]
fn unstable_time_step_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(
        tmp.path(),
        r#"version = 1
name = "kg"
[potential]
grid = { start = -20.0, end = 20.0, points = 401 }
family = { kind = "constant", value = 0.0 }
[evolve]
solver = "klein_gordon"
packet = { x0 = 0.0, sigma = 3.0, k0 = 1.0 }
dt = 0.5
steps = 10
"#,
    );
    let run = guideq(&["evolve"], &path, &tmp.path().join("out"));
    assert_eq!(run.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&run.stderr).contains("stability"));
    assert!(manifest(&tmp.path().join("out"))["status"]
        .as_str()
        .unwrap()
        .contains("numerical"));
}

#[test]
fn orbits_follow_requested_units() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(guideq(&["orbits"], &scenario("hydrogen"), tmp.path()).status.success());
    let mut reader = csv::Reader::from_path(tmp.path().join("levels.csv")).unwrap();
    assert_eq!(&reader.headers().unwrap()[1], "r_m");
    let first = reader.records().next().unwrap().unwrap();
    assert!((first[1].parse::<f64>().unwrap() / 5.292e-11 - 1.0).abs() < 1e-3);
    assert!((first[3].parse::<f64>().unwrap() / -13.606 - 1.0).abs() < 1e-3);

    let natural = tmp.path().join("natural");
    assert!(guideq(&["orbits", "--units", "natural"], &scenario("hydrogen"), &natural).status.success());
    let mut reader = csv::Reader::from_path(natural.join("levels.csv")).unwrap();
    let first = reader.records().next().unwrap().unwrap();
    // Bohr radius is 1/α in natural units
    assert!((first[1].parse::<f64>().unwrap() * 7.2973525693e-3 - 1.0).abs() < 1e-3);
}

#[test]
fn every_shipped_scenario_runs() {
    let cases = [
        ("free_electron", "dispersion", "dispersion.csv"),
        ("free_electron", "trace", "trace.csv"),
        ("double_barrier", "tunnel", "spectrum.csv"),
        ("gaussian_bump_qpotential", "qpotential", "trajectory.csv"),
        ("gaussian_bump_qpotential", "trace", "trace.svg"),
        ("harmonic_well", "evolve", "states.csv"),
        ("rectangular_barrier", "evolve", "snapshots/psi_0004.csv"),
    ];
    for (name, subcommand, artifact) in cases {
        let tmp = tempfile::tempdir().unwrap();
        let run = guideq(&[subcommand], &scenario(name), tmp.path());
        assert!(
            run.status.success(),
            "{name} {subcommand}: {}",
            String::from_utf8_lossy(&run.stderr)
        );
        assert!(tmp.path().join(artifact).exists(), "{name} {subcommand}: no {artifact}");
        assert!(tmp.path().join("summary.json").exists());
    }
}

#[test]
fn double_barrier_peak_is_resonant() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(guideq(&["tunnel"], &scenario("double_barrier"), tmp.path()).status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["peak"]["T"].as_f64().unwrap() > 0.999);
}

#[test]
fn validate_passes_on_hydrogen_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let run = guideq(&["validate"], &scenario("hydrogen"), tmp.path());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}");
    assert!(stdout.contains("10/10 criteria passed"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 10);
    assert!(tmp.path().join("validation.csv").exists());
}
