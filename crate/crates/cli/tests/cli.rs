use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isac_beam::experiments::RunRecord;

const SCENARIO: &str = r#"
rate_floor = 1.0
beam_width_deg = 5.0
target_receive_level_dbm = -13.0

[array]
num_antennas = 6
carrier_frequency_hz = 0.95e9

[[users]]
angle_deg = 20.0
distance_m = 20.0
noise_power_dbm = -75.0

[[targets]]
angle_deg = -30.0
distance_m = 20.0
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isac-beam"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "rate_floor = \"fast\"\n");
    let out = dir.path().join("out");
    for sub in ["solve", "sweep-antennas", "sweep-distance", "angle-sets"] {
        let o = run(&["-c", s(&cfg), "-o", s(&out), sub]);
        assert_eq!(code(&o), 2, "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{sub} created the output directory");
    }
}

#[test]
fn missing_config_and_bad_flags_exit_2() {
    assert_eq!(code(&run(&["solve"])), 2);
    assert_eq!(code(&run(&["solve", "--workers", "many"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCENARIO);
    assert_eq!(code(&run(&["-c", s(&cfg), "--gap-tol", "-1", "solve"])), 2);
}

#[test]
fn solve_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCENARIO);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["-c", s(&cfg), "-o", s(out), "solve", "--dump-problem"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["solution_beampattern.csv", "solution_sdr_beampattern.csv", "solution_trace.csv", "relaxation.dump"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let record = a.join("solution.json");
    let o = run(&["validate", s(&record)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn tampered_record_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCENARIO);
    let out = dir.path().join("out");
    assert_eq!(code(&run(&["-c", s(&cfg), "-o", s(&out), "solve"])), 0);
    let path = out.join("solution.json");
    let mut record = RunRecord::load(&path).unwrap();
    // Halve the first user's power.
    for z in &mut record.solution.vectors.as_mut().unwrap()[0] {
        z[0] *= 0.5f64.sqrt();
        z[1] *= 0.5f64.sqrt();
    }
    record.save(&path).unwrap();
    let o = run(&["validate", s(&path)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL rate[0]"));
}

#[test]
fn infeasible_scenario_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SCENARIO.replace(
        "[array]",
        "sidelobe_region_enabled = true\nsidelobe_level = 0.0\nsidelobe_tolerance = 1e-12\n\n[array]",
    );
    let cfg = write(dir.path(), "s.toml", &text);
    let o = run(&["-c", s(&cfg), "-o", s(&dir.path().join("out")), "solve"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solver_iteration_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCENARIO);
    let o = run(&["-c", s(&cfg), "-o", s(&dir.path().join("out")), "--max-solver-iterations", "2", "solve"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn experiment_kind_must_match_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let exp = configs().join("antenna_sweep.toml");
    let o = run(&["-c", s(&exp), "-o", s(&dir.path().join("out")), "angle-sets"]);
    assert_eq!(code(&o), 2);
    let o = run(&["-c", s(&exp), "-o", s(&dir.path().join("out")), "solve"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn antenna_sweep_writes_table_and_records() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "base.toml", SCENARIO);
    let exp =
        write(dir.path(), "sweep.toml", "kind = \"antenna_sweep\"\nscenario = \"base.toml\"\nantennas = [4, 6]\n");
    let out = dir.path().join("out");
    let o = run(&["-c", s(&exp), "-o", s(&out), "-w", "2", "sweep-antennas"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("antenna_sweep.csv")).unwrap();
    assert!(table.starts_with("N,power_dBm,iters\n4,"));
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("run_N4.json").exists() && out.join("run_N6.json").exists());
    assert_eq!(code(&run(&["validate", s(&out.join("run_N6.json"))])), 0);
}

#[test]
fn plot_writes_a_script() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCENARIO);
    let out = dir.path().join("out");
    assert_eq!(code(&run(&["-c", s(&cfg), "-o", s(&out), "solve"])), 0);
    let csv = out.join("solution_beampattern.csv");
    let o = run(&["-o", s(&out), "plot", s(&csv)]);
    assert_eq!(code(&o), 0);
    let script = std::fs::read_to_string(out.join("plot.py")).unwrap();
    assert!(script.contains("\"beampattern\""));
    assert_eq!(code(&run(&["-o", s(&out), "plot", s(&dir.path().join("missing.csv"))])), 1);
    assert_eq!(code(&run(&["plot"])), 2);
}
