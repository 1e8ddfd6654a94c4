use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavqed"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "cavqed {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL_SWEEP: &str = "\
system.kappa = 0.1
system.gamma = 0.1
system.n_max = 1
run.mode = fast
pulse.duration = 400
sweep.delta_min = 0
sweep.delta_max = 0.1
sweep.delta_points = 3
sweep.omega_min = 0.05
sweep.omega_max = 0.15
sweep.omega_points = 3
";

#[test]
fn reference_transfer_success_probability() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("reference");
    run(&["transfer", "-c", bundled("fig2.cfg").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    let doc = read_json(&out.join("transfer.json"));
    let p0 = doc["p0"].as_f64().unwrap();
    let f = doc["fidelity"].as_f64().unwrap();
    assert!((p0 - 0.852).abs() <= 0.02, "p0 = {p0}");
    assert!(f >= 0.995, "fidelity = {f}");
    assert_eq!(doc["validity"]["verdict"], "pass");
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("time,norm2,pop_11,pop_A,"));
    assert_eq!(
        std::fs::read_to_string(out.join("config.cfg")).unwrap(),
        std::fs::read_to_string(bundled("fig2.cfg")).unwrap()
    );
}

#[test]
fn lossless_override_keeps_norm() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lossless");
    run(&[
        "transfer",
        "-c",
        bundled("fig2.cfg").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--kappa",
        "0",
        "--gamma",
        "0",
    ]);
    let doc = read_json(&out.join("transfer.json"));
    let p0 = doc["p0"].as_f64().unwrap();
    assert!((p0 - 1.0).abs() <= 1e-8, "p0 = {p0}");
    assert_eq!(doc["cavity_loss"].as_f64().unwrap(), 0.0);
}

#[test]
fn calcium_labels_are_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ca");
    run(&[
        "transfer",
        "-c",
        bundled("calcium.cfg").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "pulse.duration=2000",
    ]);
    let doc = read_json(&out.join("transfer.json"));
    assert_eq!(doc["labels"]["sigma"], "D3/2");
    assert_eq!(doc["labels"]["level2"], "P1/2");
}

#[test]
fn missing_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "m.cfg", "system.kappa = 0.1\npulse.shape = stirap_linear\npulse.omega_max = 0.02\n");
    let out = bin()
        .args(["transfer", "-c", cfg.to_str().unwrap(), "-o", tmp.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pulse.omegabar_max"), "{err}");
}

#[test]
fn unknown_key_and_flag_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "u.cfg", "system.kappa = 0.1\nsystem.kapa = 0.2\n");
    let out = bin().args(["validate", "-c", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("u.cfg:2") && err.contains("system.kapa"), "{err}");

    let out = bin()
        .args(["validate", "-c", bundled("fig2.cfg").to_str().unwrap(), "--bogus"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = bin()
        .args(["validate", "-c", bundled("fig2.cfg").to_str().unwrap(), "--set", "pulse.nope=1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn one_by_one_sweep_has_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "s.cfg", SMALL_SWEEP);
    let out = tmp.path().join("s");
    run(&[
        "sweep",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "sweep.delta_points=1",
        "--set",
        "sweep.omega_points=1",
    ]);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "delta,omega_max,fidelity,p0,peak_alpha_pop,r_ratio,status");
    assert!(lines[1].ends_with(",ok"));
    let opt = read_json(&out.join("optimum.json"));
    assert_eq!(opt["fidelity"]["index"], 0);
}

#[test]
fn sweep_bytes_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "s.cfg", SMALL_SWEEP);
    let mut csvs = Vec::new();
    for n in ["1", "8"] {
        let out = tmp.path().join(format!("p{n}"));
        run(&["sweep", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--parallel", n]);
        csvs.push(std::fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(String::from_utf8_lossy(&csvs[0]).lines().count(), 10);
}

#[test]
fn zero_area_loop_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "z.cfg",
        "system.kappa = 0\nsystem.gamma = 0\npulse.shape = loop\npulse.waypoints = 0,0; pi/2,0; 0,0\npulse.peak = 0.05\npulse.duration = 4000\n",
    );
    let out = tmp.path().join("z");
    run(&["gate", "holonomy", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    let doc = read_json(&out.join("gate.json"));
    assert!(doc["phase"].as_f64().unwrap().abs() <= 0.01, "{}", doc["phase"]);
    assert_eq!(doc["solid_angle"].as_f64().unwrap(), 0.0);
}

#[test]
fn rectangle_loop_phase_follows_dark_state_holonomy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    run(&["gate", "holonomy", "-c", bundled("gate_holonomy.cfg").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    let doc = read_json(&out.join("gate.json"));
    let phase = doc["phase"].as_f64().unwrap();
    let expected = doc["dark_state_holonomy"].as_f64().unwrap();
    assert!((doc["solid_angle"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-12);
    assert!((phase - expected).abs() <= 0.05, "phase {phase} vs {expected}");
    let gate = doc["gate"].as_array().unwrap();
    assert_eq!(gate.len(), 4);
    assert_eq!(gate[0][0][0].as_f64().unwrap(), 1.0);
}

#[test]
fn spectrum_examples() {
    let out = run(&["spectrum", "--omega", "1", "--omegabar", "1", "--delta", "0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let analytic: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let s2 = std::f64::consts::SQRT_2;
    for (a, b) in analytic.iter().zip([-s2, 0.0, s2]) {
        assert!((a - b).abs() < 1e-12, "{text}");
    }
    for line in text.lines().skip(1) {
        let diff: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(diff < 1e-12);
    }

    let out = run(&["spectrum", "--omega", "0", "--omegabar", "0", "--delta", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut analytic: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    analytic.sort_by(f64::total_cmp);
    assert_eq!(analytic, vec![0.0, 0.0, 1.0]);
}

#[test]
fn validate_examples() {
    let reference = bundled("fig2.cfg");
    let report = |extra: &[&str]| -> Value {
        let mut args = vec!["validate", "-c", reference.to_str().unwrap()];
        args.extend_from_slice(extra);
        serde_json::from_slice(&run(&args).stdout).unwrap()
    };
    assert_eq!(report(&[])["verdict"], "pass");
    assert_eq!(report(&["--set", "pulse.omega_max=1"])["verdict"], "warn");
    let off = report(&["--set", "pulse.omega_max=0", "--set", "pulse.omegabar_max=0"]);
    assert_eq!(off["ratio_kappa"].as_f64().unwrap(), 0.0);
    assert_eq!(off["ratio_g2_over_kappa"].as_f64().unwrap(), 0.0);
}

#[test]
fn resolved_sidecar_reproduces_output() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("a");
    run(&[
        "transfer",
        "-c",
        bundled("fig2.cfg").to_str().unwrap(),
        "-o",
        first.to_str().unwrap(),
        "--delta",
        "0.03",
        "--set",
        "pulse.duration=3000",
    ]);
    let second = tmp.path().join("b");
    run(&["transfer", "-c", first.join("resolved.cfg").to_str().unwrap(), "-o", second.to_str().unwrap()]);
    for file in ["trajectory.csv", "transfer.json", "resolved.cfg"] {
        assert_eq!(
            std::fs::read(first.join(file)).unwrap(),
            std::fs::read(second.join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn lossless_phase_gate_gives_pi() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    run(&[
        "gate",
        "phase",
        "-c",
        bundled("gate_phase.cfg").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--kappa",
        "0",
        "--gamma",
        "0",
    ]);
    let doc = read_json(&out.join("gate.json"));
    let phase = doc["phase"].as_f64().unwrap();
    assert!((phase.abs() - std::f64::consts::PI).abs() <= 0.01, "phase = {phase}");
}
