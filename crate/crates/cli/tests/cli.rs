use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ctstl"));
    c.env_remove("CTSTL_LOG");
    c
}

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hover_has_single_interval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", s(&problem("hover.json")), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    // header plus N + 1 = 5 samples
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "t,rx,ry,rz,vx,vy,vz,ux,uy,uz");
    assert!(lines[1].starts_with("0.0000000000000000e0,"));
    assert!(lines[5].starts_with("1.0000000000000000e0,"));
    let rob = json(&dir.path().join("robustness.json"));
    assert!(rob["gamma"].as_f64().unwrap() > 0.0);
    assert_eq!(rob["subformulas"].as_array().unwrap().len(), 1);
    assert_eq!(json(&dir.path().join("report.json"))["status"], "converged");
    assert!(dir.path().join("path.svg").exists());
    assert!(dir.path().join("speed.svg").exists());
    // no station, no margin plot
    assert!(!dir.path().join("margin.svg").exists());
}

#[test]
fn bundled_example_outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["solve", s(&problem("quadrotor_charging.json")), "--out", s(d.path())]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["path.svg", "speed.svg", "margin.svg", "trajectory.csv", "robustness.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let speed = std::fs::read_to_string(a.path().join("speed.svg")).unwrap();
    assert!(speed.contains("v_safe") && speed.contains("v_max"));
    assert!(std::fs::read_to_string(a.path().join("path.svg")).unwrap().contains("station"));
}

#[test]
fn malformed_json_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dynamics\": ").unwrap();
    let o = run(&["solve", s(&bad), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema error"));

    let text = std::fs::read_to_string(problem("hover.json")).unwrap();
    std::fs::write(&bad, text.replace("\"nodes\": 2", "\"nodes\": \"two\"")).unwrap();
    assert_eq!(code(&run(&["solve", s(&bad)])), 2);
    std::fs::write(&bad, text.replace("rz >= floor", "altitude >= floor")).unwrap();
    assert_eq!(code(&run(&["solve", s(&bad)])), 2);
}

#[test]
fn iteration_limit_fails_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "solve",
        s(&problem("quadrotor_charging.json")),
        "--out",
        s(dir.path()),
        "--max-iters",
        "2",
    ]);
    assert_eq!(code(&o), 1);
    let rep = json(&dir.path().join("report.json"));
    assert_eq!(rep["status"], "max_iterations");
    assert_eq!(rep["iterations"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn weight_and_shift_flags_reach_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "solve",
        s(&problem("hover.json")),
        "--out",
        s(dir.path()),
        "--wdyn=-1",
    ]);
    assert_eq!(code(&o), 2);
    let o = run(&["solve", s(&problem("hover.json")), "--out", s(dir.path()), "--c", "0"]);
    assert_eq!(code(&o), 2);
    let o = run(&["solve", s(&problem("hover.json")), "--out", s(dir.path()), "--c", "0.5", "--wstl", "3"]);
    assert_eq!(code(&o), 0);
}

fn write_csv(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn monitor_constant_signal() {
    let dir = tempfile::tempdir().unwrap();
    let sig = write_csv(dir.path(), "g.csv", "t,g\n0,3\n0.5,3\n1,3\n");
    let o = run(&["monitor", s(&sig), "--formula", "G[0, 1] g >= k", "--const", "k=1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["verdict"], true);
    assert!(r["gamma"].as_f64().unwrap() > 0.0);
    assert_eq!(r["classical"].as_f64().unwrap(), 2.0);
    assert_eq!(r["traces"][0]["gamma"].as_array().unwrap().len(), 3);
}

#[test]
fn monitor_until_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    let sig = write_csv(
        dir.path(),
        "u.csv",
        "t,s,c\n0,1,-1\n0.5,1,-1\n1,1,1\n1.5,-1,1\n2,-1,1\n",
    );
    let out = dir.path().join("r.json");
    let o = run(&["monitor", s(&sig), "--formula", "(s >= 0) U[0, 2] (c >= 0)", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let r = json(&out);
    assert_eq!(r["verdict"], true);
    assert_eq!(r["classical"].as_f64().unwrap(), 1.0);
    assert_eq!(r["witness_time"].as_f64().unwrap(), 1.0);
}

#[test]
fn monitor_input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let no_t = write_csv(dir.path(), "a.csv", "time,g\n0,1\n");
    assert_eq!(code(&run(&["monitor", s(&no_t), "--formula", "g >= 0"])), 2);
    let back = write_csv(dir.path(), "b.csv", "t,g\n0,1\n1,1\n0.5,1\n");
    let o = run(&["monitor", s(&back), "--formula", "g >= 0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("increasing"));
    let ok = write_csv(dir.path(), "c.csv", "t,g\n0,1\n");
    assert_eq!(code(&run(&["monitor", s(&ok), "--formula", "h >= 0"])), 2);
}

#[test]
fn monitor_sign_disagreement_fails() {
    let dir = tempfile::tempdir().unwrap();
    let sig = write_csv(dir.path(), "g.csv", "t,g\n0,3\n");
    let o = run(&["monitor", s(&sig), "--formula", "g >= 0", "--flip-smooth-sign"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sign disagreement"));
}

#[test]
fn check_grad_passes_on_three_seeds() {
    for seed in ["1", "2", "3"] {
        let o = run(&["check-grad", s(&problem("quadrotor_charging.json")), "--seed", seed]);
        assert_eq!(code(&o), 0, "seed {seed}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn check_grad_zero_control_and_corruption() {
    let p = problem("quadrotor_charging.json");
    assert_eq!(code(&run(&["check-grad", s(&p), "--zero-control"])), 0);
    let o = run(&["check-grad", s(&p), "--corrupt-jacobian"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds"));
}
