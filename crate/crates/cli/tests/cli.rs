use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn jetreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetreg"))
        .args(args)
        .env_remove("JETREG_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &[&str] = &[
    "--resolution",
    "24",
    "--grid",
    "2",
    "--sigma",
    "0.3",
    "--steps",
    "10",
    "--maxiter",
    "5",
];

#[test]
fn register_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec![
        "register",
        "--fixed",
        "synthetic:blob",
        "--moving",
        "synthetic:square",
        "--out",
        p(&out),
    ];
    args.extend_from_slice(SMALL);
    args.push("--trajectory");
    let o = jetreg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["result.json", "warped.pgm", "grid.csv", "trace.csv", "trajectory.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let res = read_json(&out.join("result.json"));
    assert_eq!(res["schema_version"], 1);
    assert_eq!(res["settings"]["grid"], 2);
    assert!(res["final_F"].as_f64().unwrap() <= res["identity_F"].as_f64().unwrap());
    assert_eq!(read_json(&out.join("trajectory.json"))["schema_version"], 1);
    let warped = jetreg::io::load_image(out.join("warped.pgm")).unwrap();
    assert_eq!((warped.width, warped.height), (24, 24));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn identical_images_need_no_deformation() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "register",
        "--fixed",
        "synthetic:bar",
        "--moving",
        "synthetic:bar",
        "--out",
        p(dir.path()),
    ];
    args.extend_from_slice(SMALL);
    let o = jetreg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let res = read_json(&dir.path().join("result.json"));
    assert!(res["final_F"].as_f64().unwrap() < 1e-12);
    assert!(res["final_H"].as_f64().unwrap() < 1e-12);
}

#[test]
fn match_order_above_jet_order_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetreg(&[
        "register",
        "--fixed",
        "synthetic:blob",
        "--moving",
        "synthetic:blob",
        "--out",
        p(dir.path()),
        "--jet-order",
        "0",
        "--match-order",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("match order exceeds jet order"));
    assert!(!dir.path().join("result.json").exists());
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(jetreg(&["register", "--fixed", "x"]).status.code(), Some(1));
    assert_eq!(
        jetreg(&["shoot", "--preset", "twirl", "--out", "unused"]).status.code(),
        Some(1)
    );
    assert_eq!(jetreg(&["convergence", "--quad", "64"]).status.code(), Some(1));
    assert_eq!(jetreg(&["--threads", "0", "gradcheck"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let o = jetreg(&[
        "register",
        "--fixed",
        "missing.pgm",
        "--moving",
        "synthetic:blob",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"grid": 3, "sigma": 0.35, "steps": 10, "maxiter": 2}"#).unwrap();
    let out = dir.path().join("o");
    let o = jetreg(&[
        "register",
        "--fixed",
        "synthetic:blob",
        "--moving",
        "synthetic:blob",
        "--out",
        p(&out),
        "--resolution",
        "24",
        "--config",
        p(&cfg),
        "--grid",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = &read_json(&out.join("result.json"))["settings"];
    assert_eq!(s["grid"], 2);
    assert_eq!(s["sigma"], 0.35);
    assert_eq!(s["steps"], 10);

    std::fs::write(&cfg, r#"{"sigam": 0.35}"#).unwrap();
    let o = jetreg(&[
        "register",
        "--fixed",
        "synthetic:blob",
        "--moving",
        "synthetic:blob",
        "--out",
        p(&out),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shoot_rotation_preserves_area() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetreg(&["shoot", "--preset", "rotation", "--out", p(dir.path()), "--trajectory"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("shoot.json"));
    assert_eq!(rep["schema_version"], 1);
    let lj = rep["presets"][0]["particle_logjac"].as_f64().unwrap();
    assert!(lj.abs() < 1e-6, "{lj}");
    let csv = std::fs::read_to_string(dir.path().join("grid_rotation.csv")).unwrap();
    assert!(csv.lines().count() > 2 * 21 * 101);
    assert!(dir.path().join("trajectory_rotation.json").is_file());
}

#[test]
fn shoot_all_writes_every_figure_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetreg(&[
        "shoot",
        "--preset",
        "all",
        "--out",
        p(dir.path()),
        "--lines",
        "5",
        "--samples",
        "11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("shoot.json"));
    let presets = rep["presets"].as_array().unwrap();
    assert_eq!(presets.len(), 8);
    for pr in presets {
        assert!(dir.path().join(pr["grid_file"].as_str().unwrap()).is_file());
    }
}

#[test]
fn convergence_reports_table_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetreg(&[
        "convergence",
        "--kind",
        "trig",
        "--levels",
        "5",
        "--quad",
        "512",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("level,h,F0,F1,F2"));
    assert!(text.contains("slopes"));
    let rep = read_json(&dir.path().join("convergence.json"));
    assert_eq!(rep["schema_version"], 1);
    assert_eq!(rep["rows"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("convergence.csv").is_file());

    let o = jetreg(&[
        "convergence",
        "--kind",
        "linear",
        "--levels",
        "3",
        "--shift",
        "0.1",
        "-0.2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes_and_is_reproducible() {
    let a = jetreg(&["gradcheck", "--seed", "7"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(stdout(&a).contains("max grad rel err"));
    assert!(!stdout(&a).contains("FAIL"));
    let b = jetreg(&["--threads", "2", "gradcheck", "--seed", "7"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn gradcheck_with_impossible_tolerance_fails() {
    let o = jetreg(&["gradcheck", "--tol", "1e-12"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL"));
    assert!(stderr(&o).contains("max grad rel err"));
}

#[test]
fn register_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let mut args = vec![
            "--threads",
            threads,
            "register",
            "--fixed",
            "synthetic:bar",
            "--moving",
            "synthetic:rotated_bar",
            "--out",
            p(&out),
        ];
        args.extend_from_slice(SMALL);
        let o = jetreg(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        (
            std::fs::read_to_string(out.join("trace.csv")).unwrap(),
            std::fs::read(out.join("warped.pgm")).unwrap(),
        )
    };
    let a = run("a", "1");
    let b = run("b", "3");
    assert_eq!(a, b);
}

#[test]
fn saved_state_restarts_a_registration() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let mut args = vec![
        "register",
        "--fixed",
        "synthetic:blob",
        "--moving",
        "synthetic:square",
        "--out",
        p(&first),
    ];
    args.extend_from_slice(SMALL);
    assert!(jetreg(&args).status.success());
    let a = read_json(&first.join("result.json"));
    assert_eq!(a["initial"]["order"], 2);
    assert!(a["initial"]["sigma"].is_number());

    let second = dir.path().join("second");
    let init = first.join("result.json");
    let mut args = vec![
        "register",
        "--fixed",
        "synthetic:blob",
        "--moving",
        "synthetic:square",
        "--out",
        p(&second),
    ];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--init", p(&init)]);
    let o = jetreg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = read_json(&second.join("result.json"));
    assert!(b["final_energy"].as_f64().unwrap() <= a["final_energy"].as_f64().unwrap());

    // a state for a different grid is refused
    let mut args = vec![
        "register",
        "--fixed",
        "synthetic:blob",
        "--moving",
        "synthetic:square",
        "--out",
        p(&second),
    ];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--init", p(&init), "--grid", "3"]);
    assert_eq!(jetreg(&args).status.code(), Some(1));
}
