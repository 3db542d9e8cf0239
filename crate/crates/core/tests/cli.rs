use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proshrink"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn proshrink")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn one_dim_files(dir: &Path) {
    fs::write(dir.join("A.csv"), "1\n").unwrap();
    fs::write(dir.join("b.txt"), "0.5\n").unwrap();
    fs::write(dir.join("box.txt"), "-1 1\n").unwrap();
}

#[test]
fn solves_one_dimensional_instance() {
    let dir = TempDir::new().unwrap();
    one_dim_files(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "solve",
        "--matrix",
        p(&dir.path().join("A.csv")),
        "--rhs",
        p(&dir.path().join("b.txt")),
        "--box",
        p(&dir.path().join("box.txt")),
        "--tau",
        "1",
        "--history",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let x: f64 = fs::read_to_string(out.join("solution.txt"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((x - 0.5).abs() < 1e-10);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,primal_feas,fixed_point,dual_value\n1,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert!(manifest["parameters"]["resolved_step"].as_f64().unwrap() > 0.0);
    assert_eq!(manifest["parameters"]["termination"], "FEAS_TOL");
}

#[test]
fn every_solver_runs_on_a_generated_instance() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("inst");
    let o = run(&[
        "generate",
        "--m",
        "20",
        "--n",
        "40",
        "--s",
        "3",
        "--seed",
        "5",
        "--out",
        p(&inst),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let x0: Vec<f64> = fs::read_to_string(inst.join("x0.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    for solver in ["proshrink", "accel", "ppbp", "fbs"] {
        let out = dir.path().join(solver);
        let o = run(&[
            "solve",
            "--matrix",
            p(&inst.join("A.csv")),
            "--rhs",
            p(&inst.join("b.txt")),
            "--box",
            p(&inst.join("box.txt")),
            "--solver",
            solver,
            "--lambda",
            "1e-4",
            "--max-iter",
            "1000000",
            "--out",
            p(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{solver}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let x: Vec<f64> = fs::read_to_string(out.join("solution.txt"))
            .unwrap()
            .lines()
            .map(|l| l.parse().unwrap())
            .collect();
        let err = x
            .iter()
            .zip(&x0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let tol = if solver == "fbs" { 1e-2 } else { 1e-8 };
        assert!(err < tol, "{solver}: max error {err}");
    }
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    one_dim_files(dir.path());
    fs::write(dir.path().join("box2.txt"), "-1 1\n-1 1\n").unwrap();
    let o = run(&[
        "solve",
        "--matrix",
        p(&dir.path().join("A.csv")),
        "--rhs",
        p(&dir.path().join("b.txt")),
        "--box",
        p(&dir.path().join("box2.txt")),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));

    fs::write(dir.path().join("bad.csv"), "1,2\n3,oops\n").unwrap();
    let o = run(&[
        "solve",
        "--matrix",
        p(&dir.path().join("bad.csv")),
        "--rhs",
        p(&dir.path().join("b.txt")),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn oversized_step_warns_and_max_iter_exits_two() {
    let dir = TempDir::new().unwrap();
    one_dim_files(dir.path());
    // 0.9 sits close enough to the box edge that an oversized step oscillates.
    fs::write(dir.path().join("b.txt"), "0.9\n").unwrap();
    let o = run(&[
        "solve",
        "--matrix",
        p(&dir.path().join("A.csv")),
        "--rhs",
        p(&dir.path().join("b.txt")),
        "--box",
        p(&dir.path().join("box.txt")),
        "--tau",
        "1",
        "--h",
        "3",
        "--max-iter",
        "5",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "sweep".to_string(),
            "--m".into(),
            "12".into(),
            "--n".into(),
            "24".into(),
            "--s-range".into(),
            "1..3".into(),
            "--trials".into(),
            "3".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    assert_eq!(bin().args(args(&a)).status().unwrap().code(), Some(0));
    let mut seq = args(&b);
    seq.push("--sequential".into());
    assert_eq!(bin().args(seq).status().unwrap().code(), Some(0));
    let ca = fs::read_to_string(&a).unwrap();
    assert_eq!(ca, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = ca.lines().collect();
    assert_eq!(
        lines[0],
        "s,trials,recovered_proshrink,recovered_lbreg,rate_proshrink,rate_lbreg"
    );
    assert_eq!(lines.len(), 4);
    assert!(!ca.contains('\r'));
    assert!(dir.path().join("a.csv.manifest.json").exists());
}

#[test]
fn check_passes_and_catches_a_broken_operator() {
    let o = run(&["check"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.ends_with("ok")).count(), 4);

    let o = run(&["check", "--mutate"]);
    assert_eq!(o.status.code(), Some(3));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("first counterexample in key identity"),
        "{text}"
    );
    assert!(text.contains("tau") && text.contains("q "), "{text}");
}
