//! End-to-end tests of the binary: exit codes, output formats, and
//! bit-stable CSV across runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sl-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn write_tmp(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Path relative to the workspace root (tests run in the package dir).
fn repo_path(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn mfun_free_problem_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let out = run(&[
        "mfun",
        "--file",
        "free",
        "--lambda",
        "1i",
        "--tol",
        "1e-9",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(csv).unwrap();
    let line = text.lines().nth(1).unwrap();
    let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
    // M+ (i) = e^{i pi/4}
    let expected = (0.5f64).sqrt();
    assert!((cols[2] - expected).abs() < 1e-7, "{}", line);
    assert!((cols[3] - expected).abs() < 1e-7, "{}", line);
}

#[test]
fn mfun_integrable_weight_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let mesh = dir.path().join("mesh.csv");
    let out = run(&[
        "mfun",
        "--file",
        "paper-sec5",
        "--lambda",
        "1i",
        "--tol",
        "1e-8",
        "--out",
        csv.to_str().unwrap(),
        "--dump-mesh",
        mesh.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(csv).unwrap();
    let cols: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    // -1/i + 1/sqrt(-i) = 0.7071.. + 1.7071.. i
    assert!((cols[2] - 0.7071067811865476).abs() < 1e-6);
    assert!((cols[3] - 1.7071067811865476).abs() < 1e-6);
    // mesh dump: header plus rows with 9 columns, c(0) = 1
    let mesh_text = std::fs::read_to_string(mesh).unwrap();
    let first = mesh_text.lines().nth(1).unwrap();
    let mcols: Vec<f64> = first.split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(mcols.len(), 9);
    assert_eq!(mcols[0], 0.0);
    assert!((mcols[1] - 1.0).abs() < 1e-14);
}

#[test]
fn malformed_json_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tmp(dir.path(), "bad.json", "{ not json");
    let out = run(&["mfun", "--file", path.to_str().unwrap(), "--lambda", "1i"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_schema_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tmp(dir.path(), "bad.json", r#"{"unknown_section": 3}"#);
    let out = run(&["scan", "--file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scan_missing_everything_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_tmp(dir.path(), "empty.json", r#"{}"#);
    let out = run(&["scan", "--file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scan_verdicts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out_base = dir.path().join("report");
    let args = [
        "scan",
        "--file",
        "paper-sec5",
        "--out",
        out_base.to_str().unwrap(),
    ];
    let first = run(&args);
    assert!(first.status.success());
    assert!(stdout(&first).contains("similarity-excluded-near-0"));
    let csv1 = std::fs::read(out_base.with_extension("near-zero.csv")).unwrap();
    let json1 = std::fs::read(out_base.with_extension("json")).unwrap();
    let second = run(&args);
    assert!(second.status.success());
    let csv2 = std::fs::read(out_base.with_extension("near-zero.csv")).unwrap();
    let json2 = std::fs::read(out_base.with_extension("json")).unwrap();
    // bit-stable across runs
    assert_eq!(csv1, csv2);
    assert_eq!(json1, json2);
    // CSV columns pinned: eps,theta,r_plus,r_minus
    let text = String::from_utf8(csv1).unwrap();
    assert_eq!(text.lines().next().unwrap(), "eps,theta,r_plus,r_minus");

    let free = run(&["scan", "--file", "free"]);
    assert!(free.status.success());
    assert!(stdout(&free).contains("no-obstruction-found"));
}

#[test]
fn string_shift_density_column() {
    let dir = tempfile::tempdir().unwrap();
    let out_base = dir.path().join("shifted");
    let out = run(&[
        "string-shift",
        "--file",
        "paper-sec5",
        "--c",
        "1",
        "--grid",
        "0:10:11",
        "--out",
        out_base.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_base.with_extension("csv")).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let expected = (3.0 * cols[0] + 1.0).powf(-4.0 / 3.0);
        assert!(
            (cols[2] - expected).abs() < 1e-9,
            "density mismatch: {}",
            line
        );
    }
}

#[test]
fn string_shift_zero_is_identity_and_negative_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out_base = dir.path().join("id");
    let out = run(&[
        "string-shift",
        "--file",
        "paper-sec5",
        "--c",
        "0",
        "--grid",
        "0:4:5",
        "--out",
        out_base.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_base.with_extension("csv")).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[1] - cols[0]).abs() < 1e-12); // M(x) = x
    }
    let bad = run(&["string-shift", "--file", "paper-sec5", "--c", "-1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn gl_zero_difference_gives_zero_potential() {
    let dir = tempfile::tempdir().unwrap();
    // target measure equal to the free reference: kernel vanishes
    let file = write_tmp(
        dir.path(),
        "zero.json",
        r#"{
            "measures": {
                "tau_plus": {"atoms": [], "density": {"expr": "1/(pi*sqrt(s))", "interval": [0.0, null], "tail_exponent": -0.5}}
            },
            "run": {"x_max": 3.0, "n_points": 4}
        }"#,
    );
    let csv = dir.path().join("q.csv");
    let out = run(&[
        "gl",
        "--file",
        file.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,q,error_estimate");
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[1].abs() < 1e-10, "{}", line);
    }
}

#[test]
fn gl_singular_kernel_flags_rows_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // f = -2 makes the Fredholm operator singular at x = 1/2
    let file = write_tmp(
        dir.path(),
        "singular.json",
        r#"{
            "kernels": {"k": {"rank": 1, "a_exprs": ["-2"], "b_exprs": ["1"]}},
            "run": {"kernel": "k", "x_max": 1.0, "n_points": 5}
        }"#,
    );
    let csv = dir.path().join("q.csv");
    let out = run(&[
        "gl",
        "--file",
        file.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(
        text.contains("nan"),
        "flagged rows marked in CSV:\n{}",
        text
    );
}

#[test]
fn gl_recovers_potential_spot_check() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("q.csv");
    let out = run(&[
        "gl",
        "--file",
        "paper-sec6.2",
        "--x-max",
        "2",
        "--n-points",
        "5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(csv).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let v: f64 = cols[0] + 1.0;
        let expected = 6.0 * (v.powi(4) - 4.0 * v) / (v.powi(3) + 2.0).powi(2);
        assert!((cols[1] - expected).abs() < 1e-6, "{}", line);
    }
}

#[test]
fn eigtest_verdicts() {
    let out = run(&["eigtest", "--file", "paper-sec6.1", "--lambda0", "0"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("simple_eigenvalue"));

    let dir = tempfile::tempdir().unwrap();
    let atom_file = write_tmp(
        dir.path(),
        "atom.json",
        r#"{
            "measures": {
                "tau_plus": {"atoms": [{"s": 1.0, "w": 1.0}]},
                "tau_minus": {"atoms": [{"s": 1.0, "w": 1.0}]}
            }
        }"#,
    );
    let out = run(&[
        "eigtest",
        "--file",
        atom_file.to_str().unwrap(),
        "--lambda0",
        "1",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("atom_obstruction"));

    let disjoint = write_tmp(
        dir.path(),
        "disjoint.json",
        r#"{
            "measures": {
                "tau_plus": {"atoms": [], "density": {"expr": "1", "interval": [1.0, 2.0]}},
                "tau_minus": {"atoms": [], "density": {"expr": "1", "interval": [3.0, 4.0]}}
            }
        }"#,
    );
    let out = run(&[
        "eigtest",
        "--file",
        disjoint.to_str().unwrap(),
        "--lambda0",
        "0",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("not_eigenvalue"));
}

#[test]
fn invert_recovers_square_root_growth() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tau.csv");
    let out = run(&[
        "invert",
        "--file",
        "paper-sec5",
        "--interval",
        "0.1:10",
        "--eps",
        "0.08,0.04,0.02",
        "--n",
        "40",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(csv).unwrap();
    let last = text.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    let expected = 2.0 / std::f64::consts::PI * (cols[0].sqrt() - 0.1f64.sqrt());
    assert!((cols[1] - expected).abs() < 1e-2, "{}", last);
}

#[test]
fn roots_box_flag_and_empty_result() {
    let out = run(&["roots", "--file", "paper-sec5", "--box", "0.05:10:0.05:10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("no roots"));
}

#[test]
fn roots_toy_pair_from_file() {
    let out = run(&["roots", "--file", &repo_path("problems/toy-roots.json")]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("1 root(s)"), "{}", text);
    assert!(text.contains("9.99999999"), "{}", text);
}

#[test]
fn shipped_problem_files_load() {
    for name in [
        "problems/free.json",
        "problems/paper-sec5.json",
        "problems/paper-sec6.1.json",
        "problems/paper-sec6.2.json",
    ] {
        let path = repo_path(name);
        let out = run(&["mfun", "--file", &path, "--lambda", "2i", "--tol", "1e-6"]);
        assert!(out.status.success(), "{} failed", name);
    }
}
