use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gtrs_cli::report::RunReport;

fn gtrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtrs")).args(args).output().expect("binary runs")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/example1")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(args: &[&str], out: &Path) -> (i32, RunReport) {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", s(out)]);
    let o = gtrs(&full);
    let text = std::fs::read_to_string(out).unwrap_or_else(|_| panic!("{}", String::from_utf8_lossy(&o.stderr)));
    (o.status.code().unwrap(), serde_json::from_str(&text).unwrap())
}

#[test]
fn golden_fixture_solves_and_oracle_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let (code, r) = report(&["solve", s(&fixture())], &dir.path().join("r.json"));
    assert_eq!(code, 0);
    assert_eq!(r.case, "hard_case_2_lower");
    assert!((r.lambda_star - 0.5).abs() < 1e-10);
    let (code, o) = report(&["oracle", s(&fixture())], &dir.path().join("o.json"));
    assert_eq!(code, 0);
    assert_eq!(o.case, "hard_case_2_lower");
    assert!((o.lambda_star - 0.5).abs() < 1e-12);
}

#[test]
fn json_report_round_trips() {
    let o = gtrs(&["solve", s(&fixture()), "--json", "--trace"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let r: RunReport = serde_json::from_str(&text).unwrap();
    assert!(r.trace.as_ref().is_some_and(|t| !t.is_empty()));
    assert_eq!(r.to_json(), text);
    for key in [
        "lambda_star",
        "q_star",
        "case",
        "kkt_stationarity",
        "kkt_feasibility",
        "kkt_complementarity",
        "time_total_s",
        "matvecs",
    ] {
        assert!(text.contains(&format!("\"{key}\"")), "{key}");
    }
}

#[test]
fn empty_matrix_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["A.mtx", "B.mtx", "a.mtx", "b.mtx", "manifest.json"] {
        std::fs::copy(fixture().join(name), dir.path().join(name)).unwrap();
    }
    std::fs::write(dir.path().join("B.mtx"), "").unwrap();
    let o = gtrs(&["solve", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("B.mtx") && err.contains("empty file"), "{err}");
}

#[test]
fn dimension_mismatch_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["A.mtx", "B.mtx", "a.mtx", "b.mtx", "manifest.json"] {
        std::fs::copy(fixture().join(name), dir.path().join(name)).unwrap();
    }
    std::fs::write(dir.path().join("b.mtx"), "%%MatrixMarket matrix array real general\n3 1\n1\n2\n3\n").unwrap();
    let o = gtrs(&["solve", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("b.mtx"));
}

#[test]
fn tolerance_failure_exits_with_two() {
    let o = gtrs(&["solve", s(&fixture()), "--tol-kkt", "1e-300"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manifest_overrides_flags_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let (code, r) = report(
        &["solve", s(&fixture()), "--beta", "5", "--lambda-hat", "0.75"],
        &dir.path().join("r.json"),
    );
    assert_eq!(code, 0);
    assert_eq!(r.case, "hard_case_2_lower");
    let o = gtrs(&["solve", s(&fixture()), "--beta", "5"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: beta"));
}

#[test]
fn explicit_file_flags_without_manifest() {
    let f = fixture();
    let o = gtrs(&[
        "solve",
        "--a-matrix",
        s(&f.join("A.mtx")),
        "--b-matrix",
        s(&f.join("B.mtx")),
        "--a-vector",
        s(&f.join("a.mtx")),
        "--b-vector",
        s(&f.join("b.mtx")),
        "--beta",
        "0",
        "--lambda-hat",
        "0.75",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r: RunReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.case, "hard_case_2_lower");
    let missing = gtrs(&["solve", "--a-matrix", s(&f.join("A.mtx"))]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn generated_hard_case_2_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("hc2");
    let o = gtrs(&["generate", "--case", "hard2", "--class", "1", "--n", "100", "--seed", "7", "--out-dir", s(&bundle)]);
    assert!(o.status.success());
    let (code, r) = report(&["solve", s(&bundle)], &dir.path().join("r.json"));
    assert_eq!(code, 0);
    assert!(r.case.starts_with("hard_case_2"), "{}", r.case);
    assert_eq!(r.expected_case.as_deref(), Some("hard2"));
}

#[test]
fn generation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = dir.path().join(name);
        let o = gtrs(&["generate", "--n", "40", "--class", "2", "--cond", "100", "--seed", "3", "--out-dir", s(&d)]);
        assert!(o.status.success());
        ["A.mtx", "B.mtx", "a.mtx", "b.mtx", "manifest.json"]
            .map(|f| std::fs::read(d.join(f)).unwrap())
    };
    assert_eq!(run("one"), run("two"));
}

#[test]
fn zero_density_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = gtrs(&["generate", "--n", "10", "--density", "0", "--out-dir", s(&dir.path().join("z"))]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("raised"));
}

#[test]
fn easy_instance_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("easy");
    assert!(gtrs(&["generate", "--n", "50", "--case", "easy", "--seed", "11", "--out-dir", s(&bundle)]).status.success());
    let (_, r) = report(&["solve", s(&bundle)], &dir.path().join("r.json"));
    let (_, o) = report(&["oracle", s(&bundle)], &dir.path().join("o.json"));
    assert!(((r.q_star - o.q_star) / o.q_star.abs()).abs() <= 1e-8);
    assert_eq!(r.case, o.case);
}

#[test]
fn interior_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let eye = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n2 2 1\n";
    let zero = "%%MatrixMarket matrix array real general\n2 1\n0\n0\n";
    for (name, body) in [("A.mtx", eye), ("B.mtx", eye), ("a.mtx", zero), ("b.mtx", zero)] {
        std::fs::write(d.join(name), body).unwrap();
    }
    std::fs::write(
        d.join("manifest.json"),
        r#"{"a_matrix":"A.mtx","b_matrix":"B.mtx","a_vector":"a.mtx","b_vector":"b.mtx","beta":-1,"lambda_hat":0}"#,
    )
    .unwrap();
    let (code, r) = report(&["solve", s(d)], &d.join("r.json"));
    assert_eq!((code, r.case.as_str()), (0, "interior"));
    let (code, o) = report(&["oracle", s(d)], &d.join("o.json"));
    assert_eq!((code, o.case.as_str()), (0, "interior"));
    assert_eq!(o.lambda_lower.unwrap().0, -1.0);
    assert_eq!(o.lambda_upper.unwrap().0, f64::INFINITY);
    assert!(std::fs::read_to_string(d.join("o.json")).unwrap().contains("\"lambda_upper\": \"inf\""));
}

#[test]
fn oracle_refuses_large_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("big");
    assert!(gtrs(&["generate", "--n", "600", "--seed", "1", "--out-dir", s(&bundle)]).status.success());
    let o = gtrs(&["oracle", s(&bundle)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("500"));
}

#[test]
fn x_out_writes_the_solution() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.mtx");
    assert!(gtrs(&["solve", s(&fixture()), "--x-out", s(&x), "--seedless"]).status.success());
    let v = gtrs_cli::mm::read_vector(&x).unwrap();
    assert!((v[0] - (-25.0 + 457f64.sqrt())).abs() < 1e-8 && (v[1] - 8.0).abs() < 1e-8);
}

#[test]
fn bench_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let o = gtrs(&["bench", "--sizes", "100", "--conds", "10", "--reps", "3", "--out", s(&out)]);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 7);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    for c in cells {
        assert!(c["max_abs_accuracy"].as_f64().unwrap() <= 1e-8);
        assert_eq!(c["failures"].as_u64(), Some(0));
    }
    let empty = gtrs(&["bench", "--sizes", ""]);
    assert_eq!(empty.status.code(), Some(0));
}
