use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eigenmeasure::problem::ProblemSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eigenmeasure"))
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/specs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_spec(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn classify_reports_type_and_cardinalities() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_spec(
        &dir,
        "ns.json",
        r#"{"ell": 5, "ambient": {"kind": "cartan", "c": 0, "d": 2}}"#,
    );
    let o = run(&["classify", &f]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).starts_with("nonsplit, #C(1)=24, T=(25,24,0)\n"),
        "{}",
        stdout(&o)
    );

    let f = write_spec(
        &dir,
        "sp.json",
        r#"{"ell": 2, "ambient": {"kind": "cartan", "c": 1, "d": 0}}"#,
    );
    assert!(stdout(&run(&["classify", &f])).starts_with("split"));
}

#[test]
fn spec_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_spec(
        &dir,
        "zero.json",
        r#"{"ell": 3, "ambient": {"kind": "cartan", "c": 0, "d": 0}}"#,
    );
    let o = run(&["classify", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid quadratic ring"));

    let f = write_spec(&dir, "broken.json", "{\"ell\": 3,\n  \"ambient\": [}");
    let o = run(&["measure", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = run(&["verify", "/nonexistent/spec.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resource_errors_exit_with_three() {
    let o = run(&[
        "verify",
        "--budget",
        "1000",
        corpus("gl2_l3_full.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3^"));
}

#[test]
fn measure_emits_cells_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("table.csv");
    let spec = corpus("gl2_l2_full.json");
    let o = run(&[
        "measure",
        "--a-max",
        "2",
        "--b-max",
        "2",
        "--csv",
        csv.to_str().unwrap(),
        spec.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let cells: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(cells.len(), 4);
    assert_eq!(cells[0]["constant"], "1/3");
    assert_eq!(cells[0]["law"], "c * 2^-(4a+b)");
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("a,b,mu\n0,0,1/3\n"));
    assert_eq!(table.lines().count(), 10);

    let again = dir.path().join("again.csv");
    run(&[
        "measure",
        "--a-max",
        "2",
        "--b-max",
        "2",
        "--csv",
        again.to_str().unwrap(),
        spec.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn measure_worked_example_cells() {
    let o = run(&["measure", corpus("gl2_l2_level2_example.json").to_str().unwrap()]);
    let out = stdout(&o);
    let (cells, table) = out.split_once("\n\n").unwrap();
    assert_eq!(cells.lines().count(), 7);
    for row in [
        "0,0,1/3",
        "0,1,0/1",
        "0,2,1/4",
        "1,0,1/12",
        "1,2,0/1",
        "2,0,1/32",
        "2,1,3/128",
    ] {
        assert!(table.lines().any(|l| l == row), "missing {row}");
    }
}

#[test]
fn nonsplit_rows_vanish() {
    let o = run(&["measure", corpus("nonsplit_l3_full.json").to_str().unwrap()]);
    let out = stdout(&o);
    let table = out.split_once("\n\n").unwrap().1;
    for line in table.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] != "0" {
            assert_eq!(f[2], "0/1");
        }
    }
}

#[test]
fn verify_passes_with_jobs() {
    let o = run(&[
        "verify",
        "--jobs",
        "2",
        "--a-max",
        "2",
        "--b-max",
        "2",
        corpus("split_l3_full.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 9);
    assert!(!out.contains("FAIL"));
}

#[test]
fn dump_spec_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let src = corpus("normalizer_ramified_l3_level2.json");
    let dumped = dir.path().join("canonical.json");
    let o = run(&[
        "classify",
        "--dump-spec",
        dumped.to_str().unwrap(),
        src.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let original = ProblemSpec::from_json(&std::fs::read_to_string(&src).unwrap()).unwrap();
    let canonical = ProblemSpec::from_json(&std::fs::read_to_string(&dumped).unwrap()).unwrap();
    assert_eq!(original.subgroup_spec().unwrap(), canonical.subgroup_spec().unwrap());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dumped).unwrap()).unwrap();
    assert_eq!(v["generators"][0], serde_json::json!([1, 6, 1, 8]));
    assert_eq!(v["level"], 2);
}
