use std::path::Path;
use std::process::{Command, Output};

fn dfalab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfalab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn mesh_info_reads_fixture() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/unit_square.dfamesh");
    let o = dfalab(&["mesh-info", fixture.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("cells 1"));
    assert!(out.contains("faces 4 (0 interior, 4 boundary)"));
}

#[test]
fn solve_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    let o = dfalab(&["solve", "--scheme", "tpfa", "--problem", "sine", "--nx", "4", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cell_or_edge_id,x,y,value");
    assert_eq!(lines.len(), 17);
    assert!(stdout(&o).starts_with("summary scheme=tpfa"));
}

#[test]
fn cr_solve_reports_edges() {
    let o = dfalab(&["solve", "--scheme", "cr", "--problem", "poly", "--nx", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // 2×2 grid split into 8 triangles has 16 edges.
    let rows = stdout(&o).lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count();
    assert_eq!(rows, 16);
}

#[test]
fn tpfa_on_right_triangles_is_an_error() {
    let o = dfalab(&["solve", "--scheme", "tpfa", "--problem", "sine", "--nx", "4", "--family", "tri"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not TPFA-admissible"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"scheme": "tpfa", "problem": "sine", "levels": "0..5"}"#).unwrap();
    let o = dfalab(&["--config", config.to_str().unwrap(), "converge", "--levels", "1..2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(rows, ["1", "2"]);
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"scheme": "tpfa", "level": "1..2"}"#).unwrap();
    let o = dfalab(&["--config", config.to_str().unwrap(), "converge", "--problem", "sine"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn converge_json_matches_csv_levels() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = dfalab(&["converge", "--scheme", "cr", "--problem", "sine", "--levels", "1..3", "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["levels"].as_array().unwrap().len(), 3);
    assert_eq!(report["complete"], true);
}

#[test]
fn failing_gate_exits_one() {
    // Coarse levels have not reached the asymptotic ratio yet.
    let o = dfalab(&["diagnose", "--check", "sobolev", "--levels", "1..3", "--seeds", "8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FAIL sobolev"));
}

#[test]
fn nonlinear_gates_pass() {
    let o = dfalab(&["nonlinear", "--scheme", "cr", "--problem", "sin-cos", "--nx", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("PASS fixed-point certificate") && err.contains("PASS energy bound"));
}

#[test]
fn unknown_problem_is_an_error() {
    let o = dfalab(&["solve", "--scheme", "tpfa", "--problem", "nope", "--nx", "2"]);
    assert_eq!(o.status.code(), Some(2));
}
