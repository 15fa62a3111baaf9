use std::path::Path;
use std::process::{Command, Output};

use pfsl::io::{parse_netlist, serialize_netlist};

fn pfsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfsl")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn figure(text: &str, label: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(label)).unwrap_or_else(|| panic!("no '{label}' in\n{text}"));
    line.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap()
}

fn emit_prototype(dir: &Path) -> String {
    let path = dir.join("proto.cir");
    let o = pfsl(&["design", "--emit", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn design_prints_closed_form_figures() {
    let o = pfsl(&["design"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!((figure(&text, "P_th") - -4.88).abs() < 0.05, "{text}");
    assert!((figure(&text, "IL") - 0.55).abs() < 0.02, "{text}");
    assert!((figure(&text, "P_max") - 13.9).abs() < 0.05, "{text}");
}

#[test]
fn design_json_is_machine_readable() {
    let o = pfsl(&["--json", "design", "--ztx", "40"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["network"]["transformer"]["z_tx"], 40.0);
    assert!(v["metrics"]["p_th"].as_f64().unwrap() > 0.0);
}

#[test]
fn emitted_netlist_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = emit_prototype(dir.path());
    let text = std::fs::read_to_string(&path).unwrap();
    let net = parse_netlist(&text).unwrap();
    assert_eq!(net.varactors().count(), 1);
    assert_eq!(serialize_netlist(&net), text);
}

#[test]
fn sweep_without_pump_source_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = emit_prototype(dir.path());
    let text: String = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('A'))
        .map(|l| format!("{l}\n"))
        .collect();
    let bare = dir.path().join("bare.cir");
    std::fs::write(&bare, text).unwrap();
    let o = pfsl(&["sweep", bare.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pAG"));
}

#[test]
fn sweep_small_signal_row_matches_linear_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let path = emit_prototype(dir.path());
    let trace = dir.path().join("trace.csv");
    let sp = dir.path().join("sp.csv");
    let o = pfsl(&["sweep", &path, "--p-start", "-30", "--p-stop", "28", "--step", "2", "--out", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = pfsl(&["analyze", &path, "--f-start", "2.0g", "--f-stop", "2.2g", "--points", "3", "--out", sp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&trace);
    assert_eq!(header[..2], ["p_in_dbm", "s21_db"]);
    assert_eq!(rows[0][0], -30.0);
    let (header, lin) = csv_rows(&sp);
    assert_eq!(header[3], "s21_db");
    assert!((lin[1][0] - 2.1e9).abs() < 1.0);
    assert!((rows[0][1] - lin[1][3]).abs() < 0.01, "{} vs {}", rows[0][1], lin[1][3]);
}

#[test]
fn sweep_reports_threshold_and_suppression() {
    let dir = tempfile::tempdir().unwrap();
    let path = emit_prototype(dir.path());
    let is = dir.path().join("is.csv");
    let o = pfsl(&["sweep", &path, "--is-out", is.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!((figure(&text, "P_th") - -6.19).abs() < 0.05, "{text}");
    assert!((figure(&text, "IL_ss") - 0.591).abs() < 0.005, "{text}");
    let (header, rows) = csv_rows(&is);
    assert_eq!(header, ["p_in_dbm", "is_db"]);
    assert!(!rows.is_empty());
}

fn contour(x: &str, y: &str, out: &Path) -> Vec<Vec<f64>> {
    let o = pfsl(&["contour", "--metric", "pth", "--x", x, "--y", y, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(out);
    assert_eq!(header, ["c_v_f", "z_tx_ohm", "p_th_dbm"]);
    rows
}

fn nearest(rows: &[Vec<f64>], c_v: f64, z_tx: f64) -> &Vec<f64> {
    let d = |r: &Vec<f64>| ((r[0] - c_v) / 5e-12).powi(2) + ((r[1] - z_tx) / 100.0).powi(2);
    rows.iter().min_by(|a, b| d(a).total_cmp(&d(b))).unwrap()
}

#[test]
fn contour_cells_agree_with_single_point_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let rows = contour("cv:0.05p:5p:60", "ztx:5:100:60", &dir.path().join("grid.csv"));
    assert_eq!(rows.len(), 3600);
    let cell = nearest(&rows, 2e-12, 31.0);
    let (x, y) = (format!("cv:{:e}:{:e}:1", cell[0], cell[0]), format!("ztx:{:e}:{:e}:1", cell[1], cell[1]));
    let single = contour(&x, &y, &dir.path().join("one.csv"));
    assert!((single[0][2] - cell[2]).abs() < 1e-9, "{cell:?} vs {single:?}");
    let exact = contour("cv:2p:2p:1", "ztx:31:31:1", &dir.path().join("anchor.csv"));
    assert!((exact[0][2] - -4.88).abs() < 0.1, "{exact:?}");
}

// P_th grows like (c_v z_tx^2)^2 here, and the four cells around (2p, 31)
// on this grid sit 0.13 to 0.21 dB from the value at the point itself.
#[test]
#[ignore = "grid spacing is too coarse for a 0.1 dB match at the nearest cell"]
fn contour_nearest_cell_matches_threshold_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let rows = contour("cv:0.05p:5p:60", "ztx:5:100:60", &dir.path().join("grid.csv"));
    assert_eq!(rows.len(), 3600);
    let cell = nearest(&rows, 2e-12, 31.0);
    assert!((cell[2] - -4.88).abs() < 0.1, "{cell:?}");
}

#[test]
fn bad_axis_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = pfsl(&["contour", "--metric", "pth", "--x", "cv:1p:2p", "--y", "ztx:5:100:3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn config_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"sweep\": {\"step\": 1}}").unwrap();
    assert_eq!(pfsl(&["--config", bad.to_str().unwrap(), "design"]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(pfsl(&["--config", missing.to_str().unwrap(), "design"]).status.code(), Some(3));
    assert_eq!(pfsl(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn malformed_netlist_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cir");
    std::fs::write(&path, "R1 1 0 50\nQ2 1 0 1\n").unwrap();
    let o = pfsl(&["analyze", path.to_str().unwrap(), "--f-start", "1g", "--f-stop", "2g"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn cascade_compares_against_single_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = emit_prototype(dir.path());
    let o = pfsl(&["cascade", &path, "--stages", "2", "--p-start", "-10", "--p-stop", "10", "--step", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(figure(&text, "m=2  IL_ss") > figure(&text, "m=1  IL_ss"));
}

#[test]
fn oracle_agrees_on_emitted_prototype() {
    let dir = tempfile::tempdir().unwrap();
    let path = emit_prototype(dir.path());
    let o = pfsl(&["--json", "oracle", &path, "--p-in", "5", "--periods", "2000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: pfsl::transient::OracleReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r.max_relative_error() < 0.01, "{}", r.max_relative_error());
}
