use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lamol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamol")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

const FIXED_ETA: &str = r#"{
  "name": "fixed",
  "dataset": { "kind": "jump_shift", "setting": "medium", "t": 300, "seed": 4 },
  "runs": [
    { "name": "fs", "problem": { "kind": "ma_pred", "cost": "squared" }, "learner": "fixed_share",
      "eta": { "mode": "fixed", "value": 0.2 }, "tau": 30,
      "baseline": { "kind": "ogd", "features": ["x1", "x2", "x3", "x4", "x5"] } },
    { "name": "adaptive", "problem": { "kind": "ma_pred", "cost": "squared" }, "learner": "fixed_share",
      "eta": { "mode": "adaptive" }, "tau": 30,
      "baseline": { "kind": "ogd", "features": ["x1", "x2", "x3", "x4", "x5"] } }
  ],
  "evaluation": { "widths": [30] }
}"#;

fn s(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn switch_config_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = lamol(&["run", configs().join("switch.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", s(&o.stderr));
    let traces: Vec<_> = std::fs::read_dir(out.join("traces"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(traces.len(), 2);
    assert_eq!(std::fs::read_dir(out.join("figures")).unwrap().count(), 1);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("jump_shift_large.json");
    for (sub, workers) in [("a", "1"), ("b", "4")] {
        let o = lamol(&["run", cfg.to_str().unwrap(), "--out", dir.path().join(sub).to_str().unwrap(), "--workers", workers]);
        assert!(o.status.success(), "{}", s(&o.stderr));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    for f in manifest["files"].as_array().unwrap() {
        let f = f.as_str().unwrap();
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gefcom_series_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = lamol(&["run", configs().join("gefcom_synthetic.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", s(&o.stderr));
    let csv = std::fs::read_to_string(out.join("series/local_ma_w336.csv")).unwrap();
    let rows = csv.lines().skip(1).filter(|l| l.ends_with(",ma_pred_local")).count();
    assert_eq!(rows, 8760 - 335);
    let traces = std::fs::read_dir(out.join("traces")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")
    });
    assert_eq!(traces.count(), 7);
}

#[test]
fn too_wide_window_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"name": "w", "dataset": {"kind": "switch", "t": 20},
            "runs": [{"name": "h", "problem": {"kind": "ma"}, "learner": "hedge", "eta": {"mode": "fixed", "value": 0.1}}],
            "evaluation": {"widths": [50]}}"#,
    );
    let o = lamol(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(s(&o.stderr).trim()).unwrap();
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("window width 50"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{ not json");
    assert_eq!(lamol(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_conforming_tampered_and_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.json", FIXED_ETA);
    let out = dir.path().join("o");
    let o = lamol(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", s(&o.stderr));

    let trace = out.join("traces/fs.csv");
    let o = lamol(&["verify", trace.to_str().unwrap(), "--lemma31", "--lemma32", "--thm33"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", s(&o.stdout), s(&o.stderr));
    assert!(s(&o.stdout).contains("lemma31: intervals=45150 violations=0"));

    // push one weight off the simplex
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let qi = header.iter().position(|h| h.starts_with("q:")).unwrap();
    let mut cells: Vec<String> = lines[5].split(',').map(String::from).collect();
    cells[qi] = "0.9".into();
    lines[5] = cells.join(",");
    let tampered = out.join("traces/tampered.csv");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    std::fs::copy(out.join("traces/fs.csv.meta"), out.join("traces/tampered.csv.meta")).unwrap();
    let o = lamol(&["verify", tampered.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(s(&o.stdout).contains("simplex_violations=1"));

    let adaptive = out.join("traces/adaptive.csv");
    let o = lamol(&["verify", adaptive.to_str().unwrap(), "--thm33"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(s(&o.stderr).contains("unsupported"));
    // without flags only the checks the trace supports run
    assert_eq!(lamol(&["verify", adaptive.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn verify_rejects_unknown_schema() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    std::fs::write(&p, "t\n1\n").unwrap();
    std::fs::write(dir.path().join("t.csv.meta"), "schema_version=99\n").unwrap();
    assert_eq!(lamol(&["verify", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bins_sweep_makes_two_groups() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mc.json",
        r#"{"name": "mc", "dataset": {"kind": "jump_shift", "setting": "small", "t": 300, "seed": 1},
            "runs": [{"name": "mc", "problem": {"kind": "mc", "bins": 5}, "learner": "fixed_share", "tau": 50}],
            "evaluation": {"widths": [50]}}"#,
    );
    let out = dir.path().join("s");
    let o = lamol(&["sweep", cfg.to_str().unwrap(), "--param", "bins", "--values", "2,10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", s(&o.stderr));
    assert!(out.join("traces/mc@bins=2.csv").exists());
    assert!(out.join("traces/mc@bins=10.csv").exists());
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    assert!(out.join("figures/sweep_bins.svg").exists());
}

#[test]
fn empty_sweep_behaves_as_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("switch.json");
    let a = dir.path().join("run");
    let b = dir.path().join("sweep");
    assert!(lamol(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    let o = lamol(&["sweep", cfg.to_str().unwrap(), "--param", "tau", "--values", "", "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", s(&o.stderr));
    assert_eq!(std::fs::read(a.join("summary.csv")).unwrap(), std::fs::read(b.join("summary.csv")).unwrap());
    assert!(!b.join("sweep.csv").exists());
}

#[test]
fn unknown_sweep_param_exits_2() {
    let o = lamol(&["sweep", configs().join("switch.json").to_str().unwrap(), "--param", "zeta", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_compas_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lamol"))
        .args(["run", configs().join("compas.json").to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .env("LAMOL_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compas_config_with_data() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    let mut csv = String::from("id,compas_screening_date,race,decile_score,two_year_recid\n");
    let races = ["African-American", "Caucasian", "Hispanic", "Other"];
    for i in 0..900 {
        let day = 1 + (i / 10) % 28;
        let month = 1 + (i / 280) % 12;
        let score = 1 + (i * 7) % 10;
        let label = u8::from((i * 13) % 10 < score);
        csv.push_str(&format!("{i},2013-{month:02}-{day:02},{},{score},{label}\n", races[i % 4]));
    }
    std::fs::write(dir.path().join("data/compas-scores-two-years.csv"), csv).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lamol"))
        .args(["run", configs().join("compas.json").to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .env("LAMOL_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", s(&o.stderr));
    assert!(dir.path().join("o/series/local_ma_w50.csv").exists());
}
