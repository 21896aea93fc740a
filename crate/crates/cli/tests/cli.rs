mod common;

use std::path::Path;

use common::*;
use serde_json::Value;

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errs: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errs.is_empty(), "schema violations: {errs:?}");
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Matches a small synthetic dataset and returns (tempdir, config path, output dir).
fn matched(effect: f64) -> (tempfile::TempDir, String, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    let out = dir.path().join("out");
    write_csv(&input, &synthetic(80, 160, effect, 3));
    let cfg = dir.path().join("analysis.toml");
    std::fs::write(&cfg, config_text(&input, &out)).unwrap();
    let o = run(&["match", "-c", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, cfg.to_str().unwrap().to_string(), out)
}

#[test]
fn match_writes_four_files_and_valid_reports() {
    let (_dir, cfg, out) = matched(2.0);
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["balance.json", "pairs_period1.csv", "pairs_period2.csv", "quadruples.csv"]);

    let v = schema();
    let bal = json(&out.join("balance.json"));
    assert_valid(&v, &bal);
    let stages: Vec<&str> = bal["balance"].as_array().unwrap().iter().map(|r| r["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["period 1", "period 2", "cross-period"]);
    let keys: Vec<&String> = bal["balance"][0]["rows"][0].as_object().unwrap().keys().collect();
    assert!(keys.iter().any(|k| *k == "before_std_diff") && keys.iter().any(|k| *k == "after_p"));

    let o = run(&["test", "-c", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = json(&out.join("test_report.json"));
    assert_valid(&v, &t);
    for field in ["statistic", "p_value", "hl_estimate", "ci"] {
        assert!(!t[field].is_null(), "{field}");
    }
    let ci = t["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() < 2.0 && 2.0 < ci[1].as_f64().unwrap());

    let o = run(&["sens", "-c", &cfg, "--gamma", "1", "--gamma", "1.05", "--gamma", "1.1", "--gamma", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("sens_report.json"));
    assert_valid(&v, &s);

    let o = run(&["amplify", "--gamma", "2", "--json"]);
    assert!(o.status.success());
    assert_valid(&v, &serde_json::from_str(&stdout(&o)).unwrap());
}

#[test]
fn sens_reports_monotone_grid_and_labelled_changepoint() {
    let (_dir, cfg, out) = matched(2.0);
    let o = run(&["sens", "-c", &cfg, "--gamma", "1.1", "--gamma", "1", "--gamma", "1.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("sens_report.json"));
    let grid = s["grid"].as_array().unwrap();
    let gammas: Vec<f64> = grid.iter().map(|r| r["gamma"].as_f64().unwrap()).collect();
    assert_eq!(gammas, [1.0, 1.05, 1.1]);
    let p: Vec<f64> = grid.iter().map(|r| r["p_upper"].as_f64().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[0] <= w[1]), "{p:?}");
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("changepoint")).unwrap();
    assert!(line.contains("gamma*") && line.contains("gamma^2"), "{line}");
    let cp = &s["changepoint"];
    assert_eq!(cp["kind"], "at");
    let g = cp["gamma"].as_f64().unwrap();
    assert!(g > 1.0 && (cp["gamma_squared"].as_f64().unwrap() - g * g).abs() < 1e-12);
}

#[test]
fn amplify_row_for_gamma_two() {
    let o = run(&["amplify", "--gamma", "2", "--lambda", "3", "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v["tables"][0]["rows"][0];
    assert_eq!(row["lambda"], 3.0);
    assert!((row["delta_did"].as_f64().unwrap() - 2.6458).abs() < 1e-4);
    assert_eq!(row["delta_paired"], 5.0);
    let o = run(&["amplify", "--gamma", "2", "--lambda", "3"]);
    assert!(stdout(&o).contains("2.646"));
}

#[test]
fn tau0_override_moves_the_test() {
    let (_dir, cfg, out) = matched(2.0);
    let p_at = |tau: &str| {
        let o = run(&["test", "-c", &cfg, "--tau0", tau]);
        assert!(o.status.success(), "{}", stderr(&o));
        let t = json(&out.join("test_report.json"));
        assert_eq!(t["tau0"].as_f64().unwrap(), tau.parse::<f64>().unwrap());
        t["p_value"].as_f64().unwrap()
    };
    let (p0, p2) = (p_at("0"), p_at("2"));
    assert!(p0 < 1e-6 && p2 > 0.01, "{p0} {p2}");
}

#[test]
fn missing_outcome_column_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_csv(&input, &synthetic(10, 20, 0.0, 1));
    let o = run(&["match", "-c", &{
        let cfg = dir.path().join("a.toml");
        std::fs::write(&cfg, "outcome = \"earnings\"\n".to_string() + &config_text(&input, &dir.path().join("out"))).unwrap();
        cfg.to_str().unwrap().to_string()
    }]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("\"earnings\""), "{}", stderr(&o));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    let mut rows = synthetic(10, 20, 0.0, 1);
    rows[6].period = 9;
    write_csv(&input, &rows);
    let o = run(&["match", "--input", input.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}

#[test]
fn infeasible_fine_balance_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    // every control is in a region no treated unit shares
    let rows: Vec<Row> = synthetic(20, 40, 0.0, 5)
        .into_iter()
        .map(|mut r| {
            r.region = if r.treated { "north" } else { "west" }.into();
            r
        })
        .collect();
    write_csv(&input, &rows);
    let cfg = dir.path().join("a.toml");
    std::fs::write(&cfg, config_text(&input, &dir.path().join("out"))).unwrap();
    let o = run(&["match", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("fine balance on region"), "{}", stderr(&o));
}

#[test]
fn binary_without_eligible_quadruples_explains_why() {
    let dir = tempfile::tempdir().unwrap();
    let quads = dir.path().join("quadruples.csv");
    // concordant pre-period pairs everywhere
    let mut text = String::from(
        "quad,pre_treated_id,pre_control_id,post_treated_id,post_control_id,\
         pre_treated_outcome,pre_control_outcome,post_treated_outcome,post_control_outcome,d\n",
    );
    for i in 0..6 {
        text += &format!("{i},a{i},b{i},c{i},d{i},1,1,1,0,0\n");
    }
    std::fs::write(&quads, text).unwrap();
    let o = run(&[
        "test",
        "--quadruples",
        quads.to_str().unwrap(),
        "--outcome-kind",
        "binary",
        "--test",
        "mcnemar",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.contains("no information") && err.contains("pre pair concordant: 6"), "{err}");
}

#[test]
fn binary_test_reports_eligible_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let quads = dir.path().join("quadruples.csv");
    let mut text = String::from(
        "quad,pre_treated_id,pre_control_id,post_treated_id,post_control_id,\
         pre_treated_outcome,pre_control_outcome,post_treated_outcome,post_control_outcome,d\n",
    );
    // 8 eligible with s = +1, 2 with s = -1, 3 concordant
    for i in 0..13 {
        let (a, b, c, d) = match i {
            0..=7 => (0, 1, 1, 0),
            8..=9 => (1, 0, 0, 1),
            _ => (1, 1, 0, 0),
        };
        text += &format!("{i},a{i},b{i},c{i},d{i},{a},{b},{c},{d},0\n");
    }
    std::fs::write(&quads, text).unwrap();
    let o = run(&[
        "test",
        "--quadruples",
        quads.to_str().unwrap(),
        "--outcome-kind",
        "binary",
        "--test",
        "mcnemar",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = json(&dir.path().join("test_report.json"));
    assert_valid(&schema(), &t);
    assert_eq!(t["mcnemar"]["eligible"], 10);
    assert_eq!(t["mcnemar"]["statistic"], 8);
    assert_eq!(t["mcnemar"]["ineligible"]["count"], 3);
    assert!((t["p_value"].as_f64().unwrap() - 56.0 / 1024.0).abs() < 1e-15);
}

#[test]
fn mismatched_test_and_kind_is_a_usage_error() {
    let o = run(&["test", "--test", "mcnemar"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["sens", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_validates_reps() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = run(&["simulate", "--reps", "100", "--quads", "30", "--seed", "9", "--output", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains(path.to_str().unwrap()));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let rows = read_csv(&a);
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[100]["replication"], "summary");
    assert!(rows[..100].iter().enumerate().all(|(i, r)| r["replication"] == i.to_string()));

    let o = run(&["simulate", "--reps", "0", "--output", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn patterns_writes_eight_labelled_panels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig");
    let o = run(&["patterns", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    let files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 8);
    for f in &files {
        assert!(std::fs::read_to_string(f).unwrap().contains("illustrative"));
    }
    let a = std::fs::read_to_string(out.join("case_a_raw.svg")).unwrap();
    assert_eq!(plotted_value(&a, "treated", "pre"), plotted_value(&a, "control", "pre"));

    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "x").unwrap();
    let o = run(&["patterns", "--output", blocked.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

