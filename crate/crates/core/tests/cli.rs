use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;
use token_screen::cli::{
    run_with, RunConfig, EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION,
};
use token_screen::prelude::*;

fn run(args: &[&str]) -> (i32, String, String) {
    run_with(std::iter::once("token-screen").chain(args.iter().copied()))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn asymmetric_config(dir: &Path) -> PathBuf {
    let mut cfg = serde_json::to_value(RunConfig::leading()).unwrap();
    cfg["prior"] = serde_json::json!([0.4, 0.6]);
    write_config(dir, "asym.json", &cfg.to_string())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn reproduce_passes() {
    let (code, out, err) = run(&["reproduce", "--example", "leading"]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passes"], Value::Bool(true));
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 20);
    assert!(checks.iter().all(|c| c["pass"] == Value::Bool(true)));
}

#[test]
fn unknown_example_is_a_config_error() {
    let (code, _, err) = run(&["reproduce", "--example", "nonexistent"]);
    assert_eq!(code, EXIT_CONFIG, "{err}");
}

#[test]
fn unknown_key_reports_its_path() {
    let dir = TempDir::new().unwrap();
    let mut cfg = serde_json::to_value(RunConfig::leading()).unwrap();
    cfg["grids"]["max_stepp"] = serde_json::json!(0.01);
    let p = write_config(
        dir.path(),
        "bad.json",
        &serde_json::to_string_pretty(&cfg).unwrap(),
    );
    let (code, _, err) = run(&["revenue", "--config", path_str(&p)]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("grids"), "{err}");
    assert!(err.contains("max_stepp"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn wrong_type_and_bad_values_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let mut cfg = serde_json::to_value(RunConfig::leading()).unwrap();
    cfg["chi"] = serde_json::json!("fast");
    let p = write_config(dir.path(), "type.json", &cfg.to_string());
    let (code, _, err) = run(&["revenue", "--config", path_str(&p)]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("chi"), "{err}");

    let mut cfg = serde_json::to_value(RunConfig::leading()).unwrap();
    cfg["prior"] = serde_json::json!([0.7, 0.7]);
    let p = write_config(dir.path(), "prior.json", &cfg.to_string());
    assert_eq!(run(&["revenue", "--config", path_str(&p)]).0, EXIT_CONFIG);

    let mut cfg = serde_json::to_value(RunConfig::leading()).unwrap();
    cfg["version"] = serde_json::json!(99);
    let p = write_config(dir.path(), "version.json", &cfg.to_string());
    assert_eq!(run(&["revenue", "--config", path_str(&p)]).0, EXIT_CONFIG);

    let p = write_config(dir.path(), "broken.json", "{ \"version\": 1,");
    assert_eq!(run(&["revenue", "--config", path_str(&p)]).0, EXIT_CONFIG);
}

#[test]
fn law_csv_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("law.csv");
    let (code, _, err) = run(&["law", "--out", path_str(&out)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "F_0", "F_1", "f", "slack"]);

    let sk = build_skeleton(
        &EntropyModel::quadratic_binary(2.0),
        &Belief::binary(0.5).unwrap(),
        0.125,
        &SkeletonOptions::default(),
    )
    .unwrap();
    let law = stopping_law(&sk, sk.default_horizon()).unwrap();
    for row in rows.iter().step_by(997) {
        let t: f64 = row[0].parse().unwrap();
        let f0: f64 = row[1].parse().unwrap();
        assert_eq!(f0.to_bits(), law.cdf_state(0, t).to_bits(), "t = {t}");
        let slack: f64 = row[4].parse().unwrap();
        assert!(slack.abs() <= 1e-7);
    }
}

#[test]
fn verify_accepts_the_exported_law() {
    let dir = TempDir::new().unwrap();
    let cfg = asymmetric_config(dir.path());
    let law = dir.path().join("law.csv");
    assert_eq!(
        run(&["law", "--config", path_str(&cfg), "--out", path_str(&law)]).0,
        EXIT_OK
    );
    let (code, out, err) = run(&[
        "verify",
        "--config",
        path_str(&cfg),
        "--law",
        path_str(&law),
    ]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["capacity"]["feasible"], Value::Bool(true));
    assert_eq!(v["capacity"]["first_violation_at"], Value::Null);
}

#[test]
fn verify_flags_a_hand_edited_law() {
    let dir = TempDir::new().unwrap();
    let law = dir.path().join("law.csv");
    assert_eq!(run(&["law", "--out", path_str(&law)]).0, EXIT_OK);
    let (header, rows) = read_csv(&law);
    // learn twice as fast from t = 0.5 on
    let mut w = csv::Writer::from_path(&law).unwrap();
    w.write_record(&header).unwrap();
    for row in rows {
        let t: f64 = row[0].parse().unwrap();
        let mut row = row.clone();
        if t >= 0.5 {
            for cell in &mut row[1..=2] {
                let f: f64 = cell.parse().unwrap();
                let base = 0.5 * (1.0 - (-0.25f64).exp());
                *cell = format!("{:.17e}", (base + 2.0 * (f - base)).min(0.5));
            }
        }
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    let (code, out, _) = run(&["verify", "--law", path_str(&law)]);
    assert_eq!(code, EXIT_CERTIFICATE, "{out}");
    let report: String = out
        .lines()
        .take_while(|l| !l.starts_with("capacity"))
        .collect();
    let v: Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["capacity"]["feasible"], Value::Bool(false));
    let first = v["capacity"]["first_violation_at"].as_f64().unwrap();
    assert!((0.5..0.6).contains(&first), "{first}");
    assert!(out.contains("violated from t ="));
}

#[test]
fn full_verify_report_passes() {
    let (code, out, err) = run(&["verify"]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passes"], Value::Bool(true));
}

fn bytes(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = asymmetric_config(dir.path());
    let cfg = path_str(&cfg);
    for cmd in ["simulate", "menu", "law", "skeleton"] {
        let a = dir.path().join(format!("{cmd}-1.csv"));
        let b = dir.path().join(format!("{cmd}-4.csv"));
        let c = dir.path().join(format!("{cmd}-again.csv"));
        let extra: &[&str] = if cmd == "simulate" {
            &["--paths", "5000", "--seed", "11"]
        } else {
            &[]
        };
        for (threads, out) in [("1", &a), ("4", &b), ("3", &c)] {
            let mut args = vec![
                "--threads",
                threads,
                cmd,
                "--config",
                cfg,
                "--out",
                path_str(out),
            ];
            args.extend_from_slice(extra);
            let (code, _, err) = run(&args);
            assert_eq!(code, EXIT_OK, "{cmd}: {err}");
        }
        assert_eq!(bytes(&a), bytes(&b), "{cmd}");
        assert_eq!(bytes(&a), bytes(&c), "{cmd}");
    }
}

#[test]
fn seeds_change_simulations() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run(&[
        "simulate",
        "--paths",
        "2000",
        "--seed",
        "1",
        "--out",
        path_str(&a),
    ]);
    run(&[
        "simulate",
        "--paths",
        "2000",
        "--seed",
        "2",
        "--out",
        path_str(&b),
    ]);
    assert_ne!(bytes(&a), bytes(&b));
    let (header, rows) = read_csv(&a);
    assert_eq!(header, ["path", "state", "time"]);
    assert_eq!(rows.len(), 2000);
}

#[test]
fn skeleton_csv_shape() {
    let dir = TempDir::new().unwrap();
    let cfg = asymmetric_config(dir.path());
    let out = dir.path().join("sk.csv");
    assert_eq!(
        run(&[
            "skeleton",
            "--config",
            path_str(&cfg),
            "--out",
            path_str(&out)
        ])
        .0,
        EXIT_OK
    );
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        ["t", "k", "mu_0", "mu_1", "beta_0", "beta_1", "zeta"]
    );
    let first = &rows[0];
    assert_eq!(first[1], "1");
    let mu1: f64 = first[3].parse().unwrap();
    assert!((mu1 - 0.6).abs() < 1e-15);
    let last = rows.last().unwrap();
    assert_eq!(last[1], "2");
}

#[test]
fn menu_csv_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("menu.csv");
    assert_eq!(run(&["menu", "--out", path_str(&out)]).0, EXIT_OK);
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        [
            "r",
            "T",
            "cap_tokens",
            "price",
            "marginal_price",
            "utility",
            "net_utility"
        ]
    );
    assert_eq!(rows[0][1], "inf");
    for row in &rows[1..] {
        let r: f64 = row[0].parse().unwrap();
        let t: f64 = row[1].parse().unwrap();
        assert!((t - 1.0 / (r - 1.0)).abs() < 1e-9 * t);
    }
    let top: f64 = rows.last().unwrap()[6].parse().unwrap();
    assert!(top.abs() < 1e-8);
}

#[test]
fn json_reports() {
    let (code, out, _) = run(&["revenue"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["revenue"].as_f64().unwrap() - 0.20198057).abs() < 1e-6);

    let (code, out, _) = run(&["baselines"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(
        (v["constant_delay"]["revenue"].as_f64().unwrap() - 0.5 * (-3.0f64).exp()).abs() < 1e-9
    );
}

#[test]
fn quality_and_extended_menus() {
    let dir = TempDir::new().unwrap();
    let q = dir.path().join("q.csv");
    assert_eq!(
        run(&["quality", "--r", "1.25", "--out", path_str(&q)]).0,
        EXIT_OK
    );
    let (header, rows) = read_csv(&q);
    assert_eq!(header, ["t", "kappa", "upper", "lower"]);
    assert_eq!(rows.last().unwrap()[1].parse::<f64>().unwrap(), 0.0);

    let fig = dir.path().join("fig.csv");
    assert_eq!(
        run(&["quality", "--figure", "--out", path_str(&fig)]).0,
        EXIT_OK
    );
    assert_eq!(read_csv(&fig).0[0], "r");

    let ext = dir.path().join("ext.csv");
    let (code, _, err) = run(&[
        "extended-menu",
        "--valuation",
        "exp(-r)",
        "--out",
        path_str(&ext),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, _, err) = run(&[
        "extended-menu",
        "--valuation",
        "r^2",
        "--out",
        path_str(&ext),
    ]);
    assert_eq!(code, EXIT_VALIDATION, "{err}");
    assert!(err.contains("single crossing"), "{err}");
    let (code, _, _) = run(&[
        "extended-menu",
        "--valuation",
        "sin(r)",
        "--out",
        path_str(&ext),
    ]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn output_dir_resolves_relative_paths() {
    let dir = TempDir::new().unwrap();
    let mut cfg = serde_json::to_value(RunConfig::leading()).unwrap();
    cfg["output_dir"] = serde_json::json!(dir.path().join("artifacts"));
    let p = write_config(dir.path(), "cfg.json", &cfg.to_string());
    assert_eq!(
        run(&["menu", "--config", path_str(&p), "--out", "menu.csv"]).0,
        EXIT_OK
    );
    assert!(dir.path().join("artifacts/menu.csv").exists());
}

#[test]
fn help_documents_columns() {
    let (code, out, _) = run(&["law", "--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let (_, _, err) = run(&["law", "--help"]);
    assert!(err.contains("t, F_<i>..., f, slack"), "{err}");
}
