use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn varopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varopt"))
        .args(args)
        .output()
        .unwrap()
}

fn json_stdout(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn model_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn rate_is_zero_at_the_money() {
    let v = json_stdout(&varopt(&["rate", "--x", "0"]));
    assert_eq!(v["kind"], "point");
    assert_eq!(v["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn rate_methods_agree_at_zero_correlation() {
    let closed = json_stdout(&varopt(&["rate", "--k", "0.11"]))["value"]
        .as_f64()
        .unwrap();
    let numeric = json_stdout(&varopt(&["rate", "--k", "0.11", "--method", "numeric"]))["value"]
        .as_f64()
        .unwrap();
    assert!((closed - numeric).abs() <= 1e-4 * closed);
    let b = json_stdout(&varopt(&[
        "rate", "--k", "0.11", "--rho", "-0.7", "--method", "bounds",
    ]));
    assert_eq!(b["kind"], "interval");
    assert!(b["lower"].as_f64().unwrap() <= b["upper"].as_f64().unwrap());
    let rows = json_stdout(&varopt(&[
        "rate",
        "--x",
        "-0.1:0.1:5",
        "--method",
        "expansion",
    ]));
    assert_eq!(rows.as_array().unwrap().len(), 5);
}

#[test]
fn expansion_smile_grid() {
    let o = varopt(&[
        "smile",
        "--x",
        "-0.1:0.1:21",
        "--method",
        "expansion",
        "--model",
        &model_path("tanh.json"),
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "K,x,sigma_v,method,lo,hi");
    assert_eq!(lines.len(), 22);
    let atm = json_stdout(&varopt(&["atm", "--model", &model_path("tanh.json")]))["sigma_atm"]
        .as_f64()
        .unwrap();
    let mid: Vec<&str> = lines[11].split(',').collect();
    assert_eq!(mid[1].parse::<f64>().unwrap(), 0.0);
    assert!((mid[2].parse::<f64>().unwrap() - atm).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_one_with_json() {
    for args in [
        vec!["rate", "--k", "0.1", "--bogus"],
        vec!["rate", "--k", "0.1", "--method", "nope"],
        vec!["rate"],
        vec!["mc", "--k", "0.1", "--T", "0"],
    ] {
        let o = varopt(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr_json(&o)["error"], "usage");
    }
}

#[test]
fn domain_and_model_errors_exit_two_with_json() {
    let o = varopt(&["rate", "--k", "-0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"]
        .as_str()
        .unwrap()
        .contains("-0.1"));

    let o = varopt(&["rate", "--k", "0.11", "--rho", "1.5"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"v0": -1.0}"#).unwrap();
    let o = varopt(&["atm", "--model", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["error"].is_string());
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        vec![
            "smile",
            "--k",
            "0.08:0.12:9",
            "--rho",
            "0.7",
            "--method",
            "bounds",
        ],
        vec![
            "rate",
            "--x",
            "-0.05,0.05",
            "--rho",
            "-0.7",
            "--method",
            "numeric",
        ],
        vec!["mc", "--k", "0.1", "--paths", "2000", "--steps", "20"],
    ] {
        let a = varopt(&args);
        let b = varopt(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn table_without_simulation() {
    let v = json_stdout(&varopt(&["table1", "--no-mc"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["forward"].is_null()));
    assert!((rows[1]["sigma_atm"].as_f64().unwrap() - 1.155_277_74).abs() < 1e-8);
    assert!(v["notes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("0.1553")));
}

#[test]
fn small_simulation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mc.csv");
    let o = varopt(&[
        "mc",
        "--k",
        "0.09,0.1,0.11",
        "--T",
        "1/252",
        "--paths",
        "4000",
        "--steps",
        "25",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("K,x,call,call_se,put,put_se,ivol,ivol_se"));
    let meta: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("mc.csv.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["model_hash"].as_str().unwrap().len(), 64);

    let o = varopt(&[
        "figures",
        "--x",
        "-0.05:0.05:3",
        "--T",
        "1/252",
        "--paths",
        "2000",
        "--steps",
        "10",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.starts_with("rho,T,K,x,mc_ivol,mc_ivol_se,mc_lo,mc_hi,linear"));
}

#[test]
fn in_process_run_matches_binary() {
    let args = ["varopt", "atm", "--rho", "0.7"];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(varopt_cli::run(args, &mut out, &mut err), 0);
    assert_eq!(out, varopt(&args[1..]).stdout);
}
