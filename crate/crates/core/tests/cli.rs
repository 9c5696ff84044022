use std::process::{Command, Output};

fn dtmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtmod")).args(args).env_remove("DTMOD_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len() + 3..].trim().parse().unwrap()
}

#[test]
fn classical_modulus_of_square() {
    // Δ_h²(x²) = 2h², so the sup over h <= 0.5 is 0.5.
    let o = dtmod(&["modulus", "--fn", "poly:0,0,1", "--variant", "classical", "--k", "2", "--t", "0.5", "--p", "inf"]);
    assert!(o.status.success());
    assert!((field(&stdout(&o), "value") - 0.5).abs() < 1e-12);
}

#[test]
fn json_output_parses() {
    let o = dtmod(&["modulus", "--fn", "poly:0,1", "--variant", "classical", "--k", "1", "--t", "0.25", "--p", "inf", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(v["header"][1], "seed = 0");
}

#[test]
fn best_line_for_square() {
    let o = dtmod(&["approx", "--fn", "poly:0,0,1", "--n", "1"]);
    assert!(o.status.success());
    assert!((field(&stdout(&o), "error") - 0.5).abs() < 1e-6);
}

#[test]
fn coconvex_cubic_is_exact() {
    let o = dtmod(&["approx", "--fn", "poly:0,0,0,1", "--n", "3", "--constraint", "coconvex", "--inflections", "0", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["error"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn exit_codes() {
    assert_eq!(dtmod(&["modulus", "--fn", "poly:0,0,1"]).status.code(), Some(2));
    assert_eq!(dtmod(&["verify", "--claim", "nope"]).status.code(), Some(2));
    let o = dtmod(&["modulus", "--fn", "poly:0,0,1", "--k", "2", "--t", "0.5", "--alpha", "-1", "--p", "inf"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[0, inf)"));
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"mod": {"hgrid": 30}, "approx.seed": 4}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let o = dtmod(&["--config", c, "modulus", "--fn", "exp:1", "--k", "1", "--t", "0.1"]);
    let text = stdout(&o);
    assert!(text.contains("# mod.hgrid = 30") && text.contains("# seed = 4"), "{text}");
    let o = dtmod(&["--config", c, "modulus", "--fn", "exp:1", "--k", "1", "--t", "0.1", "--hgrid", "12"]);
    assert!(stdout(&o).contains("hgrid = 12"));
    std::fs::write(&cfg, r#"{"mod.hgird": 30}"#).unwrap();
    assert_eq!(dtmod(&["--config", c, "modulus", "--fn", "exp:1", "--k", "1", "--t", "0.1"]).status.code(), Some(2));
}

#[test]
fn report_to_stdout() {
    let o = dtmod(&["report", "--claim", "RMK2.16", "--format", "json", "--out", "-"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["records"].as_array().is_some_and(|r| !r.is_empty()));
}
