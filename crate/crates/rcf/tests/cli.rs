use std::process::{Command, Output};

use serde_json::Value;

fn rcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcf")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn close(v: &Value, x: f64) -> bool {
    (v.as_f64().unwrap() - x).abs() <= 1e-12 * x.abs().max(1.0)
}

#[test]
fn eval_flat_real_spot_value() {
    let out = rcf(&["eval", "--fixture", "flat-real", "--eta", "1,0", "--b", "2,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["seed"], 42);
    let p = &v["points"][0];
    assert!(close(&p["alpha"], 1.0) && close(&p["beta"], 2.0));
    assert!(close(&p["jet"]["l"], 16.0));
    assert!(close(&p["g"][0][0][0], 16.0));
    assert_eq!(p["valid"], true);
}

#[test]
fn eval_c3_example_at_origin_is_outside_the_region() {
    let out = rcf(&["eval", "--fixture", "c3-example", "--z", "0,0,0", "--eta", "1,1,1"]);
    assert_eq!(out.status.code(), Some(0));
    let p = &json(&out)["points"][0];
    assert!(close(&p["alpha_sq"], 3.0) && close(&p["beta"], 1.0));
    assert_eq!(p["valid"], false);
}

#[test]
fn eval_pole_exits_two_with_error_name() {
    let out = rcf(&["eval", "--fixture", "flat-real", "--eta", "1,0", "--b", "1,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["points"][0]["error"]["name"], "PoleAtAlphaEqualsBeta");
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(rcf(&["eval", "--fixture", "nope", "--eta", "1"]).status.code(), Some(2));
    assert_eq!(rcf(&["eval", "--fixture", "flat-real", "--eta", "1,x"]).status.code(), Some(2));
    assert_eq!(rcf(&["eval", "--fixture", "c3-example", "--b", "1,0,0"]).status.code(), Some(2));
    assert_eq!(rcf(&["verify", "--fixture", "flat-real", "--tol", "bogus=1"]).status.code(), Some(2));
    assert_eq!(rcf(&["eval"]).status.code(), Some(2));
}

#[test]
fn negative_components_parse() {
    let out = rcf(&["eval", "--fixture", "flat-real", "--eta", "-1:0.5,-2", "--b", "-3,-4"]);
    let p = &json(&out)["points"][0];
    assert_eq!(p["point"]["eta"][0][0], -1.0);
    assert_eq!(p["point"]["eta"][0][1], 0.5);
}

#[test]
fn verify_flat_real_passes() {
    let out = rcf(&["verify", "--fixture", "flat-real", "--samples", "500", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["points"].as_array().unwrap().len(), 500);
}

#[test]
fn verify_fails_with_impossible_tolerance() {
    let out = rcf(&["verify", "--fixture", "flat-real", "--samples", "20", "--tol", "reconstruction=0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invert_requires_non_hermitian_metric() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.toml");
    std::fs::write(
        &path,
        "n = 1\na = [[\"1\"]]\na_mixed = [[\"0.5\"]]\nb = [\"3\"]\n",
    )
    .unwrap();
    let out = rcf(&["invert", "--metric", path.to_str().unwrap(), "--samples", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-Hermitian"));
}

#[test]
fn invert_random_seeded_passes() {
    let out = rcf(&["invert", "--fixture", "random-seeded", "--samples", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], true);
}

#[test]
fn audit_flags_sigma_discrepancies() {
    let out = rcf(&["audit", "--fixture", "flat-real", "--samples", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let status = |id: &str| {
        v["findings"].as_array().unwrap().iter().find(|f| f["formula_id"] == id).unwrap()["status"].clone()
    };
    assert_eq!(status("sigma1"), "discrepant");
    assert_eq!(status("sigma2"), "discrepant");
    assert_eq!(status("sigma3"), "consistent");
    for f in v["findings"].as_array().unwrap() {
        assert!(f["paper_quote"].is_string());
    }
}

#[test]
fn audit_c3_has_no_valid_points() {
    let out = rcf(&["audit", "--fixture", "c3-example", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["error"]["name"], "NoValidPoints");
}

#[test]
fn sample_c3_grid_is_empty() {
    let out = rcf(&["sample", "--fixture", "c3-example", "--grid", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1000);
    let headers = rdr.headers().unwrap().clone();
    let status = headers.iter().position(|h| h == "status").unwrap();
    assert!(rows.iter().all(|r| &r[status] == "invalid"));
}

#[test]
fn same_seed_same_bytes() {
    for args in [
        &["audit", "--fixture", "random-seeded", "--seed", "9", "--jobs", "4"][..],
        &["verify", "--fixture", "random-seeded", "--seed", "9", "--samples", "40", "--jobs", "3"][..],
    ] {
        let a = rcf(args);
        let b = rcf(args);
        assert_eq!(a.stdout, b.stdout);
        let mut single = args.to_vec();
        single.pop();
        single.push("1");
        assert_eq!(rcf(&single).stdout, a.stdout);
    }
}

#[test]
fn replay_rechecks_saved_reports() {
    let dir = tempfile::tempdir().unwrap();
    for (name, args) in [
        ("audit", &["audit", "--fixture", "flat-real", "--samples", "30"][..]),
        ("eval", &["eval", "--fixture", "random-seeded", "--samples", "5"][..]),
        ("verify", &["verify", "--fixture", "flat-real", "--samples", "10"][..]),
        ("invert", &["invert", "--fixture", "flat-real", "--samples", "10"][..]),
        ("sample", &["sample", "--fixture", "c3-example", "--grid", "3", "--format", "json"][..]),
    ] {
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, rcf(args).stdout).unwrap();
        let out = rcf(&[name, "--replay", path.to_str().unwrap()]);
        let v = json(&out);
        assert_eq!(out.status.code(), Some(0), "{name}: {v}");
        assert!(v["checked"].as_u64().unwrap() > 0, "{name}");
    }
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.json");
    let text = String::from_utf8(rcf(&["audit", "--fixture", "flat-real", "--samples", "20"]).stdout).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    let f = v["findings"].as_array_mut().unwrap().iter_mut().find(|f| f["formula_id"] == "sigma1").unwrap();
    f["max_rel_diff"] = Value::from(f["max_rel_diff"].as_f64().unwrap() * 1.5);
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = rcf(&["audit", "--replay", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["mismatches"][0].as_str().unwrap().starts_with("sigma1"));
}

#[test]
fn metric_files_in_both_formats_give_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("m.toml");
    let json_path = dir.path().join("m.json");
    std::fs::write(&toml_path, "name = \"tilted\"\nn = 2\na = [[\"1\", \"0\"], [\"0\", \"exp(z1 + conj(z1))\"]]\nb = [\"2\", \"0.5*z2\"]\n").unwrap();
    std::fs::write(
        &json_path,
        r#"{"name":"tilted","n":2,"a":[["1","0"],["0","exp(z1 + conj(z1))"]],"b":["2","0.5*z2"]}"#,
    )
    .unwrap();
    let a = rcf(&["eval", "--metric", toml_path.to_str().unwrap(), "--z", "0.1:0.2,0", "--eta", "1,0.5"]);
    let b = rcf(&["eval", "--metric", json_path.to_str().unwrap(), "--z", "0.1:0.2,0", "--eta", "1,0.5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn other_families_verify() {
    for fam in ["randers", "kropina", "matsumoto"] {
        let out = rcf(&["verify", "--fixture", "random-seeded", "--family", fam, "--samples", "50"]);
        let v = json(&out);
        assert_eq!(out.status.code(), Some(0), "{fam}: {}", v["checks"]);
    }
}

#[test]
fn pretty_and_csv_render() {
    let out = rcf(&["verify", "--fixture", "flat-real", "--samples", "10", "--format", "pretty"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed 42") && text.trim_end().ends_with("PASS"));
    let out = rcf(&["audit", "--fixture", "flat-real", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("formula_id,status"));
    assert_eq!(text.lines().count(), 15);
}
