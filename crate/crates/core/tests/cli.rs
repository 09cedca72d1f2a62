use std::fs;

use localscore::cli::run;
use serde_json::Value;
use tempfile::TempDir;

fn call(args: &[&str]) -> (i32, Value, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("localscore").chain(args.iter().copied()), &mut out, &mut err);
    let err = String::from_utf8(err).unwrap();
    let v = if out.is_empty() { Value::Null } else { serde_json::from_slice(&out).unwrap() };
    (code, v, err)
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn estimate_normal_mean_is_sample_mean() {
    let dir = TempDir::new().unwrap();
    let xs = [0.3, -1.2, 2.5, 0.9, 1.1, -0.4];
    let data = write(&dir, "x.txt", &xs.map(|x| x.to_string()).join("\n"));
    let model = write(
        &dir,
        "m.json",
        r#"{"logdensity": "-x^2/2 + t1*x", "domain": ["-inf", "inf"], "params": ["t1"]}"#,
    );
    let (code, v, err) = call(&["estimate", "--rule", "hyvarinen", "--model", &model, "--data", &data]);
    assert_eq!(code, 0, "{err}");
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((v["theta_hat"][0].as_f64().unwrap() - mean).abs() < 1e-10);
    assert_eq!(v["method"], "closed_form");

    let (code, w, _) = call(&["estimate", "--phi", "-(1/2)*q1^2/q0", "--model", &model, "--data", &data]);
    assert_eq!(code, 0);
    assert_eq!(v["theta_hat"], w["theta_hat"]);
}

#[test]
fn estimate_reads_csv_column() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "x.csv", "id,value\n1,0.5\n2,1.5\n3,4.0\n");
    let model = write(
        &dir,
        "m.json",
        r#"{"logdensity": "ln(t1) - t1*x", "domain": [0, "inf"], "params": ["t1"], "bounds": [[1e-6, 1e6]]}"#,
    );
    let (code, v, err) = call(&[
        "estimate", "--rule", "modified_hyvarinen", "--model", &model, "--data", &data, "--column", "value",
    ]);
    assert_eq!(code, 0, "{err}");
    // 2 Σx / Σx² for the modified rule on the exponential family
    let expected = 2.0 * 6.0 / (0.25 + 2.25 + 16.0);
    assert!((v["theta_hat"][0].as_f64().unwrap() - expected).abs() < 1e-8);
}

#[test]
fn divergence_of_two_gaussians() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", r#"{"logdensity": "-x^2/2", "domain": ["-inf", "inf"]}"#);
    let q = write(&dir, "q.json", r#"{"logdensity": "-(x-1)^2/2", "domain": ["-inf", "inf"]}"#);
    let (code, v, err) = call(&["divergence", "--phi", "-(1/2)*q1^2/q0", "--p", &p, "--q", &q]);
    assert_eq!(code, 0, "{err}");
    // ½ E_P[(∂ log p - ∂ log q)²] for unit shift
    assert!((v["total"].as_f64().unwrap() - 0.5).abs() < 1e-7);
    assert!(v["d_plus"].as_f64().unwrap().abs() < 1e-9);
    assert!(v["d_minus"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{not json");
    let (code, _, err) = call(&["divergence", "--phi", "q0", "--p", &bad, "--q", &bad]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
    assert_eq!(call(&["estimate", "--rule", "nope", "--model", &bad, "--data", &bad]).0, 2);
    assert_eq!(call(&["transform", "--gamma", "-x", "--phi", "q0"]).0, 1);
    assert_eq!(call(&["bogus"]).0, 2);
}

#[test]
fn output_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("out.json");
    let (code, v, _) = call(&["--output", path.to_str().unwrap(), "generate", "--phi", "-q1^2/q0"]);
    assert_eq!(code, 0);
    assert_eq!(v, Value::Null);
    let written: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written["s"], "2*q2/q0 - q1^2/q0^2");
}

#[test]
fn selftest_passes_and_is_deterministic() {
    let (code, a, _) = call(&["--seed", "11", "selftest"]);
    assert_eq!(code, 0);
    assert_eq!(a["all_passed"], true);
    assert_eq!(a["criteria"].as_array().unwrap().len(), 10);
    let strip = |mut v: Value| {
        for c in v["criteria"].as_array_mut().unwrap() {
            c.as_object_mut().unwrap().remove("seconds");
        }
        v
    };
    let (_, b, _) = call(&["--seed", "11", "selftest"]);
    assert_eq!(strip(a), strip(b));
}
