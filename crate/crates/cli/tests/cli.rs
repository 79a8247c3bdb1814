use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");

fn confnodal(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confnodal"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CONFNODAL_GRID")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (comment, header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn schema() -> BTreeMap<String, Vec<String>> {
    serde_json::from_str(&fs::read_to_string(Path::new(GOLDEN).join("schema.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn approx_eq_json(a: &Value, b: &Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= tol,
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(a, b)| approx_eq_json(a, b, tol)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| approx_eq_json(v, w, tol)))
        }
        _ => a == b,
    }
}

#[test]
fn zero_potential_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = confnodal(&["nodes", "--preset", "zero", "--alpha", "1", "--nmax", "5"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let (c1, h1, r1) = csv_rows(&dir.path().join("spectrum.csv"));
    let (c2, h2, r2) = csv_rows(&Path::new(GOLDEN).join("zero_alpha1_spectrum.csv"));
    assert_eq!((c1, h1), (c2, h2));
    assert_eq!(r1.len(), r2.len());
    for (a, b) in r1.iter().zip(&r2) {
        assert_eq!(a[0], b[0]);
        for k in 1..3 {
            let (x, y): (f64, f64) = (a[k].parse().unwrap(), b[k].parse().unwrap());
            assert!((x - y).abs() < 1e-12);
        }
        assert!(a[3].parse::<f64>().unwrap() < 1e-9);
    }
    let got = json(&dir.path().join("nodes.json"));
    let want = json(&Path::new(GOLDEN).join("zero_alpha1_nodes.json"));
    assert!(approx_eq_json(&got, &want, 1e-12), "{got}");
}

#[test]
fn zero_potential_alpha_half_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let o = confnodal(&["spectrum", "--preset", "zero", "--alpha", "0.5", "--nmax", "10"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, _, rows) = csv_rows(&dir.path().join("spectrum.csv"));
    assert_eq!(rows.len(), 10);
    for row in rows {
        let n: f64 = row[0].parse().unwrap();
        let lambda: f64 = row[1].parse().unwrap();
        assert!((lambda - n * PI.sqrt() / 2.0).abs() < 1e-9);
    }
}

#[test]
fn output_schemas_are_pinned() {
    let schema = schema();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let header = |name: &str| {
        let (comment, h, _) = csv_rows(&d.join(name));
        assert!(comment.starts_with('#') && comment.ends_with("schema_version=1"), "{comment}");
        h
    };

    assert_eq!(code(&confnodal(&["forward", "--preset", "cosine", "--nmax", "3", "--cross-check"], d)), 0);
    for name in ["spectrum.csv", "shots.csv", "crosscheck.csv"] {
        assert_eq!(header(name), schema[name], "{name}");
    }
    assert!(d.join("config.resolved.toml").exists());

    assert_eq!(code(&confnodal(&["selftest"], d)), 0);
    assert_eq!(header("selftest.csv"), schema["selftest.csv"]);

    let o = confnodal(&["roundtrip", "--alpha", "1", "--n-use", "16"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(header("reconstruction.csv"), schema["reconstruction.csv"]);
    let nodes = json(&d.join("nodes.json"));
    assert_eq!(keys(&nodes), schema["nodes.json"]);
    assert_eq!(nodes["schema_version"], 1);
    let diag = json(&d.join("diagnostics.json"));
    assert_eq!(keys(&diag), schema["diagnostics.json"]);
    assert_eq!(keys(&diag["diagnostics"]), schema["diagnostics.json#diagnostics"]);
    let report = json(&d.join("roundtrip_report.json"));
    assert_eq!(keys(&report), schema["roundtrip_report.json"]);
    assert_eq!(keys(&report["sweep"][0]), schema["roundtrip_report.json#sweep"]);
    assert_eq!(report["pass"], true);
}

#[test]
fn invert_reads_forward_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = confnodal(&["nodes", "--alpha", "0.75", "--nmax", "64"], &d.join("fwd"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let nodes = d.join("fwd/nodes.json");
    let o = confnodal(
        &["invert", "--alpha", "0.75", "--n-use", "32", "--nodes", nodes.to_str().unwrap()],
        &d.join("inv"),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let diag = json(&d.join("inv/diagnostics.json"));
    assert_eq!(diag["status"], "ok");
    let reference = &diag["reference"];
    assert!(reference["p_error"].as_f64().unwrap() < 0.10);
    assert!(reference["q_error"].as_f64().unwrap() < 0.15);
    assert!(reference["mean_q_error"].as_f64().unwrap() < 0.15);

    // the same nodes as n,j,x CSV
    let set = json(&nodes);
    let mut csv = String::from("# nodes schema_version=1\nn,j,x\n");
    for e in set["entries"].as_array().unwrap() {
        for (j, x) in e["nodes"].as_array().unwrap().iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", e["n"], j + 1, x));
        }
    }
    let path = write(d, "nodes.csv", &csv);
    let o = confnodal(
        &["invert", "--alpha", "0.75", "--n-use", "32", "--nodes", path.to_str().unwrap()],
        &d.join("inv_csv"),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(d.join("inv/reconstruction.csv")).unwrap(),
        fs::read(d.join("inv_csv/reconstruction.csv")).unwrap()
    );
}

#[test]
fn constraint_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "const.toml", "alpha = 0.5\n[potential]\np = { constant = 0.3 }\n");
    let o = confnodal(&["spectrum", "--config", cfg.to_str().unwrap()], &d.join("a"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("zero-mean"), "{}", stderr(&o));

    // p ≡ 0 without the calibration override
    let cfg = write(d, "flat.toml", "alpha = 0.5\n[potential]\nq = { constant = 1.0 }\n");
    let o = confnodal(&["spectrum", "--config", cfg.to_str().unwrap()], &d.join("b"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("constant"), "{}", stderr(&o));

    assert_eq!(code(&confnodal(&["nodes", "--alpha", "0.5", "--nmax", "40"], &d.join("n"))), 0);
    let nodes = d.join("n/nodes.json");
    let nodes = nodes.to_str().unwrap();

    let o = confnodal(&["invert", "--alpha", "1", "--n-use", "16", "--nodes", nodes], &d.join("c"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));

    let o = confnodal(&["invert", "--alpha", "0.5", "--n-use", "30", "--nodes", nodes], &d.join("e"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n = 60"), "{}", stderr(&o));
}

#[test]
fn degenerate_step4_exits_2_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&confnodal(&["nodes", "--preset", "zero", "--nmax", "32"], &d.join("n"))), 0);
    let nodes = d.join("n/nodes.json");
    let o = confnodal(
        &["invert", "--preset", "zero", "--n-use", "16", "--nodes", nodes.to_str().unwrap()],
        &d.join("inv"),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("step-4 denominator"), "{}", stderr(&o));
    let diag = json(&d.join("inv/diagnostics.json"));
    assert!(diag["status"].as_str().unwrap().starts_with("error"));
    assert!(diag["mean_q"].is_null());
    assert!(diag["diagnostics"]["step4_error"].is_string());
    let (_, _, rows) = csv_rows(&d.join("inv/reconstruction.csv"));
    for row in rows {
        for v in &row[1..5] {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-8);
        }
        assert_eq!(row[5], "");
    }
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "bad.toml", "alpha = 0.5\n\n[spectrum]\nn_max = \"many\"\n");
    let o = confnodal(&["spectrum", "--config", cfg.to_str().unwrap()], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    assert_eq!(code(&confnodal(&["spectrum", "--alpha", "1.5"], d)), 1);
    assert_eq!(code(&confnodal(&["spectrum", "--preset", "nope"], d)), 1);
    assert_eq!(code(&confnodal(&["no-such-command"], d)), 1);

    let o = Command::new(env!("CARGO_BIN_EXE_confnodal"))
        .args(["spectrum", "--out"])
        .arg(d)
        .env("CONFNODAL_GRID", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn grid_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_confnodal"))
        .args(["spectrum", "--nmax", "3", "--refine", "--out"])
        .arg(dir.path())
        .env("CONFNODAL_GRID", "2001")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let echo = fs::read_to_string(dir.path().join("config.resolved.toml")).unwrap();
    assert!(echo.contains("grid_points = 4001"), "{echo}");
}

#[test]
fn missed_threshold_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "strict.toml", "[thresholds]\nq_error = 1e-9\n");
    let o = confnodal(&["roundtrip", "--config", cfg.to_str().unwrap(), "--n-use", "16"], dir.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("q_error"), "{}", stderr(&o));
    let report = json(&dir.path().join("roundtrip_report.json"));
    assert_eq!(report["pass"], false);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rt");
    let files = [
        "config.resolved.toml",
        "spectrum.csv",
        "nodes.json",
        "reconstruction.csv",
        "diagnostics.json",
        "roundtrip_report.json",
    ];
    let snapshot = || -> Vec<Vec<u8>> {
        let o = confnodal(&["roundtrip", "--alpha", "0.75", "--n-use", "24"], &out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        files.iter().map(|f| fs::read(out.join(f)).unwrap()).collect()
    };
    let first = snapshot();
    let second = snapshot();
    for (name, (a, b)) in files.iter().zip(first.iter().zip(&second)) {
        assert!(a == b, "{name} differs between runs");
    }
}
