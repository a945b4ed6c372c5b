use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn magshell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magshell")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = magshell(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn validate(schema: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(schema);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn exit_codes() {
    assert_eq!(magshell(&["orbits", "--energy", "0.375"]).status.code(), Some(0));
    assert_eq!(magshell(&["orbits", "--system", "nosuch"]).status.code(), Some(2));
    assert_eq!(magshell(&["bogus"]).status.code(), Some(2));
    assert_eq!(magshell(&["orbits", "--energy", "-1"]).status.code(), Some(2));
    // k = 1/4 is NotStable on PSL(2,R)
    assert_eq!(magshell(&["stability", "--system", "psl2", "--energy", "0.25"]).status.code(), Some(3));
}

#[test]
fn empty_orbit_set_is_header_only_csv() {
    let out = magshell(&["orbits", "--energy", "0.6", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("system,k,C,"));
}

#[test]
fn orbit_output_matches_schema() {
    let v = json(&["orbits", "--system", "psl2", "--energy", "0.1875", "--l-max", "2"]);
    validate("orbit.schema.json", &v);
    assert_eq!(v[0]["C"], -0.25);
    let v = json(&["orbits", "--energy", "0.375"]);
    validate("orbit.schema.json", &v);
}

#[test]
fn mane_output_round_trips_through_schema() {
    let v = json(&["mane", "--system", "heisenberg", "--method", "contact-obstruction"]);
    validate("mane.schema.json", &v);
    let est: magshell::mane::ManeEstimate = serde_json::from_value(v.clone()).unwrap();
    assert_eq!(serde_json::to_value(&est).unwrap(), v);
    let torus = json(&["mane", "--system", "torus"]);
    validate("mane.schema.json", &torus);
    assert_eq!(torus["unbounded"], true);
}

#[test]
fn contact_stability_rabinowitz_match_schemas() {
    let c = json(&["contact", "--system", "psl2", "--energy", "0.32"]);
    validate("contact.schema.json", &c);
    assert_eq!(c["verdict"], "not_contact");
    validate("stability.schema.json", &json(&["stability", "--energy", "0.3", "--grid", "64"]));
    let r = json(&["rabinowitz", "--system", "torus", "--points", "32", "--seeds", "2"]);
    validate("critical_point.schema.json", &r);
    assert!((r[0]["eta"].as_f64().unwrap() - std::f64::consts::TAU).abs() < 1e-6);
}

#[test]
fn output_is_deterministic() {
    let args = ["sweep", "--system", "psl2", "--what", "stability", "--k-min", "0.05", "--k-max", "0.45", "--steps", "8"];
    let a = magshell(&args);
    let b = magshell(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn entropy_sweep_flips_at_quarter() {
    let v = json(&["sweep", "--system", "psl2", "--what", "entropy", "--k-min", "0.2", "--k-max", "0.3", "--steps", "20", "--format", "json"]);
    for row in v.as_array().unwrap() {
        let k = row["k"].as_f64().unwrap();
        assert_eq!(row["holds"].as_bool().unwrap(), k <= 0.25, "k = {k}");
    }
}

#[test]
fn run_config_matches_direct_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("orbits.csv");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("command = \"orbits\"\nsystem = \"psl2\"\nenergy = 0.1875\nformat = \"csv\"\nout = {:?}\n", out)).unwrap();
    let status = magshell(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let direct = magshell(&["orbits", "--system", "psl2", "--energy", "0.1875", "--format", "csv"]);
    assert_eq!(std::fs::read(&out).unwrap(), direct.stdout);

    std::fs::write(&cfg, "command = \"orbits\"\nenergy_level = 0.3\n").unwrap();
    assert_eq!(magshell(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn selftests_pass() {
    for cmd in ["flow", "orbits", "mane", "stability", "contact", "lyapunov", "displace", "rabinowitz"] {
        let out = magshell(&[cmd, "--selftest"]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success() && !text.contains("FAIL"), "{cmd}: {text}");
    }
}

#[test]
fn exact_flow_agrees_with_rk4() {
    let base = ["flow", "--q=0.1,0.2,0.3", "--p=0.4,-0.2,0.3", "--t-max", "2", "--stride", "2000"];
    let rk4 = json(&[&base[..], &["--method", "rk4"]].concat());
    let exact = json(&[&base[..], &["--method", "exact"]].concat());
    let last = |v: &Value| v["states"].as_array().unwrap().last().unwrap().clone();
    let (a, b) = (last(&rk4), last(&exact));
    for key in ["q", "p"] {
        for (x, y) in a[key].as_array().unwrap().iter().zip(b[key].as_array().unwrap()) {
            assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-9);
        }
    }
}
