use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ppas_core::linsys::Engine;
use ppas_core::schemes::ZeroScheme;
use ppas_core::surface::{SurfaceConfig, TorusPoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn ppas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppas")).args(args).env_remove("PPAS_CONFIG").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ppas-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_scheme(name: &str, pts: &[TorusPoint]) -> PathBuf {
    let p = scratch(name);
    std::fs::write(&p, ZeroScheme::reduced(pts).unwrap().to_json()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn pair() -> (TorusPoint, TorusPoint) {
    (TorusPoint::from_coords([0.1, 0.2, 0.3, 0.4]), TorusPoint::from_coords([0.7, 0.1, 0.25, 0.6]))
}

#[test]
fn default_config_round_trips() {
    let path = scratch("cfg.json");
    let o = ppas(&["gen-config", s(&path)]);
    assert_eq!(code(&o), 0);
    let cfg = SurfaceConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(cfg, SurfaceConfig::default());
}

#[test]
fn bad_period_matrices_are_input_errors() {
    let mut doc: Value = serde_json::from_str(&SurfaceConfig::default().to_json()).unwrap();
    doc["tau"][0][1] = serde_json::json!([0.5, 0.2]);
    let path = scratch("asym.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let (a, b) = pair();
    let q = write_scheme("q-asym.json", &[a, b]);
    assert_eq!(code(&ppas(&["--config", s(&path), "h0", "--scheme", s(&q)])), 2);

    let mut doc: Value = serde_json::from_str(&SurfaceConfig::default().to_json()).unwrap();
    doc["tau"][1][1] = serde_json::json!([0.0, -1.0]);
    let path = scratch("indef.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    assert_eq!(code(&ppas(&["--config", s(&path), "h0", "--scheme", s(&q)])), 2);
}

#[test]
fn pair_jumps_once_at_minus_sum() {
    let (a, b) = pair();
    let q = write_scheme("q.json", &[a, b]);
    let o = ppas(&["jump", "--scheme", s(&q)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let locus = &v["outputs"]["locus"];
    assert_eq!(locus["kind"], "finite");
    assert_eq!(locus["points"].as_array().unwrap().len(), 1);
    let got: TorusPoint = serde_json::from_value(locus["points"][0]["point"].clone()).unwrap();
    let cfg = SurfaceConfig::default();
    assert!(ppas_core::surface::torus_distance(&got, &-(a + b), &cfg.tau) < 1e-5);
    assert!(v.get("timings").is_none());
}

#[test]
fn collinear_triple_gives_curve() {
    let e = Engine::new(&SurfaceConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = TorusPoint::random(&mut rng);
    let pts: Vec<TorusPoint> = (0..3).map(|_| e.random_point_on_line(&v, &mut rng)).collect();
    let y = write_scheme("y.json", &pts);
    let o = ppas(&["jump", "--scheme", s(&y)]);
    assert_eq!(code(&o), 0);
    let locus = &stdout_json(&o)["outputs"]["locus"];
    assert_eq!(locus["kind"], "curve");
    assert!(locus["curve_samples"].as_array().unwrap().len() >= 32);

    let o = ppas(&["collinear", "--scheme", s(&y)]);
    let lines = stdout_json(&o)["outputs"]["lines"].as_array().unwrap().clone();
    assert_eq!(lines.len(), 1);
}

#[test]
fn malformed_scheme_is_input_error() {
    let p = scratch("bad.json");
    std::fs::write(&p, "{ not json").unwrap();
    let o = ppas(&["jump", "--scheme", s(&p)]);
    assert_eq!(code(&o), 2);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["exit_code"], 2);
    assert_eq!(code(&ppas(&["jump", "--scheme", "/nonexistent/x.json"])), 2);
}

#[test]
fn usage_errors_exit_three() {
    assert_eq!(code(&ppas(&["verify", "--suite", "no-such-suite"])), 3);
    assert_eq!(code(&ppas(&["frobnicate"])), 3);
    assert_eq!(code(&ppas(&["jump"])), 3);
    assert_eq!(code(&ppas(&["--help"])), 0);
    assert_eq!(code(&ppas(&["--version"])), 0);
}

#[test]
fn ledger_suite_and_export() {
    let o = ppas(&["verify", "--suite", "ledger-balance"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["summary"]["passed"], true);
    assert_eq!(v["outputs"]["suites"][0]["suite"], "ledger-balance");
    let o = ppas(&["ledger"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["outputs"]["balanced"], true);
}

#[test]
fn point_suite_passes() {
    let o = ppas(&["verify", "--suite", "s2-point", "--trials", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = &stdout_json(&o)["outputs"]["suites"][0];
    assert_eq!(r["passes"], 20);
    assert_eq!(r["seeds"].as_array().unwrap().len(), 20);
}

#[test]
fn grid_slices() {
    let p = TorusPoint::from_coords([0.1, 0.2, 0.3, 0.4]);
    let q = -TorusPoint::from_coords([0.25, 0.5, 0.3, 0.7]) - p;
    let qf = write_scheme("grid-q.json", &[p, q]);
    let out = scratch("slice.csv");
    let o = ppas(&["grid", "--scheme", s(&qf), "--slice", "c3=0.3,c4=0.7", "--res", "8", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("c1,c2,log10_smin"));
    let min = lines.map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
    assert!(min < -6.0, "{min}");

    let pf = write_scheme("grid-p.json", &[p]);
    let o = ppas(&["grid", "--scheme", s(&pf), "--slice", "c3=0.3,c4=0.7", "--res", "8"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let min = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
    assert!(min > -3.0, "{min}");
    assert_eq!(code(&ppas(&["grid", "--scheme", s(&pf), "--res", "0"])), 2);
}

#[test]
fn reports_are_reproducible() {
    let (a, b) = pair();
    let e = Engine::new(&SurfaceConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = e.random_point_on_line(&TorusPoint::random(&mut rng), &mut rng);
    let y = write_scheme("repro.json", &[a, b, c]);
    let first = ppas(&["jump", "--scheme", s(&y)]);
    let second = ppas(&["jump", "--scheme", s(&y)]);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_from_environment_and_small_commands() {
    let cfg = scratch("env-cfg.json");
    std::fs::write(&cfg, SurfaceConfig::default().with_seed(7).to_json()).unwrap();
    let (a, _) = pair();
    let one = write_scheme("one.json", &[a]);
    let o = Command::new(env!("CARGO_BIN_EXE_ppas"))
        .args(["h0", "--scheme", s(&one), "--twist", "0.3,0.1,0.7,0.2"])
        .env("PPAS_CONFIG", &cfg)
        .output()
        .unwrap();
    let v = stdout_json(&o);
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["outputs"]["h0"], 3);

    let o = ppas(&["singular", "--kummer", "0.13,0.52,0.71,0.29"]);
    assert_eq!(code(&o), 0);
    let pts = stdout_json(&o)["outputs"]["singular_points"].as_array().unwrap().clone();
    assert_eq!(pts.len(), 2);
    assert!(pts.iter().all(|p| p["type"] == "node"));
}
