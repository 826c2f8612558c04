use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqg")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_writes_the_analytic_solution() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "sol.json");
    let trace = path(&dir, "trace.csv");
    let o = cqg(&["solve", &fixture("scalar_qp.json"), "-o", &out, "--trace", &trace]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = json(&out);
    assert_eq!(sol["status"], "converged");
    assert!((sol["x"][0].as_f64().unwrap() - 1.0).abs() <= 1e-5);
    assert_eq!(sol["config"]["eps"], 1e-6);
    let header = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(header.lines().next().unwrap(), "iter,phase,mu,residual,dv_inf,alpha");
}

#[test]
fn fbs_and_ipm_agree_on_a_fixture() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "ipm.json"), path(&dir, "fbs.json"));
    let f = fixture("potential.json");
    assert_eq!(code(&cqg(&["solve", &f, "-o", &a])), 0);
    assert_eq!(code(&cqg(&["solve", &f, "--method", "fbs", "--reference", "-o", &b])), 0);
    let (xa, xb) = (json(&a)["x"].clone(), json(&b)["x"].clone());
    for i in 0..2 {
        let (u, v) = (xa[i].as_f64().unwrap(), xb[i].as_f64().unwrap());
        assert!((u - v).abs() <= 1e-4 * u.abs().max(1.0), "{u} vs {v}");
    }
}

#[test]
fn malformed_triplet_is_an_input_error_naming_the_entry() {
    let dir = TempDir::new().unwrap();
    let mut p = json(fixture("scalar_qp.json"));
    p["A"] = serde_json::json!([[0, 0, 1.0], [3, 0, 2.0]]);
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, p.to_string()).unwrap();
    let o = cqg(&["solve", &bad]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("entry 1 of A"), "{err}");
}

#[test]
fn missing_file_is_an_input_error() {
    assert_eq!(code(&cqg(&["check", "/nonexistent/problem.json"])), 2);
}

#[test]
fn generate_is_deterministic_in_the_seed() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (path(&dir, "a.json"), path(&dir, "b.json"), path(&dir, "c.json"));
    for (out, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let o = cqg(&["generate", "market", "--players", "3", "--locations", "4", "--seed", seed, "-o", out]);
        assert_eq!(code(&o), 0);
    }
    let read = |p: &str| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn generated_ev_game_has_one_block_per_vehicle() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "ev.json");
    assert_eq!(code(&cqg(&["generate", "ev", "--players", "4", "--horizon", "6", "-o", &out])), 0);
    let p = json(&out);
    assert_eq!(p["block_dims"], serde_json::json!([6, 6, 6, 6]));
    assert_eq!(p["metadata"]["kind"], "ev");
}

#[test]
fn traffic_rejects_size_flags() {
    let o = cqg(&["generate", "traffic", "--players", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn check_reports_potential_structure() {
    let o = cqg(&["check", &fixture("potential.json")]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("potential game: yes"), "{text}");
    let sigma = |t: &str| {
        t.lines()
            .find(|l| l.starts_with("monotonicity constant"))
            .unwrap()
            .rsplit(' ')
            .next()
            .unwrap()
            .parse::<f64>()
            .unwrap()
    };

    // A skew-symmetric perturbation breaks the potential structure but leaves
    // the symmetric part, and hence σ, unchanged.
    let dir = TempDir::new().unwrap();
    let mut p = json(fixture("potential.json"));
    p["W"] = serde_json::json!([[0, 0, 2.0], [1, 0, 1.0], [1, 1, 1.0]]);
    let skew = path(&dir, "skew.json");
    std::fs::write(&skew, p.to_string()).unwrap();
    let o2 = cqg(&["check", &skew]);
    assert_eq!(code(&o2), 0);
    let text2 = stdout(&o2);
    assert!(text2.contains("potential game: no"), "{text2}");
    assert!((sigma(&text) - sigma(&text2)).abs() <= 1e-6);
}

#[test]
fn bench_writes_one_row_per_solver() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "bench.csv");
    let summary = path(&dir, "summary.csv");
    let o = cqg(&[
        "bench", "--game", "market", "--players", "3", "--size", "3", "--k-range", "0.1", "--reps", "1", "-o", &out,
        "--summary", &summary,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "{table}");
    assert!(lines[0].starts_with("game,N,k,sigma,solver,rep,iterations"));
    assert!(lines[1].contains(",ipm,") && lines[2].contains(",fbs,"));
    assert!(std::fs::read_to_string(&summary).unwrap().lines().count() >= 3);
}
