use std::path::Path;
use std::process::{Command, Output};

use bgrdmft::{build_domain, enumerate_sector, DomainPolytope};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgrdmft")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    let out = run(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["sector", "--d", "3", "--N", "3", "--P", "5"]).status.code(), Some(2));
    assert_eq!(run(&["sector", "--d", "3"]).status.code(), Some(2));
    assert_eq!(run(&["functional", "--d", "3", "--N", "3", "--method", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["force", "--d", "3", "--N", "6", "--facet-point", "1,2,3"]).status.code(), Some(2));
    assert_eq!(run(&["sector", "--d", "3", "--N", "3"]).status.code(), Some(0));
}

#[test]
fn sector_listing_to_stdout() {
    let out = run(&["sector", "--d", "3", "--N", "3", "--P", "0"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dim"], 4);
    assert_eq!(v["states"].as_array().unwrap().len(), 4);
    for (p, dim) in [(1, 3), (2, 3)] {
        let out = run(&["sector", "--d", "3", "--N", "3", "--P", &p.to_string()]);
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["dim"], dim);
    }
}

#[test]
fn domain_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["domain", "--d", "3", "--N", "3", "--P", "1"]);
    let text = std::fs::read_to_string(dir.path().join("domain.json")).unwrap();
    let back = DomainPolytope::from_json(&text).unwrap();
    let fresh: DomainPolytope = build_domain(&enumerate_sector(3, 3, 1).unwrap()).unwrap();
    assert_eq!(back.num_facets(), 3);
    assert_eq!(back.t(), fresh.t());
    let csv = std::fs::read_to_string(dir.path().join("facets.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "n0,n1,n2,class,D0,D1,D2");
    assert_eq!(body.len(), 4);
    assert_eq!(csv.matches("# d: ").count(), 1);
}

#[test]
fn force_report() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["force", "--d", "3", "--N", "6", "--facet-point", "0,3,3", "--eps-steps", "6"]);
    let v = json(&dir.path().join("force.json"));
    let g = v["G"].as_f64().unwrap();
    let want = -(4.0 * 2f64.powf(0.25) * 3f64.powf(0.75) / 9.0) * 30f64.sqrt();
    assert!((g - want).abs() < 1e-8, "{g} vs {want}");
    assert!(((v["g_fit"].as_f64().unwrap() - want) / want).abs() < 0.02);
    let slope = std::fs::read_to_string(dir.path().join("slope.csv")).unwrap();
    let rows: Vec<&str> = slope.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "sqrt_eps,F,F_linear");
    assert_eq!(rows.len(), 1 + 1 + 6);
}

#[test]
fn functional_grid_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["functional", "--d", "3", "--N", "3", "--P", "1", "--method", "simplex", "--grid", "4"];
    run_in(a.path(), &args);
    run_in(b.path(), &args);
    for name in ["functional.csv", "functional.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let csv = std::fs::read_to_string(a.path().join("functional.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "n0,n1,n2,F,grad_norm,method,degenerate_flag,on_facet,status");
    assert_eq!(rows.len(), 1 + 16);
    assert!(rows[1..].iter().all(|r| r.ends_with(",ok")));
}

#[test]
fn approx_zbar_spread() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), &["approx", "--study", "zbar-spread", "--grid", "30"]);
    assert!(dir.path().join("zbar_spread.csv").exists());
    let s = json(&dir.path().join("approx_summary.json"));
    assert!(s["max_error"].as_f64().unwrap() > 0.0);
}
