use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kappa_core::spectral_solver::read_grid_file;
use serde_json::Value;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(format!("{name}.json"))
}

fn kappa(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kappa"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn run(args: &[&str], out: &Path) -> i32 {
    kappa(args, out).status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a variant of a bundled spec with `edit` applied.
fn variant(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut doc = read_json(&spec(name));
    edit(&mut doc);
    let path = dir.join(format!("{name}.variant.json"));
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    path
}

#[test]
fn check_symbol_heat() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["check-symbol", "--spec", spec("heat").to_str().unwrap(), "--format", "json"], dir.path());
    assert_eq!(code, 0);
    let doc = read_json(&dir.path().join("heat.check_symbol.json"));
    let lambda = doc["result"]["ellipticity"]["lambda"].as_f64().unwrap();
    assert!((lambda - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
    assert_eq!(doc["result"]["homogeneity"]["passed"], true);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    // echo is fully defaulted
    assert!(doc["spec"]["run"]["seed"].is_u64());
    assert!(doc["spec"]["run"]["solve"]["tol"].is_f64());
}

#[test]
fn degenerate_symbol_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["check-symbol", "--spec", spec("degenerate").to_str().unwrap()], dir.path()), 2);
}

#[test]
fn input_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"name\": ").unwrap();
    assert_eq!(run(&["check-symbol", "--spec", bad.to_str().unwrap()], dir.path()), 1);
    let unknown = variant(dir.path(), "heat", |d| {
        d["grid"]["spacing"] = Value::from(1.0);
    });
    assert_eq!(run(&["solve", "--spec", unknown.to_str().unwrap()], dir.path()), 1);
    assert_eq!(run(&["solve"], dir.path()), 1);
    assert_eq!(run(&["verify", "--which", "nothing", "--spec", spec("heat").to_str().unwrap()], dir.path()), 1);
    assert_eq!(run(&["--help"], dir.path()), 0);
}

#[test]
fn decompose_unit_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["decompose", "--spec", spec("mihlin_one").to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("mihlin_one.mihlin.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("gamma,j,R,shell_integral,scaled_value"));
    // (2^|kappa| - 1) V1 with V1 = 8/3
    for line in lines {
        let scaled: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((scaled - 56.0 / 3.0).abs() < 0.01 * 56.0 / 3.0, "{line}");
    }
}

#[test]
fn decompose_gamma_beyond_order_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec("heat");
    assert_eq!(run(&["decompose", "--spec", s.to_str().unwrap(), "--gamma", "5,0"], dir.path()), 1);
    assert_eq!(run(&["decompose", "--spec", s.to_str().unwrap(), "--gamma", "1,x"], dir.path()), 1);
}

#[test]
fn decompose_heat_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        &["decompose", "--spec", spec("heat").to_str().unwrap(), "--gamma", "0,0", "--format", "json"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let doc = read_json(&dir.path().join("heat.mihlin.json"));
    let shells = doc["result"][0]["shells"].as_array().unwrap();
    let vals: Vec<f64> = shells.iter().map(|r| r["scaled_value"].as_f64().unwrap()).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!((hi - lo) / hi <= 0.05);
}

#[test]
fn solve_manufactured_heat() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["solve", "--spec", spec("heat").to_str().unwrap()], dir.path()), 0);
    let m = read_json(&dir.path().join("heat.solve.json"));
    assert!(m["result"]["residual"].as_f64().unwrap() <= 1e-9);
    assert!(m["result"]["recovery_error"].as_f64().unwrap() <= 1e-9);
    let fields = m["result"]["fields"].as_array().unwrap();
    assert_eq!(fields.len(), 3);
    for f in fields {
        let g = read_grid_file(&dir.path().join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(g.spec().sizes(), &[64, 64]);
        assert!((g.sup_norm() - f["sup_norm"].as_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn solve_zero_rhs_gives_zero_fields() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["solve", "--spec", spec("heat_zero").to_str().unwrap()], dir.path()), 0);
    for tag in ["u", "d2_0", "d0_1"] {
        let g = read_grid_file(&dir.path().join(format!("heat_zero.{tag}.akgf"))).unwrap();
        assert_eq!(g.sup_norm(), 0.0);
    }
}

#[test]
fn oversized_oscillation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["solve", "--spec", spec("divergent").to_str().unwrap()], dir.path()), 3);
}

#[test]
fn residual_tolerance_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let s = variant(dir.path(), "heat", |d| {
        d["run"]["solve"] = serde_json::json!({"residual_tol": 0.0});
    });
    assert_eq!(run(&["solve", "--spec", s.to_str().unwrap()], dir.path()), 4);
}

#[test]
fn verify_global_over_decades() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        &["verify", "--which", "global", "--spec", spec("heat_global").to_str().unwrap(), "--format", "json"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let doc = read_json(&dir.path().join("heat_global.verify_global.json"));
    let reports = doc["result"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 9);
    let rs: Vec<f64> = reports.iter().map(|r| r["r"].as_f64().unwrap()).collect();
    assert!((rs[8] / rs[0] - 100.0).abs() < 1e-9);
    for r in reports {
        for key in ["operator", "grid", "r", "lhs", "rhs_terms", "empirical_C", "flags"] {
            assert!(r.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn verify_variable_on_constant_spec_has_zero_coefficient_terms() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        &["verify", "--which", "variable", "--spec", spec("heat_global").to_str().unwrap(), "--format", "json"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let doc = read_json(&dir.path().join("heat_global.verify_variable.json"));
    for r in doc["result"]["reports"].as_array().unwrap() {
        assert_eq!(r["rhs_terms"]["coef_small"].as_f64(), Some(0.0));
        assert_eq!(r["rhs_terms"]["coef_tail"].as_f64(), Some(0.0));
    }
}

#[test]
fn campanato_with_two_radii_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let s = variant(dir.path(), "heat_campanato", |d| {
        d["run"]["verify"]["campanato_radii"] = serde_json::json!({"values": [0.2, 0.4]});
    });
    assert_eq!(run(&["verify", "--which", "campanato", "--spec", s.to_str().unwrap()], dir.path()), 1);
}

#[test]
fn csv_outputs_carry_version_and_spec() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["verify", "--which", "sobolev", "--spec", spec("heat").to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("heat.verify_sobolev.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# kappa {}", env!("CARGO_PKG_VERSION")));
    let echo = lines.next().unwrap().strip_prefix("# spec: ").unwrap();
    let v: Value = serde_json::from_str(echo).unwrap();
    assert_eq!(v["name"], "heat");
    assert!(lines.next().unwrap().starts_with("kind,operator,grid,r,lhs"));
}

#[test]
fn overrides_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        &[
            "check-symbol",
            "--spec",
            spec("heat").to_str().unwrap(),
            "--seed",
            "9",
            "--resolution-override",
            "300",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(code, 0);
    let doc = read_json(&dir.path().join("heat.check_symbol.json"));
    assert_eq!(doc["spec"]["run"]["seed"], 9);
    assert_eq!(doc["spec"]["run"]["check_symbol"]["resolution"], 300);
    assert_eq!(doc["result"]["ellipticity"]["seed"], 9);
}
