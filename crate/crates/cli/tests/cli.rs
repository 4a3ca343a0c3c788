use std::process::{Command, Output};

use serde_json::Value;

fn segretool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segretool"))
        .args(args)
        .env_remove("SEGRETOOL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

/// Writes the catalog entry's surface and first germ to files.
fn export(name: &str, dir: &tempfile::TempDir) -> (String, String) {
    let out = segretool(&["catalog", name]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let surface = dir.path().join("surface.json");
    let germ = dir.path().join("germ.json");
    std::fs::write(&surface, v["surface"].to_string()).unwrap();
    std::fs::write(&germ, v["germs"][0].to_string()).unwrap();
    (surface.display().to_string(), germ.display().to_string())
}

#[test]
fn levi_on_an_exported_surface_file() {
    let dir = tempfile::tempdir().unwrap();
    let (surface, _) = export("ex62", &dir);
    let out = segretool(&["levi", "--surface", &surface, "--point", "0,0,0.1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["label"], "(2,0)");
    let out = segretool(&["levi", "--surface", &surface, "--point", "0,0,-0.1"]);
    assert_eq!(stdout_json(&out)["label"], "(1,1)");
}

#[test]
fn mlog_monodromy_has_a_unipotent_block_and_is_byte_stable() {
    let a = segretool(&["monodromy", "--catalog", "mlog"]);
    assert_eq!(a.status.code(), Some(0));
    let v = stdout_json(&a);
    let blocks = v["jordan"]["blocks"].as_array().unwrap();
    assert!(blocks.iter().any(|b| b["size"] == 2));
    assert!(v["finite_order"].is_null());
    let b = segretool(&["monodromy", "--catalog", "mlog"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn file_inputs_match_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let (surface, germ) = export("malpha(1/3)", &dir);
    let from_files = segretool(&["monodromy", "--surface", &surface, "--germ", &germ]);
    let from_catalog = segretool(&["monodromy", "--catalog", "malpha(1/3)"]);
    assert_eq!(from_files.status.code(), Some(0));
    assert_eq!(stdout_json(&from_files)["finite_order"], 3);
    assert_eq!(stdout_json(&from_files)["jordan"], stdout_json(&from_catalog)["jordan"]);
}

#[test]
fn verify_km2_passes() {
    let out = segretool(&["verify", "--catalog", "km(2)"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 8);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["bogus"],
        vec!["levi", "--catalog", "mlog"],
        vec!["levi", "--catalog", "mlog", "--point", "0,1,2"],
        vec!["levi", "--catalog", "mlog", "--point", "0,1x"],
        vec!["levi", "--catalog", "nope", "--point", "0,1"],
        vec!["levi", "--catalog", "mlog", "--point", "0,1", "--tol", "nope=1"],
        vec!["levi", "--catalog", "mlog", "--point", "0,1", "--tol", "scalar"],
        vec!["monodromy", "--surface", "/nonexistent.json"],
        vec!["continue", "--catalog", "mlog"],
        vec!["verify"],
    ] {
        let out = segretool(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn numerical_failures_exit_1() {
    // (0, w) with w != 1 is not reachable from (0, 1) in two steps.
    let out = segretool(&["chain", "--catalog", "mlog", "--point", "0,1", "--target", "0,0.5", "--max-depth", "2"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let out = segretool(&["levi", "--catalog", "mlog", "--point", "0.2,0"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn seed_environment_overrides_flag() {
    let args = ["cloud", "--catalog", "mlog", "--point", "0.1,0.8+0.1i", "--depth", "1", "--count", "5", "--csv"];
    let run = |seed: &str, env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_segretool"));
        c.args(args).args(["--seed", seed]).env_remove("SEGRETOOL_SEED");
        if let Some(e) = env {
            c.env("SEGRETOOL_SEED", e);
        }
        c.output().unwrap().stdout
    };
    assert_eq!(run("9", Some("5")), run("5", None));
    assert_ne!(run("9", None), run("5", None));
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    let out = segretool(&[
        "chain", "--catalog", "mlog", "--point", "0,1", "--target", "0.3-0.2i,0.4+0.7i", "--csv", "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().count() >= 3, "{text}");
}

#[test]
fn catalog_lists_and_exports() {
    let out = segretool(&["catalog"]);
    let names = String::from_utf8(out.stdout).unwrap();
    assert!(names.lines().any(|l| l == "km(1)"));
    let v = stdout_json(&segretool(&["catalog", "--catalog", "mlog"]));
    assert_eq!(v["expected"]["finite_order"]["basis"], "published");
}

#[test]
fn kroot_of_malpha_half_is_single_valued() {
    let dir = tempfile::tempdir().unwrap();
    let out = segretool(&["kroot", "--catalog", "malpha(0.5)", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let surface = dir.path().join("root.json");
    let germ = dir.path().join("root_germ.json");
    std::fs::write(&surface, v["surface"].to_string()).unwrap();
    std::fs::write(&germ, v["germ"].to_string()).unwrap();
    let m = stdout_json(&segretool(&["monodromy", "--surface", surface.to_str().unwrap(), "--germ", germ.to_str().unwrap()]));
    assert_eq!(m["finite_order"], 1);
}

#[test]
fn continue_segre_steps_reports_tabulation() {
    let out = segretool(&["continue", "--catalog", "malpha(0.5)", "--target", "0.1,0.9", "--mode", "segre-steps"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "tabulated");
    assert!(v["table_error"].as_f64().unwrap() < 1e-8);
    assert!(!v["steps"].as_array().unwrap().is_empty());
}
