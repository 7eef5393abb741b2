use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twobundle"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn tmp(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn run(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_scenario(name: &str, text: &str) -> PathBuf {
    let p = tmp(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn classical_reduction_passes() {
    let out = tmp("classical.json");
    let o = run(&scenario("classical_reduction.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["scenario"], "classical_reduction");
    assert_eq!(r["pass"], true);
    let suites = r["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 13);
    assert_eq!(suites[0]["name"], "peiffer");
    assert!(suites.iter().all(|s| s["pass"] == true));
    assert!(suites.iter().all(|s| s["residuals"].is_object() && s["details"].is_array()));
}

#[test]
fn reports_are_reproducible() {
    let (a, b) = (tmp("repro_a.json"), tmp("repro_b.json"));
    let args = ["--suite", "lift_identities", "--suite", "invariance"];
    run(&scenario("classical_reduction.json"), &a, &args);
    run(&scenario("classical_reduction.json"), &b, &args);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let r = report(&a);
    let names: Vec<&str> = r["suites"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["lift_identities", "invariance"]);
}

#[test]
fn seed_override_changes_samples() {
    let (a, b) = (tmp("seed_a.json"), tmp("seed_b.json"));
    run(&scenario("classical_reduction.json"), &a, &["--suite", "torsor"]);
    run(&scenario("classical_reduction.json"), &b, &["--suite", "torsor", "--seed", "99"]);
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(rb["pass"], true);
    assert_ne!(ra["suites"][0]["residuals"], rb["suites"][0]["residuals"]);
}

#[test]
fn residuals_carry_seventeen_digits() {
    let out = tmp("digits.json");
    run(&scenario("classical_reduction.json"), &out, &["--suite", "classical_oracle"]);
    let text = std::fs::read_to_string(&out).unwrap();
    let line = text.lines().find(|l| l.contains("relative_error")).unwrap();
    let number = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = number.split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{number}");
}

#[test]
fn corrupted_peiffer_fails_with_label() {
    let out = tmp("corrupt.json");
    let o = run(&scenario("corrupt_peiffer.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["pass"], false);
    let s = &r["suites"][0];
    assert_eq!(s["pass"], false);
    assert!(s["residuals"]["peiffer_1"].as_f64().unwrap() > 0.1);
    assert!(s["details"].as_array().unwrap().iter().any(|d| d.as_str().unwrap().starts_with("peiffer_1")));
}

#[test]
fn associator_counterexample_fails_at_j() {
    let out = tmp("assoc.json");
    let o = run(&scenario("associator_cm2.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    let details = r["suites"][0]["details"].as_array().unwrap();
    assert_eq!(details.len(), 1, "{details:?}");
    assert!(details[0].as_str().unwrap().starts_with("(j)"));
}

#[test]
fn coherent_cm4_passes() {
    let out = tmp("cm4.json");
    let o = run(&scenario("cm4_coherent.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn cm1_scenario_passes_on_a_coarser_grid() {
    let out = tmp("cm1.json");
    let suites = ["classify", "grothendieck", "invariance", "functor", "naturality", "pullback", "vb"];
    let args: Vec<&str> = suites.iter().flat_map(|s| ["--suite", *s]).chain(["--grid", "64"]).collect();
    let o = run(&scenario("cm1_constant.json"), &out, &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_registry_name_is_a_build_error() {
    let text = std::fs::read_to_string(scenario("corrupt_peiffer.json")).unwrap().replace("corrupt:CM1", "CM9");
    let p = write_scenario("missing_name.json", &text);
    let o = run(&p, &tmp("missing_name_report.json"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CM9"));

    let text = std::fs::read_to_string(scenario("corrupt_peiffer.json")).unwrap().replace("\"peiffer\"", "\"no_such_suite\"");
    let p = write_scenario("missing_suite.json", &text);
    assert_eq!(run(&p, &tmp("r.json"), &[]).status.code(), Some(3));
}

#[test]
fn suite_needing_an_absent_section_is_a_build_error() {
    let text = std::fs::read_to_string(scenario("corrupt_peiffer.json")).unwrap().replace("\"peiffer\"", "\"torsor\"");
    let p = write_scenario("no_bundle.json", &text);
    assert_eq!(run(&p, &tmp("r2.json"), &[]).status.code(), Some(3));
}

#[test]
fn schema_errors_exit_two() {
    let base = std::fs::read_to_string(scenario("corrupt_peiffer.json")).unwrap();
    let unknown = write_scenario("unknown_key.json", &base.replace("\"seed\": 1,", "\"seed\": 1, \"colour\": 2,"));
    assert_eq!(run(&unknown, &tmp("r3.json"), &[]).status.code(), Some(2));
    let version = write_scenario("version.json", &base.replace("\"schema\": 1", "\"schema\": 2"));
    assert_eq!(run(&version, &tmp("r4.json"), &[]).status.code(), Some(2));
    let garbage = write_scenario("garbage.json", "{ not json");
    assert_eq!(run(&garbage, &tmp("r5.json"), &[]).status.code(), Some(2));
    assert_eq!(run(&tmp("does_not_exist.json"), &tmp("r6.json"), &[]).status.code(), Some(2));
}

#[test]
fn list_builtins_matches_golden() {
    let o = bin().arg("list-builtins").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let golden = include_str!("golden/list_builtins.txt");
    assert_eq!(text, golden);
    for name in ["CM1", "CM2", "CM3", "CM4", "pair", "discrete", "action:SO2"] {
        assert!(text.contains(name), "{name}");
    }
}
