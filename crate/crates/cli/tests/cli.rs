//! End-to-end tests of the command-line interface: recipe outputs against
//! golden expectations, exit-code contract, and byte-level determinism.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsity-subdiff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn golden(name: &str) -> serde_json::Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    serde_json::from_str(&fs::read_to_string(path).expect("golden file")).expect("golden JSON")
}

fn temp_file(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!(
        "sparsity-subdiff-test-{}-{name}",
        std::process::id()
    ));
    p
}

#[test]
fn eval_constant_function() {
    let input = temp_file("eval.json");
    fs::write(
        &input,
        r#"{"u":{"cell_measures":[0.25,0.25,0.25,0.25],"values":[4,4,4,4]},"s":2,"p":0.5}"#,
    )
    .unwrap();
    let out = run(&["eval", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let report = stdout_json(&out);
    assert_eq!(report["value"], 2.0);
}

#[test]
fn power_recipe_matches_golden() {
    let expected = golden("ex2_7.json");
    let out = run(&["example", "ex2.7", "--alpha", "0.25", "--s", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["matches_expectation"], true);
    assert_eq!(report["is_sd"], expected["is_sd"]);
    let exp = report["quotient_exponent"].as_f64().unwrap();
    assert!((exp - expected["expected_exponent"].as_f64().unwrap()).abs() < 1e-9);
    let pre = report["quotient_prefactor"].as_f64().unwrap();
    assert!((pre - expected["expected_prefactor"].as_f64().unwrap()).abs() < 1e-9);
    // Worked constant: prefactor · 0.01^exponent.
    let q = pre * 0.01f64.powf(exp);
    assert!((q - expected["quotient_at_t_0_01"].as_f64().unwrap()).abs() < 1e-4);
}

#[test]
fn dyadic_recipe_matches_golden() {
    let expected = golden("ex2_9.json");
    let out = run(&["example", "ex2.9", "--s", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["is_sd"], expected["is_sd"]);
    assert_eq!(report["hoelder_converged"], expected["hoelder_converged"]);
    assert_eq!(
        report["quotient_bounds_hold"],
        expected["quotient_bounds_hold"]
    );
    assert_eq!(report["matches_expectation"], true);
}

#[test]
fn support_violation_recipe_matches_golden() {
    let expected = golden("lemma3_1.json");
    let out = run(&["example", "lemma3.1-falsify"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["falsified"], expected["falsified"]);
    let tail = report["inf_tail"].as_f64().unwrap();
    assert!(tail <= expected["inf_tail_upper_bound"].as_f64().unwrap() + 1e-8);
}

#[test]
fn pinned_dual_recipe_matches_golden() {
    let expected = golden("thm4_4.json");
    let out = run(&["example", "thm4.4-verify"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["membership"], expected["membership"]);
    assert_eq!(
        report["all_families_consistent"],
        expected["all_families_consistent"]
    );
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let a = run(&[
        "example", "ex2.7", "--alpha", "0.3", "--s", "4", "--seed", "7",
    ]);
    let b = run(&[
        "example", "ex2.7", "--alpha", "0.3", "--s", "4", "--seed", "7",
    ]);
    assert_eq!(a.stdout, b.stdout);

    // Randomized probe families are driven by the seed alone.
    let input = temp_file("subdiff-test.json");
    fs::write(
        &input,
        r#"{"u":{"cell_measures":[0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1],"values":[2,0,1,0,-1,0,0.5,0]},
            "eta":{"cell_measures":[0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1],"values":[0,1,0,-1,0,0.5,0,2]},
            "s":2,"p":0.0,"family":{"kind":"random_sparse","steps":8}}"#,
    )
    .unwrap();
    let a = run(&[
        "subdiff-test",
        "--input",
        input.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    let b = run(&[
        "subdiff-test",
        "--input",
        input.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes_follow_the_contract() {
    // Not slowly decreasing: exit 2.
    let input = temp_file("steep.json");
    fs::write(&input, r#"{"kind":"power","alpha":0.75,"s":2.0}"#).unwrap();
    let out = run(&["sdcheck", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Slowly decreasing: exit 0.
    let input = temp_file("shallow.json");
    fs::write(&input, r#"{"kind":"power","alpha":0.25,"s":2.0}"#).unwrap();
    let out = run(&["sdcheck", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    // Falsified membership: exit 2.
    let input = temp_file("violation.json");
    fs::write(
        &input,
        r#"{"u":{"cell_measures":[0.25,0.25,0.25,0.25],"values":[1,1,0,0]},
            "eta":{"cell_measures":[0.25,0.25,0.25,0.25],"values":[1,1,0,0]},
            "s":2,"p":0.0,"family":{"kind":"scaled_support"}}"#,
    )
    .unwrap();
    let out = run(&["subdiff-test", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Malformed JSON: exit 1.
    let input = temp_file("broken.json");
    fs::write(&input, "{not json").unwrap();
    let out = run(&["sdcheck", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // Unknown recipe: exit 1.
    let out = run(&["example", "no-such-recipe"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn subdiff_descriptor_schema_and_exit() {
    let input = temp_file("subdiff.json");
    fs::write(
        &input,
        r#"{"u":{"cell_measures":[0.25,0.25,0.25,0.25],"values":[4,4,0,0]},
            "s":2,"p":0.5,"kind":"frechet"}"#,
    )
    .unwrap();
    let out = run(&["subdiff", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["kind"], "frechet");
    assert_eq!(report["shape"], "pointwise_fixed");
    assert_eq!(report["regular"], true);
    assert_eq!(report["fixed_values"][0], 0.25);
    assert_eq!(report["zero_mask"][2], true);

    // Empty descriptor: s = 1 with nonzero support, exit 2.
    let input = temp_file("subdiff-empty.json");
    fs::write(
        &input,
        r#"{"u":{"cell_measures":[0.5,0.5],"values":[1,0]},"s":1,"p":0.0,"kind":"frechet"}"#,
    )
    .unwrap();
    let out = run(&["subdiff", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["shape"], "empty");
}

#[test]
fn prox_solve_fixture_and_trace() {
    let input = temp_file("prox.json");
    fs::write(
        &input,
        r#"{"operator":{"kind":"dense","rows":[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]},
            "b":[3.0,0.5,-2.0,0.1],"beta":1.0,"p":0.0,"max_iter":3000,"tol":1e-15}"#,
    )
    .unwrap();
    let trace = temp_file("prox-trace.csv");
    let out = run(&[
        "prox-solve",
        "--input",
        input.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["report"]["objective"], 0.5325);
    assert_eq!(report["solution"]["values"][0], 3.0);
    assert_eq!(report["solution"]["values"][1], 0.0);
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("iter,objective,support_measure,step_norm\n"));
    assert!(csv.lines().count() > 2);
}

#[test]
fn sdcheck_csv_trace_has_levels() {
    let input = temp_file("sdcheck-csv.json");
    fs::write(&input, r#"{"kind":"dyadic","r":2.0,"s":2.0}"#).unwrap();
    let trace = temp_file("sdcheck-trace.csv");
    let out = run(&[
        "sdcheck",
        "--input",
        input.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("gamma,phi\n"));
    // Strictly decreasing gamma column.
    let mut last = f64::INFINITY;
    for line in csv.lines().skip(1) {
        let gamma: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(gamma < last);
        last = gamma;
    }
}
