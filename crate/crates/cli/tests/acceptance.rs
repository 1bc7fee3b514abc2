//! Acceptance gate for the command-line contract: exit codes and
//! byte-for-byte report reproducibility, driven through the real binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, name: &str, json: &str, args: &[&str]) -> Output {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    let mut full = args.to_vec();
    let path_text = path.to_str().unwrap().to_string();
    full.push("--config");
    full.push(&path_text);
    Command::new(env!("CARGO_BIN_EXE_hj"))
        .args(&full)
        .output()
        .unwrap()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().unwrap_or(-1)
}

fn walk_config(mode: &str, extra: &str) -> String {
    format!(
        r#"{{
  "mode": "{mode}",
  "semigroup": {{ "family": "int-line" }},
  "variables": [
    {{ "finite": {{ "support": [ {{ "element": "1", "prob": "1/2" }}, {{ "element": "-1", "prob": "1/2" }} ] }} }},
    {{ "finite": {{ "support": [ {{ "element": "1", "prob": "1/2" }}, {{ "element": "-1", "prob": "1/2" }} ] }} }}
  ],
  "z0": "0"{extra}
}}"#
    )
}

#[test]
fn criterion_8_cli_contract() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let mut failures: Vec<String> = Vec::new();
    let mut expect = |what: &str, got: i32, want: i32| {
        if got != want {
            failures.push(format!("{what}: exit {got}, want {want}"));
        }
    };

    let pass = run(
        dir,
        "pass.json",
        &walk_config(
            "evaluate",
            r#", "params": { "sizes": [1, 1], "thresholds": ["1", "1"], "s": "1" }"#,
        ),
        &["evaluate"],
    );
    expect("passing evaluation", exit_code(&pass), 0);

    let broken = run(
        dir,
        "broken.json",
        r#"{ "mode": "axioms", "semigroup": { "family": "broken-square" }, "trials": 100 }"#,
        &["axioms"],
    );
    expect("broken-square axioms", exit_code(&broken), 1);

    let oversized = run(
        dir,
        "oversized.json",
        &walk_config(
            "evaluate",
            r#", "params": { "sizes": [2, 2], "thresholds": ["1", "1"], "s": "1" }"#,
        ),
        &["evaluate"],
    );
    expect("blocks larger than the path", exit_code(&oversized), 2);

    let starved = run(
        dir,
        "starved.json",
        &walk_config(
            "evaluate",
            r#", "budget": 3, "params": { "sizes": [1], "thresholds": ["1"], "s": "1" }"#,
        ),
        &["evaluate"],
    );
    expect("outcome budget too small", exit_code(&starved), 3);

    let mc_json = r#"{
  "mode": "mc",
  "semigroup": { "family": "euclidean", "dim": 2 },
  "variables": [
    { "gaussian": { "mean": [0.0, 0.0], "scale": 1.0 } },
    { "gaussian": { "mean": [0.0, 0.0], "scale": 1.0 } }
  ],
  "z0": "[0,0]",
  "params": { "sizes": [1, 1], "thresholds": ["2", "2"], "s": "3" },
  "samples": 5000,
  "seed": 9
}"#;
    let first = run(dir, "mc.json", mc_json, &["mc"]);
    let second = run(dir, "mc.json", mc_json, &["mc"]);
    expect("sampled run", exit_code(&first), 0);
    if first.stdout != second.stdout {
        failures.push("identical config+seed produced different reports".to_string());
    }
    if first.stdout.is_empty() {
        failures.push("sampled run printed nothing".to_string());
    }

    if failures.is_empty() {
        println!(
            "criterion 8 (cli): pass - exit codes 0/1/2/3 behave as published; reruns byte-identical"
        );
    } else {
        let msg = failures.join("; ");
        println!("criterion 8 (cli): fail - {msg}");
        panic!("criterion 8 (cli) failed: {msg}");
    }
}
