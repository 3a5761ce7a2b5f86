// SPDX-License-Identifier: Apache-2.0

mod common;

use std::fs;
use std::path::Path;

use common::fixture_dir;
use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn rtlock(args: &[&str]) -> Out {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = rtlock::cli::run(std::iter::once("rtlock").chain(args.iter().copied()), &mut o, &mut e);
    Out { code, stdout: String::from_utf8(o).unwrap(), stderr: String::from_utf8(e).unwrap() }
}

fn corpus(name: &str) -> String {
    fixture_dir().join("corpus").join(format!("{name}.v")).display().to_string()
}

fn lock_into(dir: &Path, name: &str, extra: &[&str]) -> Out {
    let design = corpus(name);
    let mut args = vec!["lock", design.as_str(), "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    rtlock(&args)
}

fn stderr_lines(s: &str) -> Vec<Value> {
    s.lines().map(|l| serde_json::from_str(l).expect("stderr is JSON lines")).collect()
}

#[test]
fn lock_then_verify_and_key_effect() {
    let dir = tempfile::tempdir().unwrap();
    let out = lock_into(dir.path(), "alu4", &["--seed", "5"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let summary: Value = serde_json::from_str(out.stdout.trim()).unwrap();
    assert_eq!(summary["design"], "alu4");
    assert_eq!(summary["key_port"], "key_in");
    assert_eq!(summary["locked"], summary["candidates"]);
    let p = |ext: &str| dir.path().join(format!("alu4.{ext}")).display().to_string();
    let orig = corpus("alu4");
    let verify = rtlock(&["verify", &orig, &p("locked.v"), &p("key"), "--exhaustive"]);
    assert_eq!(verify.code, 0, "{}", verify.stderr);
    let res: Value = serde_json::from_str(verify.stdout.trim()).unwrap();
    assert_eq!(res["pass"], true);
    assert_eq!(res["mode"], "exhaustive(cycles=1)");

    let effect = rtlock(&["key-effect", &orig, &p("locked.v"), &p("key"), "--exhaustive", "--report", "json"]);
    assert_eq!(effect.code, 0, "{}", effect.stderr);
    let rep: Value = serde_json::from_str(effect.stdout.trim()).unwrap();
    assert_eq!(rep["r"], summary["key_width"]);
    assert!(rep["per_bit"].as_array().unwrap().iter().all(|b| b["failing"].as_u64().unwrap() > 0));

    let text = rtlock(&["key-effect", &orig, &p("locked.v"), &p("key"), "--exhaustive"]);
    assert!(text.stdout.starts_with("# design alu4"));
    assert!(text.stdout.lines().last().unwrap().starts_with("F = 0."));
}

#[test]
fn wrong_key_fails_verify_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lock_into(dir.path(), "xor8", &["--techniques", "const"]).code, 0);
    let key = dir.path().join("xor8.key");
    let text = fs::read_to_string(&key).unwrap();
    assert!(text.ends_with("A5\n"), "{text}");
    fs::write(&key, text.replace("A5\n", "A4\n")).unwrap();
    let out = rtlock(&[
        "verify",
        &corpus("xor8"),
        dir.path().join("xor8.locked.v").to_str().unwrap(),
        key.to_str().unwrap(),
        "--exhaustive",
    ]);
    assert_eq!(out.code, 1);
    let res: Value = serde_json::from_str(out.stdout.trim()).unwrap();
    assert_eq!(res["pass"], false);
    assert_eq!(res["counterexample"]["output"], "y");
    assert_eq!(stderr_lines(&out.stderr)[0]["error"], "Mismatch");
}

#[test]
fn locking_is_deterministic_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(lock_into(d.path(), "mixed20", &["--seed", "42", "--percent", "25"]).code, 0);
    }
    for ext in ["locked.v", "key", "manifest.jsonl"] {
        let f = format!("mixed20.{ext}");
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_budget_warns_and_emits_unlocked_design() {
    let dir = tempfile::tempdir().unwrap();
    let out = lock_into(dir.path(), "xor8", &["--max-key-bits", "0"]);
    assert_eq!(out.code, 0);
    assert_eq!(stderr_lines(&out.stderr)[0]["warning"], "BudgetZero");
    let summary: Value = serde_json::from_str(out.stdout.trim()).unwrap();
    assert_eq!(summary["key_width"], 0);
    assert!(!fs::read_to_string(dir.path().join("xor8.locked.v")).unwrap().contains("key_in"));
}

#[test]
fn elements_lists_candidates() {
    let out = rtlock(&["elements", &corpus("xor8")]);
    assert_eq!(out.code, 0);
    let rep: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(rep["total_bits"], 9);
}

#[test]
fn usage_and_input_errors() {
    let out = rtlock(&["lock"]);
    assert_eq!(out.code, 2);
    assert_eq!(stderr_lines(&out.stderr)[0]["error"], "Usage");
    assert_eq!(rtlock(&["lock", "x.v", "--percent", "101"]).code, 2);
    assert_eq!(rtlock(&["lock", "x.v", "--percent", "5", "--max-key-bits", "3"]).code, 2);

    let missing = rtlock(&["lock", "/nonexistent/design.v"]);
    assert_eq!(missing.code, 1);
    assert!(stderr_lines(&missing.stderr)[0]["error"].is_string());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.v");
    fs::write(&bad, "module m(input a output y); endmodule\n").unwrap();
    let out = rtlock(&["elements", bad.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert_eq!(stderr_lines(&out.stderr).len(), 1);
}

#[test]
fn input_key_sets_selector_values() {
    let dir = tempfile::tempdir().unwrap();
    let worked = fixture_dir().join("worked");
    let design = worked.join("op.v").display().to_string();
    let key = worked.join("op.input.key").display().to_string();
    let out = rtlock(&[
        "lock",
        &design,
        "--techniques",
        "op",
        "--input-key",
        &key,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(
        fs::read_to_string(dir.path().join("op.key")).unwrap(),
        fs::read_to_string(worked.join("op.key")).unwrap()
    );
}
