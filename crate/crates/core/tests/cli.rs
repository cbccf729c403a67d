//! End-to-end runs of the `symdyn` binary against golden reports in
//! `tests/golden`. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_symdyn"))
        .args(args)
        .current_dir(dir("data"))
        .env_remove("SYMDYN_BUDGET")
        .output()
        .expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

/// The report with the wall-time field removed.
fn stable(stdout: &str) -> Value {
    let mut v: Value = serde_json::from_str(stdout).expect("report is JSON");
    v.as_object_mut().expect("object").remove("wall_time_ms").expect("wall time present");
    v
}

fn golden(name: &str, args: &[&str], exit: i32) {
    let (code, stdout, stderr) = run(args);
    assert_eq!(code, exit, "{name}: stderr {stderr}\nstdout {stdout}");
    let got = stable(&stdout);
    let verdict = got["verdict"].as_str().unwrap();
    if verdict == "fail" {
        assert!(!got["witness"].is_null(), "{name}: failure without witness");
    }
    let path = dir("golden").join(format!("{name}.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
        return;
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {path:?}"))).unwrap();
    assert_eq!(got, want, "{name}: report differs from golden");
}

#[test]
fn group_ball() {
    golden("group_ball", &["group", "ball", "--group", "F_2", "--radius", "2", "--list"], 0);
}

#[test]
fn group_check() {
    golden("group_check", &["group", "check", "--group", "C_4", "--set", "[0, 1, 3]"], 0);
}

#[test]
fn subshift_language() {
    golden("subshift_language", &["subshift", "language", "--spec", "gm.json", "--F", "[0,1,2,3]", "--list"], 0);
}

#[test]
fn subshift_check_si() {
    golden("subshift_check_si", &["subshift", "check-si", "--spec", "gm.json", "--K", "B(1)", "--size-cap", "2", "--region", "B(2)"], 0);
    golden("subshift_check_si_fail", &["subshift", "check-si", "--spec", "gm.json", "--K", "[0,1]", "--size-cap", "2", "--region", "B(2)"], 1);
}

#[test]
fn subshift_check_tmp() {
    golden("subshift_check_tmp", &["subshift", "check-tmp", "--spec", "gm.json", "--M", "B(1)"], 0);
}

#[test]
fn subshift_growth() {
    golden("subshift_growth", &["subshift", "growth", "--spec", "gm.json", "--K", "B(1)", "--F", "B(3)"], 0);
}

#[test]
fn marker_search() {
    golden("marker_search", &["marker", "search", "--spec", "gm.json", "--Y", "[0]", "--W", "B(2)", "--strategy", "lex"], 0);
    golden("marker_search_none", &["marker", "search", "--spec", "full2.json", "--Y", "[0]", "--W", "B(1)"], 1);
}

#[test]
fn marker_search_random_is_deterministic() {
    let args = ["marker", "search", "--spec", "full2.json", "--Y", "[0]", "--W", "B(2)", "--strategy", "rand", "--seed", "7", "--trials", "50"];
    let (c1, a, _) = run(&args);
    let (c2, b, _) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(stable(&a), stable(&b));
    golden("marker_search_rand", &args, 0);
}

#[test]
fn marker_verify() {
    golden("marker_verify", &["marker", "verify", "--spec", "full2.json", "--Y", "[0]", "--W", "B(2)", "--pattern", "marker.json"], 0);
    golden("marker_verify_fail", &["marker", "verify", "--spec", "full2.json", "--Y", "[0]", "--W", "B(2)", "--pattern", "white.json"], 1);
}

#[test]
fn marker_feasibility() {
    golden("marker_feasibility", &["marker", "feasibility", "--spec", "full2.json", "--K", "[0]", "--k", "1", "--r", "19", "--r-max", "40"], 0);
    golden("marker_feasibility_fail", &["marker", "feasibility", "--spec", "full2.json", "--K", "[0]", "--k", "1", "--r", "5"], 1);
}

#[test]
fn egg_build() {
    golden("egg_build", &["egg", "build", "--spec", "full2.json", "--Y", "[0]", "--W", "B(2)"], 0);
}

#[test]
fn egg_verify() {
    golden("egg_verify", &["egg", "verify", "--spec", "full2.json", "--eggs", "eggs.json"], 0);
}

#[test]
fn egg_act() {
    golden("egg_act", &["egg", "act", "--spec", "full2.json", "--eggs", "eggs.json", "--sigma", "1,0", "--window", "egg_window.json"], 0);
}

#[test]
fn egg_lift() {
    golden("egg_lift", &["egg", "lift", "--spec", "full2.json", "--eggs", "eggs.json", "--phi", "model_swap.json", "--window", "egg_window.json"], 0);
}

#[test]
fn aut_compose() {
    golden("aut_compose", &["aut", "compose", "--outer", "shift.json", "--inner", "flip.json"], 0);
}

#[test]
fn aut_verify() {
    golden("aut_verify", &["aut", "verify", "--spec", "full2.json", "--forward", "shift.json", "--inverse", "unshift.json"], 0);
    golden("aut_verify_fail", &["aut", "verify", "--spec", "full2.json", "--forward", "shift.json", "--inverse", "shift.json"], 1);
}

#[test]
fn aut_enumerate() {
    golden("aut_enumerate", &["aut", "enumerate", "--n", "2", "--r", "1"], 0);
}

#[test]
fn aut_center() {
    golden("aut_center", &["aut", "center", "--candidate", "shift.json"], 0);
    golden("aut_center_fail", &["aut", "center", "--candidate", "flip.json"], 1);
}

#[test]
fn aut_slowshift() {
    golden("aut_slowshift", &["aut", "slowshift", "--n", "2", "--k", "2", "--verify"], 0);
}

#[test]
fn belt_classify() {
    golden("belt_classify", &["belt", "classify", "--window", "mixed.json"], 0);
}

#[test]
fn belt_trace() {
    golden("belt_trace", &["belt", "trace", "--window", "straight.json", "--at", "2", "--us", "B(2)"], 0);
}

#[test]
fn belt_psi() {
    golden("belt_psi", &["belt", "psi", "--phi", "shift.json", "--window", "straight.json"], 0);
}

#[test]
fn belt_fatfree() {
    golden("belt_fatfree", &["belt", "fatfree", "--T", "B(1)", "--cap", "4"], 0);
}

#[test]
fn suite_run() {
    golden("suite_run", &["suite", "run", "--criterion", "3"], 0);
}

#[test]
fn usage_errors_exit_3() {
    let (code, _, stderr) = run(&["aut", "compose", "--outer", "broken.json", "--inner", "flip.json"]);
    assert_eq!(code, 3);
    assert!(stderr.contains("broken.json:2"), "{stderr}");
    assert_eq!(run(&["marker", "search"]).0, 3);
    assert_eq!(run(&["group", "ball", "--group", "Q", "--radius", "1"]).0, 3);
}

#[test]
fn budget_exhaustion_exits_2() {
    let (code, stdout, _) = run(&["--table", "10", "subshift", "language", "--spec", "full2.json", "--F", "B(5)"]);
    assert_eq!(code, 2, "{stdout}");
    let v = stable(&stdout);
    assert_eq!(v["verdict"], "inconclusive");
    assert_eq!(v["labels"]["budget"], "exceeded");
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("symdyn-report-{}.json", std::process::id()));
    let (code, stdout, _) = run(&["group", "ball", "--radius", "1", "--out", path.to_str().unwrap()]);
    assert_eq!((code, stdout.as_str()), (0, ""));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["size"], 3);
    std::fs::remove_file(path).unwrap();
}
