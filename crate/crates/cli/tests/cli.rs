use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn excouple(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_excouple"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn no_overlap_exits_with_2_and_quotes_the_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let o = excouple(
        &["couple", "--group", "Z", "--measure", "0=1/2 2=1/2", "--x", "1", "--seed", "1"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("μⁿ ∧ shift(x⁻¹, μⁿ) = 0"), "{err}");
}

#[test]
fn atom_guard_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_excouple"))
        .args(["tv", "--preset", "free2", "--seed", "1", "--out"])
        .arg(tmp.path())
        .env("EXCOUPLE_GUARD_ATOMS", "50")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn seed_is_required() {
    let tmp = tempfile::tempdir().unwrap();
    let o = excouple(&["tv", "--preset", "cyclic3"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn identity_shift_couples_at_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = excouple(&["couple", "--preset", "cyclic3", "--x", "0", "--runs", "5", "--seed", "3"], tmp.path());
    assert!(o.status.success());
    let runs = fs::read_to_string(tmp.path().join("runs.jsonl")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    assert!(runs.lines().all(|l| l.contains("\"T_or_censored\":{\"T\":0}")));
}

#[test]
fn config_file_sits_between_preset_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(&cfg, "preset = \"lattice-even\"\nseed = 11\nx = \"3\"\nn_max = 20\n").unwrap();
    let out = tmp.path().join("a");
    let o = excouple(&["solve", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["x"], "3");
    assert_eq!(v["in_Gs"], "no_up_to_n_max");
    assert_eq!(v["n_max"], 20);

    let out = tmp.path().join("b");
    let o = excouple(&["solve", "--config", cfg.to_str().unwrap(), "--x", "4"], &out);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["x"], "4");
    assert_eq!(v["n0"], 2);
    let closure = fs::read_to_string(out.join("closure.txt")).unwrap();
    assert!(closure.lines().any(|l| l == "-20") && !closure.lines().any(|l| l == "3"));
}

#[test]
fn timestamp_line_is_optional() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(excouple(&["tv", "--preset", "cyclic3", "--seed", "1"], &a).status.success());
    assert!(excouple(&["tv", "--preset", "cyclic3", "--seed", "1", "--no-timestamp"], &b).status.success());
    let with = fs::read_to_string(a.join("tv.csv")).unwrap();
    let without = fs::read_to_string(b.join("tv.csv")).unwrap();
    assert!(with.starts_with("# generated by excouple"));
    assert!(without.starts_with("n,tv,"));
    assert_eq!(with.split_once('\n').unwrap().1, without);
    assert_eq!(fs::read(a.join("fit.json")).unwrap(), fs::read(b.join("fit.json")).unwrap());
}

#[test]
fn free_group_fit_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let o = excouple(&["tv", "--preset", "free2", "--seed", "1"], tmp.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("fit.json")).unwrap()).unwrap();
    assert!(v["fit"].is_null());
    assert!(v["fit_refused"].is_string());
    assert!(v["min_tv"].as_f64().unwrap() >= 0.3);
    assert_eq!(v["verdict"]["in_Gs"], "unknown");
}

#[test]
fn demo_rejects_other_groups() {
    let tmp = tempfile::tempdir().unwrap();
    let o = excouple(&["demo-freegroup", "--preset", "cyclic3", "--seed", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
