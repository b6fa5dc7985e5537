use serde_json::Value;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eqcat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqcat")).current_dir(dir).args(args).output().expect("run eqcat")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn build_sigma2_writes_two_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let o = eqcat(tmp.path(), &["--out-dir", "run", "build", "--kind", "sigma2-inf", "--pred", "w == 0 and n == 1", "--stages", "100,500"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("run");
    for f in ["snapshot-100.json", "snapshot-500.json", "events.jsonl", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let m = json(&o);
    assert_eq!(m["seedless"], Value::Bool(true));
    assert_eq!(m["stages"], serde_json::json!([100, 500]));
}

#[test]
fn build_bounded_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = eqcat(
        tmp.path(),
        &["--out-dir", "b", "build", "--kind", "bounded", "--repeat", "2", "--fixed", "3:2", "--infinite", "1", "--stages", "200"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snap: Value = serde_json::from_slice(&fs::read(tmp.path().join("b/snapshot-200.json")).unwrap()).unwrap();
    let classes = snap["classes"].as_array().unwrap();
    assert_eq!(classes.iter().filter(|c| c["infinite"] == Value::Bool(true)).count(), 1);
    let threes = classes.iter().filter(|c| c["infinite"] == Value::Bool(false) && c["members"].as_array().unwrap().len() == 3);
    assert_eq!(threes.count(), 2);
}

#[test]
fn non_monotone_s1_function_is_an_audit_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = eqcat(
        tmp.path(),
        &["--out-dir", "x", "build", "--kind", "from-s1", "--f", "max(10 - s, 1) + 2 * i", "--pred", "n == 1", "--stages", "50"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&eqcat(tmp.path(), &["build", "--kind", "sigma2-inf", "--stages", "10"])), 2);
    assert_eq!(code(&eqcat(tmp.path(), &["build", "--kind", "sigma2-inf", "--pred", "k ==", "--stages", "10"])), 2);
    assert_eq!(code(&eqcat(tmp.path(), &["character", "--structure", "nowhere", "--stages", "1"])), 2);
    assert_eq!(code(&eqcat(tmp.path(), &["frobnicate"])), 2);
}

#[test]
fn mismatched_certificates_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&eqcat(d, &["--out-dir", "p", "build", "--kind", "periodic", "--pattern", "2", "--stages", "10"])), 0);
    fs::write(d.join("c2.json"), r#"{"kind":"bounded-one-repeat","bound":3,"k":2}"#).unwrap();
    fs::write(d.join("c3.json"), r#"{"kind":"bounded-one-repeat","bound":3,"k":3}"#).unwrap();
    let o = eqcat(d, &["iso", "--a", "p", "--b", "p", "--level", "computable", "--cert-a", "c2.json", "--cert-b", "c3.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch"));
}

#[test]
fn iso_then_verify_and_corrupted_map() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&eqcat(d, &["--out-dir", "p", "build", "--kind", "periodic", "--pattern", "1,2", "--stages", "10"])), 0);
    let o = eqcat(d, &["--budget", "200", "iso", "--a", "p", "--b", "p", "--level", "delta3", "--frontier", "60"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    fs::write(d.join("map.json"), &o.stdout).unwrap();
    let ok = eqcat(d, &["verify", "--a", "p", "--b", "p", "--map", "map.json", "--frontier", "60"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));

    // Send the pair class {1, 2} apart: 1 ↦ 3 instead of 1 ↦ 2.
    let mut report = json(&o);
    let pairs = report["pairs"].as_array_mut().unwrap();
    let entry = pairs.iter_mut().find(|p| p[0] == 1).unwrap();
    entry[1] = Value::from(3);
    let other = pairs.iter_mut().find(|p| p[0] == 3).unwrap();
    other[1] = Value::from(2);
    fs::write(d.join("bad.json"), serde_json::to_vec(&report).unwrap()).unwrap();
    let bad = eqcat(d, &["verify", "--a", "p", "--b", "p", "--map", "bad.json", "--frontier", "60"]);
    assert_eq!(code(&bad), 4);
    assert!(!bad.stderr.is_empty());
}

#[test]
fn verify_accepts_plain_pair_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&eqcat(d, &["--out-dir", "id", "build", "--kind", "identity", "--stages", "5"])), 0);
    let id: Vec<[u64; 2]> = (0..=20).map(|x| [x, x]).collect();
    fs::write(d.join("id.json"), serde_json::to_vec(&id).unwrap()).unwrap();
    let o = eqcat(d, &["verify", "--a", "id", "--b", "id", "--map", "id.json", "--frontier", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn character_reports_each_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&eqcat(d, &["--out-dir", "e", "build", "--kind", "periodic", "--pattern", "3", "--stages", "5"])), 0);
    let o = eqcat(d, &["character", "--structure", "e", "--stages", "2,8"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v[0]["pairs"], serde_json::json!([[3, 1]]));
    assert_eq!(v[1]["pairs"], serde_json::json!([[3, 1], [3, 2], [3, 3]]));
}

#[test]
fn diag_extract_and_range_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = eqcat(d, &["--budget", "400", "diag"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let reqs = json(&o);
    assert_eq!(reqs.as_array().unwrap().len(), 5);
    assert_eq!(reqs[0]["status"], "separated");

    assert_eq!(code(&eqcat(d, &["--out-dir", "s", "build", "--kind", "from-s", "--f", "2 * i + 1", "--infinite", "0", "--stages", "10"])), 0);
    let o = eqcat(d, &["--budget", "300", "extract", "--structure", "s", "--mode", "s1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = eqcat(d, &["--budget", "50", "range", "--f", "2 * i + 1", "--m", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn double_run_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let args = ["build", "--kind", "sigma2-inf", "--pred", "w == 0 and n == 1", "--stages", "40,120"];
    for out in ["one", "two"] {
        let mut v = vec!["--out-dir", out];
        v.extend(args);
        assert_eq!(code(&eqcat(d, &v)), 0);
    }
    assert_eq!(files(&d.join("one")), files(&d.join("two")));
    // Replaying the manifest rewrites the same bytes.
    assert_eq!(code(&eqcat(d, &["--out-dir", "three", "build", "--manifest", "one/manifest.json"])), 0);
    assert_eq!(files(&d.join("one")), files(&d.join("three")));
}
