//! Byte-for-byte comparison of CSV reports against checked-in files.
//! Run with `UPDATE_GOLDEN=1` to regenerate after an intended change.

mod common;

use std::fs;
use std::path::Path;

use common::{fixture, run};

fn golden(case: &str, args: &[&str], files: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    run(args, dir.path());
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(case);
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for f in files {
        let got = fs::read(dir.path().join(f)).unwrap();
        let path = golden_dir.join(f);
        if update {
            fs::create_dir_all(&golden_dir).unwrap();
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
        assert!(got == want, "{case}/{f} differs from golden:\n{}", String::from_utf8_lossy(&got));
    }
}

#[test]
fn flops_deit_s() {
    golden("flops_deit_s", &["flops", "--model", "deit-s"], &["flops.csv"]);
}

#[test]
fn flops_deit_s_three_stage() {
    golden("flops_deit_s_three_stage", &["flops", "--model", "deit-s", "--three-stage"], &["flops.csv"]);
}

#[test]
fn verify_seed_7() {
    golden("verify_seed_7", &["verify", "--seed", "7", "--trials", "50"], &["verify.csv"]);
}

#[test]
fn analyze_small() {
    let c = fixture("small.json");
    golden(
        "analyze_small",
        &["analyze", "--config", c.to_str().unwrap()],
        &["spectrum.csv", "bands.csv", "collapse.csv", "hflf.csv", "awgn.csv"],
    );
}

#[test]
fn reduce_small() {
    let c = fixture("small.json");
    golden("reduce_small", &["reduce", "--config", c.to_str().unwrap()], &["reduce.csv"]);
}

#[test]
fn compare_small() {
    let c = fixture("small.json");
    golden("compare_small", &["compare", "--config", c.to_str().unwrap()], &["compare.csv", "compare_summary.csv"]);
}

#[test]
fn search_small() {
    let c = fixture("small.json");
    golden("search_small", &["search", "--config", c.to_str().unwrap()], &["search.csv"]);
}
