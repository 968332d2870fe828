use std::path::PathBuf;
use std::process::{Command, Output};

fn seqsteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqsteer")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("seqsteer-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn lists_presets() {
    let o = seqsteer(&["run", "--list"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(names.len(), 16);
    assert!(names.contains(&"ion-trap-2".to_string()));
    assert!(names.contains(&"selftest-harness".to_string()));
}

#[test]
fn preset_output_is_byte_identical_for_a_seed() {
    let a = scratch("a.csv");
    let b = scratch("b.csv");
    for p in [&a, &b] {
        let o = seqsteer(&["run", "ion-trap-1", "--seed", "3", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# seqsteer-csv v1 experiment=ion-trap-1"));
    assert_eq!(text.lines().count(), 2 + 5 * 33);
}

#[test]
fn config_file_runs_and_reports_errors_with_positions() {
    let good = scratch("good.toml");
    std::fs::write(
        &good,
        "name = \"small\"\nrounds = 1\ntheta = [0.0, 0.3]\nmode = \"both\"\n\n[[series]]\nlabel = \"d\"\nfamily = \"depolarized\"\neps = 0.05\n",
    )
    .unwrap();
    let o = seqsteer(&["run", good.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    let row: Vec<&str> = out.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "d");
    assert!(!row[19].is_empty(), "analytic column filled in both mode");

    let bad = scratch("bad.toml");
    std::fs::write(&bad, "name = \"x\"\nrounds = 1\nthetas = [0.1]\n").unwrap();
    let o = seqsteer(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let empty = scratch("empty.toml");
    std::fs::write(&empty, "name = \"x\"\ntheta = []\n[[series]]\nlabel = \"p\"\nfamily = \"pure\"\nzeta = 0.5\n").unwrap();
    let o = seqsteer(&["run", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty theta grid"));
}

#[test]
fn config_errors_exit_with_two() {
    assert_eq!(seqsteer(&["run", "no-such-preset"]).status.code(), Some(2));
    assert_eq!(seqsteer(&["certify", "--state", "depolarized:eps=2"]).status.code(), Some(2));
    assert_eq!(seqsteer(&["certify", "--state", "nv:fz=0.9775,v=1"]).status.code(), Some(2));
    assert_eq!(seqsteer(&["certify", "--rounds", "4"]).status.code(), Some(2));
    assert!(seqsteer(&["certify", "--state", "nv:fz=0.9775,v=1", "--lenient"]).status.success());
}

#[test]
fn certify_maximally_entangled_single_round() {
    let o = seqsteer(&["certify", "--state", "pure:zeta=pi/4", "--theta", "0"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(2).unwrap().split(',').collect();
    let h: f64 = row[16].parse().unwrap();
    assert!((h - 1.0).abs() < 1e-3, "{h}");
}

#[test]
fn stage_subcommands_emit_csv() {
    for args in [
        vec!["simulate", "--rounds", "2"],
        vec!["steering-weight", "--rounds", "1"],
        vec!["inequality"],
        vec!["analytic-bound", "--eps1", "0", "--eps2", "0", "--rounds", "4"],
        vec!["selftest-verify", "--instances", "3"],
        vec!["tomography", "--shots", "500", "--seed", "1"],
        vec!["--non-causal", "steering-weight", "--rounds", "2", "--theta", "0.2"],
    ] {
        let o = seqsteer(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("# seqsteer-csv v1"), "{args:?}");
    }
    let o = seqsteer(&["analytic-bound", "--eps1", "0", "--eps2", "0"]);
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[6], "0.5");
}
