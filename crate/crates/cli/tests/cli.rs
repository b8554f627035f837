use std::path::Path;
use std::process::{Command, Output};

use frostlab::{DeltaSet, DiscreteMeasure};

fn frostlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frostlab")).args(args).output().unwrap()
}

fn run_config(dir: &Path, text: &str) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.join("out");
    frostlab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn empty_config_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "# nothing\nseed = 3\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let results = read(dir.path(), "results.csv");
    assert_eq!(results, "check,d,n,s,sigma,alpha,p,level,lhs,rhs,ratio,family_size\n");
    let summary: serde_json::Value = serde_json::from_str(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["criteria"].as_array().unwrap().len(), 0);
}

#[test]
fn energy_of_two_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let set = DeltaSet::new(1, 2, vec![[0, 0, 0], [3, 0, 0]]).unwrap();
    let mu = DiscreteMeasure::new(set, vec![0.5, 0.5]).unwrap();
    std::fs::write(dir.path().join("two.txt"), mu.to_text()).unwrap();
    let out = run_config(dir.path(), "[experiment]\nname = energy\nmeasure = file\npath = two.txt\ns = 1\n");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "measures.csv");
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let energy: f64 = row[5].parse().unwrap();
    assert!((energy - 8.0 / 3.0).abs() < 1e-9);
}

#[test]
fn sweep_gives_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 42\n[experiment]\nname = sweep\ncheck = projection\nlevels = 6..10\ns = 1.1\nalpha = 1.1\n";
    let out = run_config(dir.path(), cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "results.csv");
    let levels: Vec<u32> = csv.lines().skip(1).map(|l| l.split(',').nth(7).unwrap().parse().unwrap()).collect();
    assert_eq!(levels, vec![6, 7, 8, 9, 10]);

    let verify = frostlab(&["verify", dir.path().join("out/results.csv").to_str().unwrap()]);
    assert_eq!(verify.status.code(), Some(0));
}

#[test]
fn same_seed_same_bytes() {
    let cfg = "seed = 9\n\
        [experiment]\nname = sweep\ncheck = incidence\nlevels = 5..7\ns = 1.1\nalpha = 1.1\ncount = 50\n\
        [experiment]\nname = sumproduct\nlevels = 8..9\n\
        [experiment]\nname = furstenberg\nbuild_level = 10\nlevels = 4..8\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_config(a.path(), cfg).status.code(), Some(0));
    assert_eq!(run_config(b.path(), cfg).status.code(), Some(0));
    for f in ["results.csv", "sumproduct.csv", "furstenberg.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&read(a.path(), "summary.json")).unwrap();
    assert_eq!(summary["criteria"].as_array().unwrap().len(), 3);
    assert_eq!(summary["seed"], 9);
}

#[test]
fn config_errors_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "[experiment]\nname = energy\nlevel = 4\nwat\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    let out = run_config(dir.path(), "[experiment]\nname = nope\n");
    assert_eq!(out.status.code(), Some(2));
    let out = run_config(dir.path(), "[experiment]\nname = l2\nlevel = 5\nbogus = 1\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn failed_bound_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // ratio column inconsistent with lhs/rhs
    let csv = "check,d,n,s,sigma,alpha,p,level,lhs,rhs,ratio,family_size\n\
               l2_classical,2,1,1,1,,2,6,1,1,1,8\n\
               l2_classical,2,1,1,1,,2,7,1,1,2,8\n";
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, csv).unwrap();
    let out = frostlab(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_lists_every_schema() {
    let out = frostlab(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for h in [
        "check,d,n,s,sigma,alpha,p,level,lhs,rhs,ratio,family_size",
        "d,k,s,t,sigma,measured_dim,lower_bound,upper_bound,levels",
        "level,sB,sC,cardA,sumsize,prodsize,maxsize,exponent,bound,ratio,pass",
    ] {
        assert!(text.contains(h), "{h}");
    }
}

#[test]
fn gen_prints_a_set() {
    let out = frostlab(&["gen", "cantor", "--level", "8", "--s1", "0.5", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let set = DeltaSet::from_text(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(set.len(), 16);
}
