use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn mstlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mstlab")).args(args).output().expect("mstlab runs")
}

fn tmp(name: &str) -> String {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name).to_string_lossy().into_owned()
}

fn header(text: &str) -> (usize, usize) {
    let h: Vec<usize> = text.lines().next().unwrap().split_whitespace().map(|x| x.parse().unwrap()).collect();
    (h[0], h[1])
}

#[test]
fn generate_then_mst_gives_a_spanning_tree() {
    let g = tmp("cm.txt");
    assert!(mstlab(&["generate", "--model", "cm", "--n", "200", "--seed", "5", "--out", &g]).status.success());
    assert_eq!(header(&fs::read_to_string(&g).unwrap()), (200, 300));
    let t = mstlab(&["mst", &g, "--seed", "1"]);
    assert!(t.status.success());
    let (n, m) = header(&String::from_utf8(t.stdout).unwrap());
    assert_eq!(n, 200);
    assert!(m <= 199);
}

#[test]
fn cbd_and_percolate_shrink_the_graph() {
    let g = tmp("k4.txt");
    fs::write(&g, "4 6\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n").unwrap();
    for mode in ["chain", "infty"] {
        let o = mstlab(&["cbd", &g, "--mode", mode, "--seed", "3"]);
        assert!(o.status.success());
        assert_eq!(header(&String::from_utf8(o.stdout).unwrap()), (4, 3));
    }
    let p = mstlab(&["percolate", &g, "--p", "0"]);
    assert_eq!(header(&String::from_utf8(p.stdout).unwrap()), (4, 0));
    let t = mstlab(&["percolate", &g, "--t", "0"]);
    assert_eq!(header(&String::from_utf8(t.stdout).unwrap()), (4, 6));
}

#[test]
fn same_seed_same_output() {
    let a = mstlab(&["generate", "--model", "hms", "--n", "30", "--s", "2", "--seed", "9"]);
    let b = mstlab(&["generate", "--model", "hms", "--n", "30", "--s", "2", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(header(&String::from_utf8(a.stdout).unwrap()), (30, 31));
}

#[test]
fn continuum_writes_a_distance_matrix() {
    let o = mstlab(&["continuum", "--object", "hs", "--s", "2", "--grid", "256", "--points", "5", "--seed", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "5");
    assert_eq!(lines.len(), 7);
    assert!(lines[2..].iter().all(|l| l.split(',').count() == 5));
}

#[test]
fn experiment_writes_csv_and_summary() {
    let cfg = tmp("exp.cfg");
    let csv = tmp("exp.csv");
    let json = tmp("exp.json");
    fs::write(&cfg, "# small run\nexperiment = mst_scaling\nsizes = 100, 200\nreplicas = 3\nseed = 11\n").unwrap();
    let o = mstlab(&["experiment", "--config", &cfg, "--out", &csv, "--summary", &json]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# mstlab "));
    assert_eq!(text.lines().filter(|l| l.starts_with("mst_scaling,")).count(), 6 * 5);
    assert!(fs::read_to_string(&json).unwrap().contains("\"diam_scaled\""));
}

#[test]
fn verify_subset_is_reproducible() {
    let a = mstlab(&["verify", "--quick", "--only", "6,13", "--seed", "7"]);
    let b = mstlab(&["verify", "--quick", "--only", "6,13", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("verify,6,passed,1") && text.contains("verify,13,passed,1"));
}

#[test]
fn bad_input_is_an_error() {
    assert!(!mstlab(&["verify", "--only", "99"]).status.success());
    let g = tmp("bad.txt");
    fs::write(&g, "3 1\n0 7\n").unwrap();
    let o = mstlab(&["mst", &g]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!mstlab(&["generate", "--model", "cm", "--n", "3"]).status.success());
}
