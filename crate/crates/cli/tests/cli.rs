use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use llb_core::Field;
use tempfile::TempDir;

const MINIMAL: &str = "\
grid.dim = 2
grid.n = 16, 16
grid.lengths = 2pi, 2pi
solver.dt = 1e-4
solver.t_end = 0.002
init.family = random_bandlimited
init.seed = 7
init.kmax = 2
init.linf = 1
output.snapshot_every = 10
";

fn llb(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_llb"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("LLB_THREADS", t),
        None => cmd.env_remove("LLB_THREADS"),
    };
    cmd.output().expect("failed to launch llb")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    let o = llb(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,linf,l2,l4,l8,dv_l2,lap_l2,h1,h2,energy_residual,dv_bound_slack")
    );
    assert_eq!(lines.count(), 21);
    assert!(out.join("slack.csv").exists());
    assert!(fs::read_to_string(out.join("report.txt"))
        .unwrap()
        .contains("termination: completed"));

    let snaps: Vec<_> = fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 3);
    let (v, t) = llb_core::read_snapshot(out.join("snapshots/snap_000002.bin")).unwrap();
    assert!((t - 0.002).abs() < 1e-15);
    assert_eq!(v.values().len(), 16 * 16);

    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    let reparsed = llb_core::parse_config(&resolved).unwrap();
    assert_eq!(reparsed.solver.dt, 1e-4);
}

#[test]
fn verify_calculus_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let o = llb(&["verify", "--config", &cfg, "--suite", "calculus"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("[PASS] ricci defect"));
}

#[test]
fn gn_unbalanced_exponents_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let o = llb(
        &[
            "gn",
            "--config",
            &cfg,
            "--samples",
            "3",
            "--j",
            "1",
            "--k",
            "2",
            "--p",
            "4",
            "--r",
            "2",
            "--q",
            "3",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k/p = j/r + (k-j)/q"), "{}", stderr(&o));
}

#[test]
fn gn_writes_one_row_per_sample() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let csv = tmp.path().join("gn.csv");
    let o = llb(
        &[
            "gn",
            "--config",
            &cfg,
            "--samples",
            "4",
            "--j",
            "1",
            "--k",
            "2",
            "--p",
            "4",
            "--r",
            "2",
            "--q",
            "inf",
            "--seed",
            "50",
            "--out",
            csv.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(csv).unwrap();
    let rows: Vec<_> = text.lines().collect();
    assert_eq!(rows[0], "sample_id,seed,j,k,p,r,q,ratio");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("0,50,1,2,4,2,inf,"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{MINIMAL}solver.lamda = 2\n"));
    let o = llb(
        &[
            "simulate",
            "--config",
            &cfg,
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 11") && err.contains("lamda"), "{err}");
}

#[test]
fn negative_lambda_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{MINIMAL}solver.lambda = -1\n"));
    let o = llb(&["simulate", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("λ > 0 required"));
}

#[test]
fn bad_usage_exits_2() {
    assert_eq!(llb(&["simulate"], None).status.code(), Some(2));
    assert_eq!(llb(&["convergence", "--op", "nonsense"], None).status.code(), Some(2));
    assert_eq!(llb(&["--help"], None).status.code(), Some(0));
}

#[test]
fn output_is_independent_of_thread_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("out{threads}"));
        let o = llb(
            &["simulate", "--config", &cfg, "--out", out.to_str().unwrap()],
            Some(threads),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        csvs.push(fs::read(out.join("diagnostics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}
