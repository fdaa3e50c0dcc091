use std::path::Path;
use std::process::{Command, Output};

use nloc_core::config::{canonical, parse_config, parse_provenance};

const SMALL: &str = "\
phys.coupling = 2
phys.cutoff_radius = 1
phys.cutoff_length = 2
phys.duration = 0.5
grid.d_rho = 0.1
grid.d_z = 0.05
grid.d_tau = 0.05
plan.n_runs = 12
";

fn nloc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nloc"))
        .args(args)
        .current_dir(dir)
        .env_remove("NLOC_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn oracle_flat_reports_rc_in_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "flat.cfg",
        "phys.coupling = 2\nphys.cutoff_radius = 10\nphys.cutoff_length = 30\nphys.duration = 1\n\
         plan.values = 0.02, 0.04\n",
    );
    let out = nloc(&["oracle-flat", "-c", &cfg, "-o", "-"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# r_c = 7.85398163397448"), "{text}");
    assert!(text.contains("r,d1,d2,d_quadrature,r_c\n"));
}

#[test]
fn dry_run_prints_plan_and_computes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    for sub in ["snapshot", "ipr-sweep", "convergence", "correlation", "oracle-flat"] {
        let out = nloc(&[sub, "-c", &cfg, "--dry-run", "--seed", "9"], dir.path());
        assert!(out.status.success(), "{sub}: {}", stderr(&out));
        let plan = parse_config(&stdout(&out)).unwrap();
        assert_eq!(plan.seed, 9);
        assert_eq!(plan.kind.unwrap().as_str(), sub.replace('-', "_"));
    }
    let out = nloc(&["oracle-flrw", "-c", &cfg, "--dry-run"], dir.path());
    assert_eq!(out.status.code(), Some(4), "no conformal age");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn config_errors_are_categorized() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "dup.cfg", &format!("{SMALL}phys.coupling = 3\n"));
    let out = nloc(&["ipr-sweep", "-c", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.starts_with("error[config]:"), "{err}");
    assert!(err.contains("line 9") && err.contains("line 1"), "{err}");

    let cfg = write_cfg(dir.path(), "kind.cfg", &format!("{SMALL}plan.kind = correlation\n"));
    let out = nloc(&["ipr-sweep", "-c", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).starts_with("error[params]:"));

    let out = nloc(&["ipr-sweep", "-c", "missing.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(7));
    assert!(stderr(&out).contains("missing.cfg"));

    let out = nloc(&["teleport"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn output_dir_env_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_nloc"))
        .args(["ipr-sweep", "-c", &cfg, "--values", "0, 1, 2"])
        .current_dir(dir.path())
        .env("NLOC_OUTPUT_DIR", dir.path().join("results"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let csv_path = dir.path().join("results/ipr_sweep.csv");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let sidecar = std::fs::read_to_string(dir.path().join("results/ipr_sweep.csv.plan")).unwrap();
    let plan = parse_config(&sidecar).unwrap();
    assert_eq!(canonical(&plan), sidecar);
    assert_eq!(plan.values.as_deref(), Some(&[0.0, 1.0, 2.0][..]));
    assert_eq!(parse_provenance(&csv).unwrap(), plan);
}

#[test]
fn rerun_from_embedded_plan_reproduces_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let first = nloc(&["correlation", "-c", &cfg, "--values", "0.1,0.2,0.3,0.4", "-o", "-"], dir.path());
    assert!(first.status.success(), "{}", stderr(&first));
    let csv = stdout(&first);
    let embedded = canonical(&parse_provenance(&csv).unwrap());
    let cfg2 = write_cfg(dir.path(), "b.cfg", &embedded);
    let second = nloc(&["correlation", "-c", &cfg2, "-o", "-"], dir.path());
    assert_eq!(stdout(&second), csv);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    for args in [
        vec!["ipr-sweep", "-c", &cfg, "-o", "-"],
        vec!["snapshot", "-c", &cfg, "--values", "0.1,0.5", "-o", "-"],
        vec!["convergence", "-c", &cfg, "--axis", "d_z", "--values", "0.1,0.05", "-o", "-"],
    ] {
        let mut one = vec!["--threads", "1"];
        one.extend(&args);
        let mut four = vec!["--threads", "4"];
        four.extend(&args);
        let a = nloc(&one, dir.path());
        let b = nloc(&four, dir.path());
        assert!(a.status.success(), "{}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn snapshot_writes_one_file_per_duration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = nloc(&["snapshot", "-c", &cfg, "--values", "0.1,0.5", "-o", "snap.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["snap_t0.csv", "snap_t1.csv", "snap_ipr.csv", "snap_t0.csv.plan"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let t1 = std::fs::read_to_string(dir.path().join("snap_t1.csv")).unwrap();
    assert!(t1.contains("# duration = 5.0000000000000000e-1"));
    // 12 runs x 21 output points, plus plan, version, duration and header lines
    assert_eq!(t1.lines().count(), 12 * 21 + 4);
}

#[test]
fn ipr_sweep_means_increase() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", SMALL);
    let out = nloc(&["ipr-sweep", "-c", &cfg, "--values", "0,0.5,1,2,4", "-o", "-"], dir.path());
    let text = stdout(&out);
    let means: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(means.len(), 5);
    assert_eq!(means[0], 1.0);
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

#[test]
fn selftest_passes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let out = nloc(&["selftest"], dir.path());
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    assert!(start.elapsed().as_secs() < 60);
    assert!(!stdout(&out).contains("FAIL"));
}
