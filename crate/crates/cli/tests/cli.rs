use std::path::{Path, PathBuf};
use std::process::Command;

use scsf_cli::config::parse_config_str;
use scsf_cli::experiment::Exit;
use scsf_cli::trace_io::read_trace_csv;
use scsf_cli::{parse_config, replay, run_experiment, ExperimentConfig};
use scsf_core::singularity::{SingularityType, TypeThresholds};
use scsf_core::FourierTerm;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scsf(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_scsf")).args(args).arg("--quiet").status().unwrap().code().unwrap()
}

fn with_dir(mut cfg: ExperimentConfig, dir: &Path) -> ExperimentConfig {
    cfg.output.dir = dir.to_path_buf();
    cfg
}

const SHORT_CIRCLE: &str = "
[curve]
x = cos u
y = sin u
n = 128
[flow]
record_every = 50
max_steps = 1500
[output]
snapshot_times = 0 0.05
views = xy
";

#[test]
fn circle_run_writes_one_row_per_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_dir(parse_config(&configs().join("circle.conf")).unwrap(), dir.path());
    let out = run_experiment(&cfg, true).unwrap();
    assert_eq!(out.exit, Exit::Ok, "{}", out.report);
    let (ids, rows) = read_trace_csv(&dir.path().join("trace.csv"), None).unwrap();
    assert_eq!(ids, vec!["y0".to_string()]);
    assert_eq!(rows.len(), out.records);
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(text.starts_with(
        "t,step,L,k_max,int_k2,min_dpsi,min_I,argmin_s0,crossings_y0,proj_injective,proj_convex,sym_defect,var_res1,var_res2,geo_slack,rate_ok\n"
    ));
    assert_eq!(out.singularity.unwrap().classification.verdict, SingularityType::TypeI);
    assert!(dir.path().join("report.txt").exists());
    assert!(dir.path().join("snapshots").read_dir().unwrap().count() >= 3);
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(SHORT_CIRCLE).unwrap();
    for d in [&a, &b] {
        let out = run_experiment(&with_dir(cfg.clone(), d.path()), true).unwrap();
        assert_eq!(out.exit, Exit::Ok);
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "trace.csv"), read(&b, "trace.csv"));
    let names: Vec<_> = std::fs::read_dir(a.path().join("snapshots")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!names.is_empty());
    for n in names {
        let f = Path::new("snapshots").join(n);
        assert_eq!(read(&a, f.to_str().unwrap()), read(&b, f.to_str().unwrap()));
    }
}

#[test]
fn config_echo_is_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = parse_config_str("[curve]\nx = cos u\ny = sin u\nn = 64\n[flow]\nmax_steps = 1\n").unwrap();
    run_experiment(&with_dir(cfg.clone(), a.path()), true).unwrap();
    run_experiment(&with_dir(cfg.clone(), b.path()), true).unwrap();
    let ea = std::fs::read_to_string(a.path().join("config.echo")).unwrap();
    let eb = std::fs::read_to_string(b.path().join("config.echo")).unwrap();
    assert_eq!(ea.replace(&a.path().display().to_string(), "D"), eb.replace(&b.path().display().to_string(), "D"));
    assert!(ea.contains("sigma = 0.25"));
}

#[test]
fn crown_config_has_the_expected_coefficients() {
    let cfg = parse_config(&configs().join("crown.conf")).unwrap();
    let c = &cfg.flow.spec.coords;
    assert_eq!(c[0], vec![FourierTerm::cos(1, 1.0)]);
    assert_eq!(c[1], vec![FourierTerm::sin(1, 0.3)]);
    assert_eq!(c[2], vec![FourierTerm::cos(2, 0.5), FourierTerm::cos(4, 0.5), FourierTerm::cos(6, 0.5)]);
    assert_eq!(cfg.flow.n, 1024);
    let ids: Vec<&str> = cfg.flow.planes.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(ids, ["y0", "x0"]);
    assert!(cfg.flow.monitors.symmetric && cfg.flow.monitors.projection);
}

#[test]
fn asymmetric_curve_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[curve]\nx = cos u\ny = sin u + 0.2 cos 2u\nn = 128\n[monitors]\nsymmetric = true\n";
    let cfg = with_dir(parse_config_str(text).unwrap(), dir.path());
    let out = run_experiment(&cfg, true).unwrap();
    assert_eq!(out.exit, Exit::Violation);
    assert!(out.violations[0].contains("not symmetric two-crossing"), "{:?}", out.violations);
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("not symmetric two-crossing"));
}

#[test]
fn collapse_is_a_flow_abort() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[curve]\nx = cos u\ny = sin u\nn = 64\n[flow]\nrecord_every = 1000\nrecord_length_drop = none\n\
                min_length_fraction = none\ncurvature_cap = none\nmax_time = 10\n[monitors]\nhuisken = false\n\
                diagnostics = false\n[output]\nsnapshots = false\n";
    let cfg = with_dir(parse_config_str(text).unwrap(), dir.path());
    let out = run_experiment(&cfg, true).unwrap();
    assert_eq!(out.exit, Exit::Abort, "{}", out.report);
    assert!(out.report.contains("aborted"));
}

#[test]
fn replay_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_dir(parse_config(&configs().join("circle.conf")).unwrap(), dir.path());
    let ran = run_experiment(&cfg, true).unwrap();
    let again = replay(&dir.path().join("trace.csv"), &TypeThresholds::default()).unwrap();
    assert_eq!(again.exit, Exit::Ok, "{}", again.report);
    let (a, b) = (ran.singularity.unwrap(), again.singularity.unwrap());
    assert_eq!(a.fit, b.fit);
    assert_eq!(a.classification, b.classification);
    assert_eq!(a.roundness_series, b.roundness_series);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["circle", "ellipse", "crown", "sturm"] {
        let p = configs().join(format!("{name}.conf"));
        assert_eq!(scsf(&["check", p.to_str().unwrap()]), 0, "{name}");
    }
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "[curve]\nx = cos u\ny = sin u\nn = 128\n[flow]\nsigma = 0.9\n").unwrap();
    assert_eq!(scsf(&["check", bad.to_str().unwrap()]), 2);
    assert_eq!(scsf(&["run", bad.to_str().unwrap()]), 2);

    let good = dir.path().join("good.conf");
    std::fs::write(&good, SHORT_CIRCLE).unwrap();
    let out = dir.path().join("out");
    assert_eq!(scsf(&["run", good.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    assert_eq!(scsf(&["replay", out.join("trace.csv").to_str().unwrap()]), 0);
    assert_eq!(scsf(&["replay", bad.to_str().unwrap()]), 2);
}
