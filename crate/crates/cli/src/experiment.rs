//! Running an experiment end to end, and re-analysing a saved trace.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use scsf_core::flow::{
    crossing_monotonicity_monitor, fill_rate_verdicts, length_decay_check, non_decreasing_with_slack, run_observed,
    FlowError, FlowTrace, StopStatus, TraceRow,
};
use scsf_core::ratio::DIAGNOSTIC_TOL;
use scsf_core::singularity::{analyze, SingularityReport, TypeThresholds};
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::svg::{emit_snapshot_svg, SvgError, ViewBox};
use crate::trace_io::{read_trace_csv, write_shape_csv, write_singularity_csv, write_trace_csv, TraceError};

/// Relative per-record slack for the monotone ratio sequences.
pub const MONOTONE_SLACK: f64 = 1e-4;
/// Fraction of records at which the rate bound must hold.
pub const RATE_PASS_FRACTION: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Io = 1,
    Config = 2,
    Abort = 3,
    Violation = 4,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

impl ExperimentError {
    pub fn exit(&self) -> Exit {
        match self {
            ExperimentError::Flow(FlowError::InvalidConfig { .. }) => Exit::Config,
            ExperimentError::Flow(_) => Exit::Abort,
            _ => Exit::Io,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::Io { path: path.to_path_buf(), source: e }
}

/// What the monitors know about the run besides the rows.
#[derive(Clone, Debug, Default)]
pub struct MonitorContext {
    /// Huisken's monotonicity is only a theorem for planar curves.
    pub planar: bool,
    pub length_increases: Option<u64>,
}

/// Checks every monitor whose columns are present in `rows`; returns the
/// violations in human-readable form.
pub fn check_monitors(rows: &[TraceRow], plane_ids: &[String], ctx: &MonitorContext) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(n) = ctx.length_increases.filter(|&n| n > 0) {
        v.push(format!("length did not decrease at {n} steps"));
    }
    let first_bad = |pred: &dyn Fn(&TraceRow) -> bool| rows.iter().find(|r| pred(r)).map(|r| r.step);

    let dpsi: Vec<f64> = rows.iter().filter_map(|r| r.min_dpsi).collect();
    if ctx.planar && dpsi.first().is_some_and(|&d| d > 0.0) && !non_decreasing_with_slack(&dpsi, MONOTONE_SLACK) {
        v.push("min d/psi decreased on a planar embedded curve".into());
    }

    if let Some(step) = first_bad(&|r| r.sym_ok == Some(false)) {
        v.push(format!("not symmetric two-crossing at step {step}"));
    }
    let min_i: Vec<f64> = rows.iter().filter_map(|r| r.min_i).collect();
    if let Some(step) = first_bad(&|r| r.min_i.is_some_and(|i| i <= 0.0)) {
        v.push(format!("min I is not positive at step {step}"));
    }
    if !non_decreasing_with_slack(&min_i, MONOTONE_SLACK) {
        v.push("min I decreased".into());
    }
    if !min_i.is_empty() {
        if let Some(step) = first_bad(&|r| r.min_i.is_some() && r.crossings.first().copied().flatten() != Some(2)) {
            v.push(format!("crossing count with {} differs from 2 at step {step}", plane_ids[0]));
        }
    }
    let trace = FlowTrace {
        plane_ids: plane_ids.to_vec(),
        rows: rows.to_vec(),
        status: StopStatus::MaxSteps,
        initial_length: 0.0,
        length_increases: 0,
        anchor_jumps: 0,
        final_state: None,
    };
    for (i, id) in plane_ids.iter().enumerate() {
        if !crossing_monotonicity_monitor(&trace, i).non_increasing {
            v.push(format!("crossing count with {id} increased"));
        }
    }

    let passes = |r: &TraceRow| match (r.proj_injective, r.proj_convex) {
        (Some(a), Some(b)) => Some(a && b),
        _ => None,
    };
    if rows.first().and_then(passes) == Some(true) {
        if let Some(step) = first_bad(&|r| passes(r) == Some(false)) {
            v.push(format!("projection stopped being injective and convex at step {step}"));
        }
    }

    if let Some(step) = first_bad(&|r| r.var_res1.is_some_and(|x| !(x.abs() < DIAGNOSTIC_TOL))) {
        v.push(format!("first-variation residual exceeds {DIAGNOSTIC_TOL} at step {step}"));
    }
    if let Some(step) = first_bad(&|r| r.var_res2.is_some_and(|x| !(x > -DIAGNOSTIC_TOL))) {
        v.push(format!("second-variation slack below -{DIAGNOSTIC_TOL} at step {step}"));
    }
    if let Some(step) = first_bad(&|r| r.geo_slack.is_some_and(|x| !(x >= -DIAGNOSTIC_TOL))) {
        v.push(format!("geodesic bound violated at step {step}"));
    }
    let rate: Vec<bool> = rows.iter().filter_map(|r| r.rate_ok).collect();
    if !rate.is_empty() {
        let ok = rate.iter().filter(|&&b| b).count() as f64 / rate.len() as f64;
        if ok < RATE_PASS_FRACTION {
            v.push(format!("rate bound holds at only {:.1}% of records", 100.0 * ok));
        }
    }
    if let Some(step) = first_bad(&|r| r.fenchel_slack() < -DIAGNOSTIC_TOL * r.int_k2) {
        v.push(format!("Fenchel slack negative at step {step}"));
    }
    v
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |x| format!("{x:.6}"))
}

/// The human-readable summary written to `report.txt`.
pub fn render_report(
    status: Option<&StopStatus>,
    rows: &[TraceRow],
    plane_ids: &[String],
    sing: &SingularityReport,
    violations: &[String],
) -> String {
    let mut s = String::new();
    if let Some(st) = status {
        let _ = writeln!(s, "status: {st}");
    }
    let _ = writeln!(s, "records: {}", rows.len());
    if let (Some(a), Some(b)) = (rows.first(), rows.last()) {
        let _ = writeln!(s, "t: {} .. {} (steps {} .. {})", a.t, b.t, a.step, b.step);
        let _ = writeln!(s, "length: {:.6} -> {:.6}", a.length, b.length);
        let _ = writeln!(s, "k_max: {:.6} -> {:.6}", a.k_max, b.k_max);
        let series = |f: &dyn Fn(&TraceRow) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter_map(f).collect();
            (v.first().copied(), v.iter().copied().reduce(f64::min), v.last().copied())
        };
        let (f0, m, f1) = series(&|r| r.min_dpsi);
        let _ = writeln!(s, "min d/psi: first {} min {} last {}", fmt_opt(f0), fmt_opt(m), fmt_opt(f1));
        let (f0, m, f1) = series(&|r| r.min_i);
        let _ = writeln!(s, "min I: first {} min {} last {}", fmt_opt(f0), fmt_opt(m), fmt_opt(f1));
        for (i, id) in plane_ids.iter().enumerate() {
            let c: Vec<String> = {
                let mut seq: Vec<usize> = rows.iter().filter_map(|r| r.crossings.get(i).copied().flatten()).collect();
                seq.dedup();
                seq.iter().map(|c| c.to_string()).collect()
            };
            let _ = writeln!(s, "crossings with {id}: {}", c.join(" -> "));
        }
        let r1 = rows.iter().filter_map(|r| r.var_res1.map(f64::abs)).reduce(f64::max);
        let _ = writeln!(s, "max |r1|: {}", fmt_opt(r1));
        let (_, m, _) = series(&|r| r.var_res2);
        let _ = writeln!(s, "min r2: {}", fmt_opt(m));
        let (_, m, _) = series(&|r| r.geo_slack);
        let _ = writeln!(s, "min geodesic slack: {}", fmt_opt(m));
        let rate: Vec<bool> = rows.iter().filter_map(|r| r.rate_ok).collect();
        if !rate.is_empty() {
            let _ = writeln!(s, "rate bound: {}/{} records", rate.iter().filter(|&&b| b).count(), rate.len());
        }
        let fench = rows.iter().map(|r| r.fenchel_slack() / r.int_k2).reduce(f64::min);
        let _ = writeln!(s, "min relative Fenchel slack: {}", fmt_opt(fench));
        let horizon = sing.fit.as_ref().ok().map(|f| 0.8 * f.t_est);
        let _ = writeln!(s, "length-decay residual: {}", fmt_opt(length_decay_check(rows, horizon)));
    }
    let _ = writeln!(s, "\nsingularity:");
    match &sing.fit {
        Ok(f) => {
            let _ = writeln!(s, "  T_est: {:.8} (fit residual {:.3e}, {} records)", f.t_est, f.residual, f.records_used);
        }
        Err(e) => {
            let _ = writeln!(s, "  T_est: inconclusive, {e}");
        }
    }
    let c = &sing.classification;
    let _ = writeln!(s, "  classification: {}", c.verdict);
    if c.tail_len > 0 {
        let _ = writeln!(s, "  Q tail: [{:.4}, {:.4}] over {} records", c.tail_min, c.tail_max, c.tail_len);
    }
    let _ = writeln!(s, "  final roundness: {}", fmt_opt(sing.final_roundness));
    if let Some(m) = sing.roundness_tail_monotone {
        let _ = writeln!(s, "  roundness decreasing over the final decade: {m}");
    }
    let _ = writeln!(s, "  roundness decreasing from t = {}", fmt_opt(sing.roundness_monotone_from));
    let _ = writeln!(s, "  rescaled final min d/psi: {}", fmt_opt(sing.final_min_dpsi));
    let _ = writeln!(s, "\nviolations:");
    if violations.is_empty() {
        let _ = writeln!(s, "  none");
    }
    for v in violations {
        let _ = writeln!(s, "  {v}");
    }
    s
}

#[derive(Debug)]
pub struct Outcome {
    pub exit: Exit,
    pub status: Option<StopStatus>,
    pub records: usize,
    pub violations: Vec<String>,
    pub report: String,
    pub singularity: Option<SingularityReport>,
}

fn snapshot_due(times: &[f64], done: &mut usize, t: f64) -> bool {
    let mut due = false;
    while *done < times.len() && times[*done] <= t {
        *done += 1;
        due = true;
    }
    due
}

/// Runs the flow described by `cfg` and writes everything under `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig, quiet: bool) -> Result<Outcome, ExperimentError> {
    let out = &cfg.output;
    std::fs::create_dir_all(&out.dir).map_err(io_err(&out.dir))?;
    let echo = out.dir.join("config.echo");
    std::fs::write(&echo, cfg.echo()).map_err(io_err(&echo))?;
    let snap_dir = out.dir.join("snapshots");
    if out.snapshots {
        std::fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    }

    let mut times = out.snapshot_times.clone();
    times.sort_by(f64::total_cmp);
    let mut done = 0;
    let mut boxes: Option<Vec<ViewBox>> = None;
    let mut io_failure: Option<ExperimentError> = None;
    let mut draw = |curve: &scsf_core::Curve, step: u64| -> Result<(), ExperimentError> {
        if boxes.is_none() {
            boxes = Some(out.views.iter().map(|&v| ViewBox::around(curve, v)).collect::<Result<_, _>>()?);
        }
        for (view, vb) in out.views.iter().zip(boxes.as_ref().unwrap()) {
            let path = snap_dir.join(format!("step{step:09}_{}.svg", view.name().replace(':', "-")));
            emit_snapshot_svg(curve, *view, vb, &path)?;
        }
        Ok(())
    };

    let result = run_observed(&cfg.flow, |state, row| {
        if !quiet {
            eprintln!(
                "t = {:.6e}  step {:>9}  L = {:.6}  k_max = {:.4e}{}",
                row.t,
                row.step,
                row.length,
                row.k_max,
                row.min_i.map_or(String::new(), |i| format!("  min I = {i:.6}"))
            );
        }
        let due = snapshot_due(&times, &mut done, state.t);
        if out.snapshots && io_failure.is_none() && (state.step == 0 || due) {
            if let Err(e) = draw(&state.curve, state.step) {
                io_failure = Some(e);
            }
        }
    });
    if let Some(e) = io_failure {
        return Err(e);
    }
    let mut trace = match result {
        Ok(t) => t,
        Err(e @ FlowError::Symmetry { .. }) => {
            let violations = vec![e.to_string()];
            let report = format!("status: refused\n\nviolations:\n  {e}\n");
            if out.report {
                let p = out.dir.join("report.txt");
                std::fs::write(&p, &report).map_err(io_err(&p))?;
            }
            return Ok(Outcome { exit: Exit::Violation, status: None, records: 0, violations, report, singularity: None });
        }
        Err(e) => return Err(e.into()),
    };
    info!("finished: {}", trace.status);
    if let (true, Some(state)) = (out.snapshots, trace.final_state.as_ref()) {
        draw(&state.curve, state.step)?;
    }

    fill_rate_verdicts(&mut trace.rows, cfg.rate_tol);
    let final_curve = trace.final_state.as_ref().map(|s| (&s.curve, s.t));
    let sing = analyze(&trace.rows, final_curve, &cfg.thresholds);
    let ctx = MonitorContext { planar: cfg.planar(), length_increases: Some(trace.length_increases) };
    let violations = check_monitors(&trace.rows, &trace.plane_ids, &ctx);
    let report = render_report(Some(&trace.status), &trace.rows, &trace.plane_ids, &sing, &violations);
    write_outputs(cfg, &trace, &sing, &report)?;

    let exit = if matches!(trace.status, StopStatus::Aborted(_)) {
        Exit::Abort
    } else if !violations.is_empty() {
        Exit::Violation
    } else {
        Exit::Ok
    };
    Ok(Outcome {
        exit,
        status: Some(trace.status.clone()),
        records: trace.rows.len(),
        violations,
        report,
        singularity: Some(sing),
    })
}

fn write_outputs(cfg: &ExperimentConfig, trace: &FlowTrace, sing: &SingularityReport, report: &str) -> Result<(), ExperimentError> {
    let dir = &cfg.output.dir;
    if cfg.output.trace {
        write_trace_csv(&dir.join("trace.csv"), &trace.plane_ids, &trace.rows)?;
        write_shape_csv(&dir.join("shape.csv"), &trace.rows)?;
        write_singularity_csv(&dir.join("singularity.csv"), sing)?;
    }
    if cfg.output.report {
        let p = dir.join("report.txt");
        std::fs::write(&p, report).map_err(io_err(&p))?;
    }
    Ok(())
}

/// Re-runs the post-processing on a saved `trace.csv`. A sibling `shape.csv`
/// is picked up when present; without it the roundness series and the
/// planar Huisken check are unavailable.
pub fn replay(trace_path: &Path, thresholds: &TypeThresholds) -> Result<Outcome, ExperimentError> {
    let shape = trace_path.with_file_name("shape.csv");
    let shape = shape.exists().then_some(shape);
    let (plane_ids, mut rows) = read_trace_csv(trace_path, shape.as_deref())?;
    if rows.iter().any(|r| r.min_i.is_some()) {
        for r in &mut rows {
            r.sym_ok = Some(r.min_i.is_some());
        }
    }
    let planar = !rows.is_empty() && rows.iter().all(|r| r.shape.as_ref().is_some_and(|s| s.planarity_defect == 0.0));
    let sing = analyze(&rows, None, thresholds);
    let violations = check_monitors(&rows, &plane_ids, &MonitorContext { planar, length_increases: None });
    let report = render_report(None, &rows, &plane_ids, &sing, &violations);
    Ok(Outcome {
        exit: if violations.is_empty() { Exit::Ok } else { Exit::Violation },
        status: None,
        records: rows.len(),
        violations,
        report,
        singularity: Some(sing),
    })
}
