//! Explicit time stepping of `γ_t = γ_ss` with periodic anchored resampling
//! and the per-record monitors.

use std::f64::consts::PI;

use log::{debug, warn};
use thiserror::Error;

use crate::curve::{curvature_profile, dist, integral_k_squared, Curve, CurveError};
use crate::fourier::{synthesize_fourier_curve, FourierSpec};
use crate::projection::is_one_to_one_convex_projection;
use crate::ratio::{diagnose_minimum, min_huisken_ratio, min_symmetric_ratio};
use crate::singularity::{shape_stats, ShapeStats};
use crate::symmetry::{
    build_symmetric_pairing_near, count_plane_crossings, refine_crossing, symmetrize_curve, symmetry_defect, Hyperplane,
    SymmetryError, DEFAULT_SYMMETRY_TOL,
};
use crate::PeriodicSpline;

pub const MIN_FLOW_VERTICES: usize = 64;
pub const MIN_TIMESTEP: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("collision/degeneracy at step {step}: {source}")]
    Collision { step: u64, source: CurveError },
    #[error("timestep collapse at step {step}: dt = {dt:e}")]
    TimestepCollapse { step: u64, dt: f64 },
    #[error("initial curve: {0}")]
    InitialCurve(#[from] CurveError),
    #[error("plane `{plane}`: {source}")]
    Symmetry { plane: String, source: SymmetryError },
}

/// A hyperplane with the identifier used in trace column names.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedPlane {
    pub id: String,
    pub plane: Hyperplane,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StopConditions {
    pub max_steps: Option<u64>,
    pub max_time: Option<f64>,
    /// Stop once `L ≤ fraction · L(0)`.
    pub min_length_fraction: Option<f64>,
    /// Stop once `k_max ≥ factor / L(0)`. The cap only arms after `k_max`
    /// has been below it, so initial data that is already sharper than the
    /// cap is allowed to smooth out first.
    pub curvature_cap_factor: Option<f64>,
}

impl Default for StopConditions {
    fn default() -> Self {
        StopConditions {
            max_steps: None,
            max_time: None,
            min_length_fraction: Some(0.05),
            curvature_cap_factor: Some(200.0),
        }
    }
}

impl StopConditions {
    fn is_empty(&self) -> bool {
        self.max_steps.is_none()
            && self.max_time.is_none()
            && self.min_length_fraction.is_none()
            && self.curvature_cap_factor.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monitors {
    /// Global minimum of `d/ψ`.
    pub huisken: bool,
    /// Symmetric ratio `I` with respect to the first plane.
    pub symmetric: bool,
    pub projection: bool,
    /// Variation residuals, geodesic slack and rate bound at the minimum of `I`.
    pub diagnostics: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors { huisken: true, symmetric: false, projection: false, diagnostics: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub spec: FourierSpec,
    pub n: usize,
    pub sigma: f64,
    pub resample_every: u64,
    /// Reflect-average through every plane after each resample.
    pub symmetrize: bool,
    pub planes: Vec<NamedPlane>,
    pub record_every: u64,
    /// Also record once the length has dropped by this fraction since the last record.
    pub record_length_drop: Option<f64>,
    pub stop: StopConditions,
    pub monitors: Monitors,
}

impl FlowConfig {
    pub fn new(spec: FourierSpec, n: usize) -> Self {
        FlowConfig {
            spec,
            n,
            sigma: 0.25,
            resample_every: 25,
            symmetrize: false,
            planes: Vec::new(),
            record_every: 100,
            record_length_drop: Some(0.01),
            stop: StopConditions::default(),
            monitors: Monitors::default(),
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |field, reason: String| Err(FlowError::InvalidConfig { field, reason });
        if !(self.sigma > 0.0 && self.sigma <= 0.5) {
            return bad("sigma", format!("must lie in (0, 0.5], got {}", self.sigma));
        }
        if self.n < MIN_FLOW_VERTICES {
            return bad("n", format!("must be at least {MIN_FLOW_VERTICES}, got {}", self.n));
        }
        if self.resample_every == 0 {
            return bad("resample_every", "must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every", "must be positive".into());
        }
        if let Some(f) = self.record_length_drop {
            if !(f > 0.0 && f < 1.0) {
                return bad("record_length_drop", format!("must lie in (0, 1), got {f}"));
            }
        }
        if self.stop.is_empty() {
            return bad("stop", "at least one stop condition is required".into());
        }
        if let Some(f) = self.stop.min_length_fraction {
            if !(f > 0.0 && f < 1.0) {
                return bad("min_length_fraction", format!("must lie in (0, 1), got {f}"));
            }
        }
        if let Some(f) = self.stop.curvature_cap_factor {
            if !(f > 0.0) {
                return bad("curvature_cap", format!("must be positive, got {f}"));
            }
        }
        if let Some(t) = self.stop.max_time {
            if !(t > 0.0) {
                return bad("max_time", format!("must be positive, got {t}"));
            }
        }
        if let Err(e) = self.spec.validate() {
            return bad("curve", e.to_string());
        }
        for p in &self.planes {
            if p.plane.dim() != self.spec.dim() {
                return bad("planes", format!("plane `{}` has dimension {}, curve has {}", p.id, p.plane.dim(), self.spec.dim()));
            }
        }
        if self.monitors.symmetric && self.planes.is_empty() {
            return bad("monitors", "the symmetric ratio needs at least one plane".into());
        }
        if self.symmetrize && self.planes.is_empty() {
            return bad("symmetrize", "needs at least one plane".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub curve: Curve,
    pub step: u64,
    /// Curvature vectors, flat, one per vertex.
    pub k_vectors: Vec<f64>,
    pub k: Vec<f64>,
    /// Position of the tracked crossing `A(t)` with the first plane.
    pub anchor: Option<Vec<f64>>,
}

impl FlowState {
    pub fn new(curve: Curve, anchor: Option<Vec<f64>>) -> Self {
        let (k_vectors, k) = curvature_profile(&curve);
        FlowState { t: 0.0, curve, step: 0, k_vectors, k, anchor }
    }

    pub fn k_max(&self) -> f64 {
        self.k.iter().copied().fold(0.0, f64::max)
    }

    pub fn int_k2(&self) -> f64 {
        integral_k_squared(&self.curve, &self.k)
    }
}

/// `∫ k² ds - 4π²/L`, nonnegative by Hölder and Fenchel.
pub fn fenchel_check(state: &FlowState) -> f64 {
    state.int_k2() - 4.0 * PI * PI / state.curve.length()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub step: u64,
    pub length: f64,
    pub k_max: f64,
    pub int_k2: f64,
    pub min_dpsi: Option<f64>,
    pub min_i: Option<f64>,
    pub argmin_s0: Option<f64>,
    /// Per plane; `None` marks a tangential contact.
    pub crossings: Vec<Option<usize>>,
    pub proj_injective: Option<bool>,
    pub proj_convex: Option<bool>,
    pub sym_defect: Option<f64>,
    /// The state was still symmetric two-crossing for the first plane.
    pub sym_ok: Option<bool>,
    pub var_res1: Option<f64>,
    pub var_res2: Option<f64>,
    pub geo_slack: Option<f64>,
    pub rate_bound: Option<f64>,
    /// Filled after the run from neighbouring records; see [`fill_rate_verdicts`].
    pub rate_ok: Option<bool>,
    pub shape: Option<ShapeStats>,
}

impl TraceRow {
    pub fn fenchel_slack(&self) -> f64 {
        self.int_k2 - 4.0 * PI * PI / self.length
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopStatus {
    MaxSteps,
    MaxTime,
    LengthFloor,
    CurvatureCap,
    Aborted(FlowError),
}

impl std::fmt::Display for StopStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopStatus::MaxSteps => f.write_str("reached max steps"),
            StopStatus::MaxTime => f.write_str("reached max time"),
            StopStatus::LengthFloor => f.write_str("length floor"),
            StopStatus::CurvatureCap => f.write_str("curvature cap"),
            StopStatus::Aborted(e) => write!(f, "aborted: {e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrace {
    pub plane_ids: Vec<String>,
    pub rows: Vec<TraceRow>,
    pub status: StopStatus,
    pub initial_length: f64,
    /// Steps after which the length did not decrease.
    pub length_increases: u64,
    /// Resamples where the tracked crossing moved by more than ten mean edges.
    pub anchor_jumps: u64,
    pub final_state: Option<FlowState>,
}

fn tracked_crossing(curve: &Curve, plane: &Hyperplane, previous: Option<&[f64]>) -> Option<(usize, Vec<f64>)> {
    let set = count_plane_crossings(curve, plane).ok()?;
    let c = match previous {
        Some(prev) => set
            .crossings
            .iter()
            .min_by(|a, b| dist(&a.position, prev).total_cmp(&dist(&b.position, prev)))?,
        None => set.crossings.iter().find(|c| c.rising).or(set.crossings.first())?,
    };
    Some((c.segment, c.position.clone()))
}

/// Resamples to `n` equal chords starting at the tracked crossing (or at vertex 0).
fn anchored_resample(curve: &Curve, n: usize, plane: Option<&Hyperplane>, anchor: Option<&[f64]>) -> Result<(Curve, Option<Vec<f64>>), CurveError> {
    let spline = PeriodicSpline::new(curve);
    let start = plane.and_then(|p| tracked_crossing(curve, p, anchor).map(|(seg, _)| (p, seg)));
    let tau0 = match start {
        Some((p, seg)) => refine_crossing(&spline, p, curve, seg),
        None => 0.0,
    };
    let out = Curve::new(curve.dim(), spline.equal_chord_points(tau0, n))?;
    let anchor = start.map(|_| out.point(0).to_vec());
    Ok((out, anchor))
}

/// Initial state: the spec sampled at `N` points and resampled to equal chords.
pub fn initial_state(config: &FlowConfig) -> Result<FlowState, FlowError> {
    config.validate()?;
    let raw = synthesize_fourier_curve(&FourierSpec { samples: config.n, ..config.spec.clone() })?;
    let plane = config.planes.first().map(|p| &p.plane);
    let (curve, anchor) = anchored_resample(&raw, config.n, plane, None)?;
    Ok(FlowState::new(curve, anchor))
}

/// One forward Euler step with `Δt = σ (min Δs)²`, then resampling and
/// symmetrization on the configured cadence.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState, FlowError> {
    let curve = &state.curve;
    let h = curve.min_segment_length();
    let dt = config.sigma * h * h;
    if !(dt >= MIN_TIMESTEP) {
        return Err(FlowError::TimestepCollapse { step: state.step, dt });
    }
    let coords: Vec<f64> = curve.coords().iter().zip(&state.k_vectors).map(|(x, k)| x + dt * k).collect();
    let next_step = state.step + 1;
    let collision = |source| FlowError::Collision { step: next_step, source };
    let mut next = Curve::new(curve.dim(), coords).map_err(collision)?;
    let mut anchor = state.anchor.clone();
    if next_step % config.resample_every == 0 {
        let plane = config.planes.first().map(|p| &p.plane);
        let (c, a) = anchored_resample(&next, config.n, plane, anchor.as_deref()).map_err(collision)?;
        next = c;
        anchor = a.or(anchor);
        if config.symmetrize {
            let planes: Vec<Hyperplane> = config.planes.iter().map(|p| p.plane.clone()).collect();
            next = symmetrize_curve(&next, &planes).map_err(|e| FlowError::Symmetry {
                plane: config.planes[0].id.clone(),
                source: e,
            })?;
        }
    }
    let (k_vectors, k) = curvature_profile(&next);
    Ok(FlowState { t: state.t + dt, curve: next, step: next_step, k_vectors, k, anchor })
}

/// Evaluates every enabled monitor on `state`.
pub fn record(state: &FlowState, config: &FlowConfig) -> TraceRow {
    let curve = &state.curve;
    let mut row = TraceRow {
        t: state.t,
        step: state.step,
        length: curve.length(),
        k_max: state.k_max(),
        int_k2: state.int_k2(),
        shape: shape_stats(curve).ok(),
        ..TraceRow::default()
    };
    row.crossings = config
        .planes
        .iter()
        .map(|p| match count_plane_crossings(curve, &p.plane) {
            Ok(set) => Some(set.count()),
            Err(e) => {
                warn!("step {}: plane {}: {e}", state.step, p.id);
                None
            }
        })
        .collect();
    if !config.planes.is_empty() {
        row.sym_defect = config
            .planes
            .iter()
            .filter_map(|p| symmetry_defect(curve, &p.plane).ok())
            .reduce(f64::max);
    }
    if config.monitors.huisken {
        row.min_dpsi = Some(min_huisken_ratio(curve).min);
    }
    if config.monitors.projection {
        let report = is_one_to_one_convex_projection(curve);
        row.proj_injective = Some(report.as_ref().is_ok_and(|r| r.injective));
        row.proj_convex = Some(report.as_ref().is_ok_and(|r| r.convex));
    }
    if config.monitors.symmetric {
        let plane = &config.planes[0].plane;
        match build_symmetric_pairing_near(curve, plane, DEFAULT_SYMMETRY_TOL, state.anchor.as_deref()) {
            Ok(pairing) => {
                row.sym_ok = Some(true);
                let rep = min_symmetric_ratio(&pairing);
                row.min_i = Some(rep.min);
                row.argmin_s0 = Some(rep.s0);
                if config.monitors.diagnostics {
                    if let Some(d) = diagnose_minimum(&pairing, &rep) {
                        row.var_res1 = Some(d.variation.r1);
                        row.var_res2 = Some(d.variation.r2);
                        row.geo_slack = Some(d.geodesic.slack);
                        row.rate_bound = Some(d.rate_bound);
                    }
                }
            }
            Err(e) => {
                warn!("step {}: symmetric monitor: {e}", state.step);
                row.sym_ok = Some(false);
            }
        }
    }
    row
}

/// Runs the flow to the first stop condition, calling `observe` on every
/// recorded state.
pub fn run_observed(config: &FlowConfig, mut observe: impl FnMut(&FlowState, &TraceRow)) -> Result<FlowTrace, FlowError> {
    let mut state = initial_state(config)?;
    if config.monitors.symmetric {
        let p = &config.planes[0];
        build_symmetric_pairing_near(&state.curve, &p.plane, DEFAULT_SYMMETRY_TOL, None)
            .map_err(|e| FlowError::Symmetry { plane: p.id.clone(), source: e })?;
    }
    let l0 = state.curve.length();
    let cap = config.stop.curvature_cap_factor.map(|f| f / l0);
    let mut cap_armed = cap.is_some_and(|c| state.k_max() < c);
    let mut trace = FlowTrace {
        plane_ids: config.planes.iter().map(|p| p.id.clone()).collect(),
        rows: Vec::new(),
        status: StopStatus::MaxSteps,
        initial_length: l0,
        length_increases: 0,
        anchor_jumps: 0,
        final_state: None,
    };
    let mut last_recorded = None;
    let mut last_recorded_length = f64::INFINITY;
    loop {
        let status = if config.stop.max_steps.is_some_and(|m| state.step >= m) {
            Some(StopStatus::MaxSteps)
        } else if config.stop.max_time.is_some_and(|m| state.t >= m) {
            Some(StopStatus::MaxTime)
        } else if config.stop.min_length_fraction.is_some_and(|f| state.curve.length() <= f * l0) {
            Some(StopStatus::LengthFloor)
        } else if cap_armed && cap.is_some_and(|c| state.k_max() >= c) {
            Some(StopStatus::CurvatureCap)
        } else {
            None
        };
        if let Some(status) = status {
            if state.step > 0 && last_recorded != Some(state.step) {
                let row = record(&state, config);
                observe(&state, &row);
                trace.rows.push(row);
            }
            trace.status = status;
            break;
        }
        let on_cadence = state.step % config.record_every == 0;
        let dropped = config
            .record_length_drop
            .is_some_and(|f| state.curve.length() <= (1.0 - f) * last_recorded_length);
        if (on_cadence || dropped) && last_recorded != Some(state.step) {
            let row = record(&state, config);
            observe(&state, &row);
            trace.rows.push(row);
            last_recorded = Some(state.step);
            last_recorded_length = state.curve.length();
        }
        let next = match step(&state, config) {
            Ok(s) => s,
            Err(e) => {
                warn!("{e}");
                trace.status = StopStatus::Aborted(e);
                break;
            }
        };
        if next.curve.length() >= state.curve.length() {
            trace.length_increases += 1;
        }
        if let (Some(a), Some(b)) = (&state.anchor, &next.anchor) {
            if dist(a, b) > 10.0 * next.curve.length() / config.n as f64 {
                debug!("anchor jump at step {}", next.step);
                trace.anchor_jumps += 1;
            }
        }
        if let Some(c) = cap {
            cap_armed |= next.k_max() < c;
        }
        state = next;
    }
    trace.final_state = Some(state);
    Ok(trace)
}

pub fn run(config: &FlowConfig) -> Result<FlowTrace, FlowError> {
    run_observed(config, |_, _| {})
}

/// Largest relative mismatch between the central-difference `dL/dt` and
/// `-∫k² ds` over interior records with `t ≤ t_max`; `None` with fewer than
/// three rows.
pub fn length_decay_check(rows: &[TraceRow], t_max: Option<f64>) -> Option<f64> {
    if rows.len() < 3 {
        return None;
    }
    rows.windows(3)
        .filter(|w| t_max.is_none_or(|m| w[2].t <= m))
        .map(|w| {
            let dl = (w[2].length - w[0].length) / (w[2].t - w[0].t);
            let expected = -w[1].int_k2;
            ((dl - expected) / expected).abs()
        })
        .reduce(f64::max)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossingVerdict {
    pub non_increasing: bool,
    pub skipped: usize,
    pub first: Option<usize>,
    pub last: Option<usize>,
}

/// Is the recorded crossing count with plane `plane_index` non-increasing?
/// Tangential-contact rows are skipped.
pub fn crossing_monotonicity_monitor(trace: &FlowTrace, plane_index: usize) -> CrossingVerdict {
    let counts: Vec<Option<usize>> = trace.rows.iter().map(|r| r.crossings.get(plane_index).copied().flatten()).collect();
    let skipped = counts.iter().filter(|c| c.is_none()).count();
    if skipped > 0 {
        warn!("crossing monitor: skipped {skipped} rows with tangential contact");
    }
    let seq: Vec<usize> = counts.into_iter().flatten().collect();
    CrossingVerdict {
        non_increasing: seq.windows(2).all(|w| w[1] <= w[0]),
        skipped,
        first: seq.first().copied(),
        last: seq.last().copied(),
    }
}

/// Compares the central-difference time derivative of `min I` at every
/// interior record with the rate lower bound recorded there.
pub fn fill_rate_verdicts(rows: &mut [TraceRow], tol: f64) {
    let n = rows.len();
    for i in 1..n.saturating_sub(1) {
        let (Some(a), Some(b), Some(bound)) = (rows[i - 1].min_i, rows[i + 1].min_i, rows[i].rate_bound) else {
            continue;
        };
        let observed = (b - a) / (rows[i + 1].t - rows[i - 1].t);
        rows[i].rate_ok = Some(observed >= bound - tol * bound.abs().max(1.0));
    }
}

/// Whether consecutive values never drop by more than `slack · current`.
pub fn non_decreasing_with_slack(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - slack * w[1].abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierTerm;

    fn circle_config(n: usize) -> FlowConfig {
        let mut c = FlowConfig::new(FourierSpec::circle(1.0, 2, n), n);
        c.monitors = Monitors { huisken: false, symmetric: false, projection: false, diagnostics: false };
        c
    }

    #[test]
    fn validation() {
        let mut c = circle_config(64);
        assert!(c.validate().is_ok());
        c.sigma = 0.9;
        assert!(matches!(c.validate(), Err(FlowError::InvalidConfig { field: "sigma", .. })));
        let mut c = circle_config(32);
        assert!(c.validate().is_err());
        c.n = 64;
        c.stop = StopConditions { max_steps: None, max_time: None, min_length_fraction: None, curvature_cap_factor: None };
        assert!(c.validate().is_err());
        let mut c = circle_config(64);
        c.monitors.symmetric = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_steps_gives_empty_trace() {
        let mut c = circle_config(64);
        c.stop.max_steps = Some(0);
        let trace = run(&c).unwrap();
        assert!(trace.rows.is_empty());
        assert_eq!(trace.status, StopStatus::MaxSteps);
    }

    #[test]
    fn circle_shrinks_like_the_exact_solution() {
        let mut c = circle_config(128);
        c.stop.max_time = Some(0.25);
        c.record_every = 50;
        let trace = run(&c).unwrap();
        assert_eq!(trace.status, StopStatus::MaxTime);
        let s = trace.final_state.as_ref().unwrap();
        let exact = 2.0 * PI * (1.0 - 2.0 * s.t).sqrt();
        assert!((s.curve.length() / exact - 1.0).abs() < 5e-3);
        assert!(trace.rows.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(trace.length_increases, 0);
    }

    #[test]
    fn planar_data_stays_planar() {
        let spec = FourierSpec::new(
            vec![
                vec![FourierTerm::cos(1, 1.0)],
                vec![FourierTerm::sin(1, 0.6), FourierTerm::sin(2, 0.1)],
                vec![],
            ],
            128,
        );
        let mut c = FlowConfig::new(spec, 128);
        c.stop.max_steps = Some(400);
        let trace = run(&c).unwrap();
        let s = trace.final_state.unwrap();
        assert!(s.curve.points().all(|p| p[2] == 0.0));
    }

    #[test]
    fn fenchel_slack_vanishes_on_circles() {
        for r in [0.5, 1.0, 3.0] {
            let mut c = circle_config(256);
            c.spec = FourierSpec::circle(r, 2, 256);
            let s = initial_state(&c).unwrap();
            let rel = fenchel_check(&s) / (4.0 * PI * PI / s.curve.length());
            assert!(rel.abs() < 1e-3, "{rel}");
        }
    }

    #[test]
    fn slack_monotonicity_helper() {
        assert!(non_decreasing_with_slack(&[0.5, 0.6, 0.59999, 0.7], 1e-4));
        assert!(!non_decreasing_with_slack(&[0.5, 0.6, 0.59, 0.7], 1e-4));
    }
}
