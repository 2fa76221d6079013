//! Blow-up time estimation, Type I/II classification and parabolic rescaling.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::curve::{dist, Curve, CurveError};
use crate::flow::TraceRow;
use crate::ratio::min_huisken_ratio;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularityError {
    #[error("curve collapses onto its centroid (min radius {0:e})")]
    Degenerate(f64),
    #[error("rescaling needs t < T_est (t = {t}, T_est = {t_est})")]
    PastSingularTime { t: f64, t_est: f64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeStats {
    /// `max |γ_i - c| / min |γ_i - c|`.
    pub roundness: f64,
    pub max_radius: f64,
    pub min_radius: f64,
    pub mean_radius: f64,
    /// Third covariance eigenvalue over the largest; 0 for planar point clouds.
    pub planarity_defect: f64,
}

pub fn shape_stats(curve: &Curve) -> Result<ShapeStats, SingularityError> {
    let c = curve.centroid();
    let radii: Vec<f64> = curve.points().map(|p| dist(p, &c)).collect();
    let max_radius = radii.iter().copied().fold(0.0, f64::max);
    let min_radius = radii.iter().copied().fold(f64::INFINITY, f64::min);
    if min_radius <= 1e-12 * curve.length() {
        return Err(SingularityError::Degenerate(min_radius));
    }
    let mean_radius = radii.iter().sum::<f64>() / radii.len() as f64;
    Ok(ShapeStats {
        roundness: max_radius / min_radius,
        max_radius,
        min_radius,
        mean_radius,
        planarity_defect: planarity_defect(curve, &c),
    })
}

fn planarity_defect(curve: &Curve, c: &[f64]) -> f64 {
    let dim = curve.dim();
    if dim < 3 {
        return 0.0;
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for p in curve.points() {
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += (p[a] - c[a]) * (p[b] - c[b]);
            }
        }
    }
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 0.0 {
        return 0.0;
    }
    ev[2].max(0.0) / ev[0]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Roundness {
    pub shape: ShapeStats,
    pub min_dpsi: f64,
}

/// Roundness, planarity and the global minimum of `d/ψ`.
pub fn roundness(curve: &Curve) -> Result<Roundness, SingularityError> {
    Ok(Roundness { shape: shape_stats(curve)?, min_dpsi: min_huisken_ratio(curve).min })
}

/// `(γ - c) / √(2(T_est - t))` about the centroid `c`.
pub fn rescale_curve(curve: &Curve, t: f64, t_est: f64) -> Result<Curve, SingularityError> {
    if !(t < t_est) {
        return Err(SingularityError::PastSingularTime { t, t_est });
    }
    let c = curve.centroid();
    let scale = 1.0 / (2.0 * (t_est - t)).sqrt();
    Ok(curve.map_points(|p, out| {
        for k in 0..p.len() {
            out[k] = (p[k] - c[k]) * scale;
        }
    })?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupFit {
    pub t_est: f64,
    /// `√(SSE/SST)` of the linear fit.
    pub residual: f64,
    /// Fitted `-d(1/k²)/dt`.
    pub slope: f64,
    pub records_used: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inconclusive {
    TooFewRecords(usize),
    CurvatureNotIncreasing,
    DegenerateFit,
}

impl std::fmt::Display for Inconclusive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Inconclusive::TooFewRecords(n) => write!(f, "too few records ({n})"),
            Inconclusive::CurvatureNotIncreasing => write!(f, "k_max is not increasing over the tail"),
            Inconclusive::DegenerateFit => write!(f, "1/k_max^2 is not decreasing in t"),
        }
    }
}

pub const MIN_FIT_RECORDS: usize = 20;

/// Least-squares fit of `1/k_max² = a (T - t)` over the last 20% of records
/// (at least [`MIN_FIT_RECORDS`]).
pub fn estimate_blowup_time(times: &[f64], k_max: &[f64]) -> Result<BlowupFit, Inconclusive> {
    let n = times.len().min(k_max.len());
    if n < MIN_FIT_RECORDS {
        return Err(Inconclusive::TooFewRecords(n));
    }
    let m = MIN_FIT_RECORDS.max((n as f64 * 0.2).ceil() as usize).min(n);
    let (ts, ks) = (&times[n - m..n], &k_max[n - m..n]);
    if ks.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-9)) {
        return Err(Inconclusive::CurvatureNotIncreasing);
    }
    let ys: Vec<f64> = ks.iter().map(|k| 1.0 / (k * k)).collect();
    let mf = m as f64;
    let tm = ts.iter().sum::<f64>() / mf;
    let ym = ys.iter().sum::<f64>() / mf;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        stt += (t - tm) * (t - tm);
        sty += (t - tm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    if stt == 0.0 {
        return Err(Inconclusive::DegenerateFit);
    }
    let b = sty / stt;
    if !(b < 0.0) {
        return Err(Inconclusive::DegenerateFit);
    }
    let a = ym - b * tm;
    let sse: f64 = ts.iter().zip(&ys).map(|(t, y)| (y - a - b * t).powi(2)).sum();
    let residual = if syy > 0.0 { (sse / syy).sqrt() } else { 0.0 };
    Ok(BlowupFit { t_est: -a / b, residual, slope: -b, records_used: m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularityType {
    TypeI,
    TypeII,
    Inconclusive,
}

impl std::fmt::Display for SingularityType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SingularityType::TypeI => "Type I",
            SingularityType::TypeII => "Type II",
            SingularityType::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeThresholds {
    pub q_lo: f64,
    pub q_hi: f64,
    pub max_drift: f64,
    /// Records needed inside the final decade of `T - t`.
    pub min_tail: usize,
}

impl Default for TypeThresholds {
    fn default() -> Self {
        TypeThresholds { q_lo: 0.1, q_hi: 10.0, max_drift: 3.0, min_tail: 8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub verdict: SingularityType,
    /// `(t, k_max² (T_est - t))` for every record before `T_est`.
    pub q_series: Vec<(f64, f64)>,
    pub tail_len: usize,
    pub tail_min: f64,
    pub tail_max: f64,
}

/// Type I when `Q` stays inside `[q_lo, q_hi]` with `max/min < max_drift`
/// over the final decade of `T_est - t`; Type II when it grows past `q_hi`
/// monotonically there.
pub fn classify_type(times: &[f64], k_max: &[f64], t_est: f64, th: &TypeThresholds) -> Classification {
    let q_series: Vec<(f64, f64)> = times
        .iter()
        .zip(k_max)
        .filter(|(t, _)| **t < t_est)
        .map(|(t, k)| (*t, k * k * (t_est - t)))
        .collect();
    let mut out = Classification {
        verdict: SingularityType::Inconclusive,
        q_series,
        tail_len: 0,
        tail_min: f64::NAN,
        tail_max: f64::NAN,
    };
    if out.q_series.len() < MIN_FIT_RECORDS {
        return out;
    }
    let last = out.q_series.last().unwrap().0;
    let horizon = 10.0 * (t_est - last);
    let tail: Vec<f64> = out
        .q_series
        .iter()
        .filter(|(t, _)| t_est - t <= horizon)
        .map(|&(_, q)| q)
        .collect();
    out.tail_len = tail.len();
    if tail.len() < th.min_tail {
        return out;
    }
    out.tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    out.tail_max = tail.iter().copied().fold(0.0, f64::max);
    let bounded = out.tail_min >= th.q_lo && out.tail_max <= th.q_hi;
    if bounded && out.tail_max / out.tail_min < th.max_drift {
        out.verdict = SingularityType::TypeI;
    } else if tail.windows(2).all(|w| w[1] >= w[0]) && *tail.last().unwrap() > th.q_hi {
        out.verdict = SingularityType::TypeII;
    }
    out
}

/// Every value stays within `1 + jitter` of the running minimum of the ones before it.
pub fn decreasing_with_jitter(values: &[f64], jitter: f64) -> bool {
    let mut running = f64::INFINITY;
    for &v in values {
        if v > running * (1.0 + jitter) {
            return false;
        }
        running = running.min(v);
    }
    true
}

/// Post-processing of a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularityReport {
    pub fit: Result<BlowupFit, Inconclusive>,
    pub classification: Classification,
    /// `sup Q` over the classification tail.
    pub q_tail_sup: f64,
    /// `(t, roundness)` per record. Roundness is invariant under the parabolic
    /// rescaling, so the raw curves give the rescaled values.
    pub roundness_series: Vec<(f64, f64)>,
    /// `(t, mean radius / √(2(T_est - t)))`; tends to 1 for shrinking circles.
    pub rescaled_radius_series: Vec<(f64, f64)>,
    /// Roundness decreases up to the jitter over the final decade of `T_est - t`.
    pub roundness_tail_monotone: Option<bool>,
    /// Earliest record time from which roundness decreases up to the jitter.
    pub roundness_monotone_from: Option<f64>,
    pub final_roundness: Option<f64>,
    /// Of the rescaled final curve.
    pub final_min_dpsi: Option<f64>,
    pub final_min_i: Option<f64>,
}

pub const ROUNDNESS_JITTER: f64 = 0.02;

/// First index from which `values` is [`decreasing_with_jitter`]. A suffix of
/// a passing suffix passes too, so the first hit is the answer.
pub fn monotone_from(values: &[f64], jitter: f64) -> Option<usize> {
    (0..values.len()).find(|&i| decreasing_with_jitter(&values[i..], jitter))
}

/// Values whose time lies within the final decade of `t_est - t`.
pub fn final_decade(series: &[(f64, f64)], t_est: f64) -> Vec<f64> {
    let Some(&(last, _)) = series.last() else { return Vec::new() };
    let horizon = 10.0 * (t_est - last);
    series.iter().filter(|(t, _)| t_est - t <= horizon).map(|&(_, v)| v).collect()
}

/// Builds the report from the recorded rows and, when available, the final
/// curve at time `t_final`.
pub fn analyze(rows: &[TraceRow], final_curve: Option<(&Curve, f64)>, th: &TypeThresholds) -> SingularityReport {
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let k_max: Vec<f64> = rows.iter().map(|r| r.k_max).collect();
    let fit = estimate_blowup_time(&times, &k_max);
    let classification = match &fit {
        Ok(f) => classify_type(&times, &k_max, f.t_est, th),
        Err(_) => Classification {
            verdict: SingularityType::Inconclusive,
            q_series: Vec::new(),
            tail_len: 0,
            tail_min: f64::NAN,
            tail_max: f64::NAN,
        },
    };
    let roundness_series: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.shape.as_ref().map(|s| (r.t, s.roundness))).collect();
    let mut rescaled_radius_series = Vec::new();
    let values: Vec<f64> = roundness_series.iter().map(|&(_, r)| r).collect();
    let roundness_monotone_from = monotone_from(&values, ROUNDNESS_JITTER).map(|i| roundness_series[i].0);
    let mut roundness_tail_monotone = None;
    let mut final_min_dpsi = None;
    if let Ok(f) = &fit {
        rescaled_radius_series = rows
            .iter()
            .filter(|r| r.t < f.t_est)
            .filter_map(|r| r.shape.as_ref().map(|s| (r.t, s.mean_radius / (2.0 * (f.t_est - r.t)).sqrt())))
            .collect();
        let tail = final_decade(&roundness_series, f.t_est);
        if tail.len() >= th.min_tail {
            roundness_tail_monotone = Some(decreasing_with_jitter(&tail, ROUNDNESS_JITTER));
        }
        if let Some((curve, t)) = final_curve {
            if let Ok(scaled) = rescale_curve(curve, t, f.t_est) {
                final_min_dpsi = Some(min_huisken_ratio(&scaled).min);
            }
        }
    }
    let q_tail_sup = if classification.tail_len > 0 { classification.tail_max } else { f64::NAN };
    SingularityReport {
        fit,
        classification,
        q_tail_sup,
        final_roundness: roundness_series.last().map(|&(_, r)| r),
        roundness_series,
        rescaled_radius_series,
        roundness_tail_monotone,
        roundness_monotone_from,
        final_min_dpsi,
        final_min_i: rows.iter().rev().find_map(|r| r.min_i),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::circle_polygon;
    use crate::fourier::{synthesize_fourier_curve, FourierSpec};

    #[test]
    fn circle_shape() {
        let r = roundness(&circle_polygon(1.0, 3, 256)).unwrap();
        assert!((r.shape.roundness - 1.0).abs() < 1e-9);
        assert!(r.shape.planarity_defect < 1e-12);
        assert!((r.min_dpsi - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ellipse_roundness_is_axis_ratio() {
        let c = synthesize_fourier_curve(&FourierSpec::ellipse(2.0, 1.0, 512)).unwrap();
        assert!((shape_stats(&c).unwrap().roundness - 2.0).abs() < 1e-3);
    }

    #[test]
    fn crown_is_not_planar() {
        let c = synthesize_fourier_curve(&FourierSpec::crown(512)).unwrap();
        assert!(shape_stats(&c).unwrap().planarity_defect > 1e-3);
    }

    #[test]
    fn exact_circle_solution_fits() {
        let times: Vec<f64> = (0..100).map(|i| 0.45 * i as f64 / 99.0).collect();
        let k: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 - 2.0 * t).sqrt()).collect();
        let fit = estimate_blowup_time(&times, &k).unwrap();
        assert!((fit.t_est - 0.5).abs() < 1e-12 && fit.residual < 1e-9);
        let cls = classify_type(&times, &k, fit.t_est, &TypeThresholds::default());
        assert_eq!(cls.verdict, SingularityType::TypeI);
        assert!((cls.tail_min - 0.5).abs() < 1e-9 && (cls.tail_max - 0.5).abs() < 1e-9);
    }

    #[test]
    fn short_or_flat_traces_are_inconclusive() {
        let times = [0.0, 0.1, 0.2, 0.3, 0.4];
        let k = [1.0, 1.1, 1.2, 1.3, 1.4];
        assert_eq!(estimate_blowup_time(&times, &k), Err(Inconclusive::TooFewRecords(5)));
        assert_eq!(classify_type(&times, &k, 0.5, &TypeThresholds::default()).verdict, SingularityType::Inconclusive);
        let times: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let flat = vec![2.0; 40];
        assert_eq!(estimate_blowup_time(&times, &flat), Err(Inconclusive::DegenerateFit));
        let dropping: Vec<f64> = (0..40).map(|i| 10.0 - 0.1 * i as f64).collect();
        assert_eq!(estimate_blowup_time(&times, &dropping), Err(Inconclusive::CurvatureNotIncreasing));
    }

    #[test]
    fn faster_than_parabolic_blowup_is_type_two() {
        // k² (T - t) = (T - t)^(-1/2)
        let times: Vec<f64> = (0..200).map(|i| 1.0 - 10f64.powf(-4.0 * i as f64 / 199.0)).collect();
        let k: Vec<f64> = times.iter().map(|t| (1.0 - t).powf(-0.75)).collect();
        let cls = classify_type(&times, &k, 1.0, &TypeThresholds::default());
        assert_eq!(cls.verdict, SingularityType::TypeII);
    }

    #[test]
    fn rescaled_shrinking_circle_is_unit() {
        for (r0, t) in [(1.0, 0.3), (2.0, 1.5)] {
            let r = f64::sqrt(r0 * r0 - 2.0 * t);
            let c = circle_polygon(r, 2, 128);
            let scaled = rescale_curve(&c, t, r0 * r0 / 2.0).unwrap();
            let s = shape_stats(&scaled).unwrap();
            assert!((s.mean_radius - 1.0).abs() < 1e-12);
        }
        assert!(rescale_curve(&circle_polygon(1.0, 2, 16), 0.5, 0.5).is_err());
    }

    #[test]
    fn jitter_check() {
        assert!(decreasing_with_jitter(&[3.0, 2.0, 2.03, 1.5, 1.2], 0.02));
        assert!(!decreasing_with_jitter(&[3.0, 2.0, 2.1, 1.5], 0.02));
    }
}
