//! Huisken's distance ratio `d/ψ` and its reflection-symmetric restriction `I`.
//!
//! All arclengths here are those of the smooth periodic interpolant
//! ([`PeriodicSpline`]), so the ratio is exactly 1 on round circles up to the
//! interpolation error rather than up to the polygon's perimeter deficit.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::curve::{angle_between, dist, dot, Curve};
use crate::spline::PeriodicSpline;
use crate::symmetry::SymmetricPairing;

/// Tolerance for the first/second variation residuals and the inequality slacks.
pub const DIAGNOSTIC_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatioError {
    #[error("intrinsic distance {l} is outside [0, {length}]")]
    OutOfRange { l: f64, length: f64 },
    #[error("length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("coincident parameters: {0} and {1}")]
    Coincident(f64, f64),
}

/// `ψ = (L/π) sin(π l / L)`.
pub fn compute_psi(length: f64, l: f64) -> Result<f64, RatioError> {
    if !(length > 0.0) {
        return Err(RatioError::NonPositiveLength(length));
    }
    if !(0.0..=length).contains(&l) {
        return Err(RatioError::OutOfRange { l, length });
    }
    Ok(psi(length, l))
}

#[inline]
pub(crate) fn psi(length: f64, l: f64) -> f64 {
    length / PI * (PI * l / length).sin()
}

/// `|γ(s_p) - γ(s_q)| / ψ` with `l` the cyclic gap between the two arclengths.
pub fn huisken_ratio(spline: &PeriodicSpline, s_p: f64, s_q: f64) -> Result<f64, RatioError> {
    let len = spline.length();
    let l = (s_q - s_p).rem_euclid(len);
    if l <= 1e-14 * len || len - l <= 1e-14 * len {
        return Err(RatioError::Coincident(s_p, s_q));
    }
    let d = dist(&spline.point_at(s_p), &spline.point_at(s_q));
    Ok(d / psi(len, l))
}

// the ratio with the diagonal replaced by its limit value 1
fn ratio_or_limit(spline: &PeriodicSpline, s_p: f64, s_q: f64) -> f64 {
    huisken_ratio(spline, s_p, s_q).unwrap_or(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub min: f64,
    pub s_p: f64,
    pub s_q: f64,
    pub d: f64,
    pub l: f64,
    pub psi: f64,
    pub alpha: f64,
    /// The minimum is the diagonal limit value 1.
    pub at_diagonal: bool,
}

/// Minimizes `x ↦ f(x)` on `[a, b]` by golden-section search.
pub(crate) fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

const MAX_SWEEPS: usize = 50;

/// Global minimum of `d/ψ` over all pairs.
///
/// Exhaustive scan over the vertex-pair grid, then golden-section line
/// searches around the best pair until they stop improving. The diagonal
/// limit value 1 is always a candidate.
pub fn min_huisken_ratio(curve: &Curve) -> RatioReport {
    min_huisken_ratio_spline(&PeriodicSpline::new(curve))
}

pub fn min_huisken_ratio_spline(spline: &PeriodicSpline) -> RatioReport {
    let n = spline.vertex_count();
    let len = spline.length();
    let best = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = spline.knot_point(i);
            let si = spline.knot_arclength(i);
            let mut row = (f64::INFINITY, i, i);
            for j in i + 1..n {
                let l = spline.knot_arclength(j) - si;
                let r = dist(p, spline.knot_point(j)) / psi(len, l);
                if r < row.0 {
                    row = (r, i, j);
                }
            }
            row
        })
        .reduce(
            || (f64::INFINITY, usize::MAX, usize::MAX),
            |a, b| if (a.0, a.1, a.2) <= (b.0, b.1, b.2) { a } else { b },
        );

    let (grid_min, i, j) = best;
    let diagonal = RatioReport {
        min: 1.0,
        s_p: 0.0,
        s_q: 0.0,
        d: 0.0,
        l: 0.0,
        psi: 0.0,
        alpha: 0.0,
        at_diagonal: true,
    };
    if !grid_min.is_finite() {
        return diagonal;
    }

    // Golden-section line searches along both coordinates and both diagonals,
    // each over a window of one cell width centred on the current pair. The
    // diagonals matter: near symmetric pairs the valley runs along s_p = -s_q
    // and coordinate-only descent zig-zags.
    let cell = |k: usize| (spline.knot_arclength(k + 1) - spline.knot_arclength(k + n - 1)).rem_euclid(len) / 2.0;
    let h = cell(i).max(cell(j));
    let mut sp = spline.knot_arclength(i);
    let mut sq = spline.knot_arclength(j);
    let mut val = grid_min;
    let tol = 1e-10 * len;
    for _ in 0..MAX_SWEEPS {
        let before = val;
        for (dp, dq) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)] {
            let (t, ft) = golden_min(|t| ratio_or_limit(spline, sp + dp * t, sq + dq * t), -h, h, tol);
            if ft < val {
                sp += dp * t;
                sq += dq * t;
                val = ft;
            }
        }
        if before - val <= 1e-14 * before {
            break;
        }
    }
    if val >= 1.0 {
        return diagonal;
    }
    let l_raw = (sq - sp).rem_euclid(len);
    let d = dist(&spline.point_at(sp), &spline.point_at(sq));
    RatioReport {
        min: val,
        s_p: sp.rem_euclid(len),
        s_q: sq.rem_euclid(len),
        d,
        l: l_raw,
        psi: psi(len, l_raw),
        alpha: PI * l_raw / len,
        at_diagonal: false,
    }
}

/// `I(s) = 2 y(s) / ψ(L, 2s)` on `(0, L/2)`, with the limit value 1 at `s = 0`
/// and a one-sided quadratic extrapolation at `s = L/2`.
pub fn symmetric_ratio(pairing: &SymmetricPairing, s: f64) -> f64 {
    let len = pairing.length();
    let half = 0.5 * len;
    if s <= 0.0 {
        return 1.0;
    }
    if s >= half {
        let h = len / pairing.spline().vertex_count() as f64;
        let at = |k: f64| interior_symmetric_ratio(pairing, half - k * h);
        return 3.0 * at(1.0) - 3.0 * at(2.0) + at(3.0);
    }
    interior_symmetric_ratio(pairing, s)
}

fn interior_symmetric_ratio(pairing: &SymmetricPairing, s: f64) -> f64 {
    let len = pairing.length();
    2.0 * pairing.y(s) / psi(len, 2.0 * s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricRatioReport {
    /// `(s, I(s))` on the half-curve knot grid, `s` measured from the anchor.
    pub profile: Vec<(f64, f64)>,
    /// `min(interior_min, 1)`.
    pub min: f64,
    /// Argmin normalized into `(0, L/4]`; 0 when the boundary value wins.
    pub s0: f64,
    pub alpha0: f64,
    pub boundary_value: f64,
    pub interior_min: f64,
    /// Interior argmin before normalization.
    pub interior_argmin: f64,
    pub at_boundary: bool,
    /// Normalization swapped the roles of the two crossings.
    pub swapped: bool,
    pub length: f64,
}

impl SymmetricRatioReport {
    /// The pairing in which `s0` is measured.
    pub fn frame(&self, pairing: &SymmetricPairing) -> SymmetricPairing {
        if self.swapped {
            pairing.swapped()
        } else {
            pairing.clone()
        }
    }
}

/// Minimum of `I` over `(0, L/2]`: knot grid, golden-section refinement
/// around the best knot, and the boundary value 1 as a competing candidate.
pub fn min_symmetric_ratio(pairing: &SymmetricPairing) -> SymmetricRatioReport {
    let len = pairing.length();
    let half = 0.5 * len;
    let grid = pairing.half_grid();
    let profile: Vec<(f64, f64)> = grid.iter().map(|&s| (s, interior_symmetric_ratio(pairing, s))).collect();
    let best = profile
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(k, &(s, v))| (k, s, v));
    let (mut s_int, mut m_int) = (f64::NAN, f64::INFINITY);
    if let Some((k, s, v)) = best {
        let edge = 1e-9 * len;
        let lo = if k == 0 { edge } else { grid[k - 1] };
        let hi = if k + 1 == grid.len() { half - edge } else { grid[k + 1] };
        let (x, fx) = golden_min(|x| interior_symmetric_ratio(pairing, x), lo, hi, 1e-11 * len);
        if fx < v {
            s_int = x;
            m_int = fx;
        } else {
            s_int = s;
            m_int = v;
        }
    }
    let boundary_value = 1.0;
    let at_boundary = !(m_int < boundary_value);
    let (min, s_raw) = if at_boundary { (boundary_value, 0.0) } else { (m_int, s_int) };
    let swapped = !at_boundary && s_raw > 0.25 * len;
    let s0 = if swapped { half - s_raw } else { s_raw };
    SymmetricRatioReport {
        profile,
        min,
        s0,
        alpha0: 2.0 * PI * s0 / len,
        boundary_value,
        interior_min: m_int,
        interior_argmin: s_int,
        at_boundary,
        swapped,
        length: len,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationResiduals {
    pub y: f64,
    pub y_s: f64,
    pub y_ss: f64,
    pub psi: f64,
    pub alpha: f64,
    /// `y_s - 2 (y/ψ) cos α`
    pub r1: f64,
    /// `y_ss ψ + (4π/L) y sin α`
    pub r2: f64,
}

/// First- and second-variation quantities at `s0` by centred differences.
///
/// `y_s` uses a step far below the knot spacing; `y_ss` uses one knot
/// spacing so that it sees the same discrete neighbourhood as the minimum.
pub fn variation_diagnostics(pairing: &SymmetricPairing, s0: f64) -> VariationResiduals {
    let len = pairing.length();
    let spacing = len / pairing.spline().vertex_count() as f64;
    let h1 = 1e-4 * spacing;
    let h2 = spacing.min(0.5 * s0);
    let y = pairing.y(s0);
    let y_s = (pairing.y(s0 + h1) - pairing.y(s0 - h1)) / (2.0 * h1);
    let y_ss = (pairing.y(s0 + h2) - 2.0 * y + pairing.y(s0 - h2)) / (h2 * h2);
    let psi0 = psi(len, 2.0 * s0);
    let alpha = 2.0 * PI * s0 / len;
    VariationResiduals {
        y,
        y_s,
        y_ss,
        psi: psi0,
        alpha,
        r1: y_s - 2.0 * (y / psi0) * alpha.cos(),
        r2: y_ss * psi0 + 4.0 * PI / len * y * alpha.sin(),
    }
}

/// Discrete `∫₀^{s0} k ds`: turning of the tangent from the anchor through the
/// knots inside `(0, s0)` to `s0`, with exact interpolant tangents at both ends.
pub fn integral_curvature(pairing: &SymmetricPairing, s0: f64) -> f64 {
    let len = pairing.length();
    let (p0, t0) = pairing.frame(0.0);
    let (p1, t1) = pairing.frame(s0);
    let mut pts = vec![p0];
    let cut = 1e-9 * len;
    for s in pairing.half_grid() {
        if s > cut && s < s0 - cut {
            pts.push(pairing.position(s));
        }
    }
    pts.push(p1);
    let edges: Vec<Vec<f64>> = pts
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
        .collect();
    let mut total = angle_between(&t0, &edges[0]);
    for w in edges.windows(2) {
        total += angle_between(&w[0], &w[1]);
    }
    total + angle_between(edges.last().unwrap(), &t1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicBound {
    pub integral_k: f64,
    pub alpha: f64,
    /// `∫₀^{s0} k ds - α`
    pub slack: f64,
}

pub fn geodesic_bound_check(pairing: &SymmetricPairing, s0: f64) -> GeodesicBound {
    let integral_k = integral_curvature(pairing, s0);
    let alpha = 2.0 * PI * s0 / pairing.length();
    GeodesicBound { integral_k, alpha, slack: integral_k - alpha }
}

/// `4 y cos α / (ψ² s0) · ((∫₀^{s0} k ds)² - α²)`, the lower bound for `I_t` at a minimum.
pub fn rate_lower_bound(pairing: &SymmetricPairing, s0: f64) -> f64 {
    let len = pairing.length();
    let alpha = 2.0 * PI * s0 / len;
    let y = pairing.y(s0);
    let psi0 = psi(len, 2.0 * s0);
    let k_int = integral_curvature(pairing, s0);
    4.0 * y * alpha.cos() / (psi0 * psi0 * s0) * (k_int * k_int - alpha * alpha)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateVerdict {
    pub bound: f64,
    pub observed: f64,
    pub ok: bool,
}

/// Compares an observed `I_t` at the minimum against [`rate_lower_bound`].
pub fn ratio_rate_bound(pairing: &SymmetricPairing, s0: f64, i_t_observed: f64, tol: f64) -> RateVerdict {
    let bound = rate_lower_bound(pairing, s0);
    RateVerdict { bound, observed: i_t_observed, ok: i_t_observed >= bound - tol }
}

/// Everything the monitors need at the minimum of `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimumDiagnostics {
    pub variation: VariationResiduals,
    pub geodesic: GeodesicBound,
    pub rate_bound: f64,
}

/// Diagnostics at an interior minimum; `None` when the boundary value wins.
pub fn diagnose_minimum(pairing: &SymmetricPairing, report: &SymmetricRatioReport) -> Option<MinimumDiagnostics> {
    if report.at_boundary {
        return None;
    }
    let frame = report.frame(pairing);
    let s0 = report.s0;
    let variation = variation_diagnostics(&frame, s0);
    let geodesic = geodesic_bound_check(&frame, s0);
    let k = geodesic.integral_k;
    let a = geodesic.alpha;
    let rate_bound = 4.0 * variation.y * a.cos() / (variation.psi * variation.psi * s0) * (k * k - a * a);
    Some(MinimumDiagnostics { variation, geodesic, rate_bound })
}

/// `T(s0)·T(0)` in the pairing frame; equals `y_s` when the anchor tangent is the plane normal.
pub fn tangent_alignment(pairing: &SymmetricPairing, s0: f64) -> f64 {
    let (_, t0) = pairing.frame(0.0);
    let (_, t1) = pairing.frame(s0);
    dot(&t0, &t1)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use super::*;
    use crate::curve::circle_polygon;
    use crate::fourier::{synthesize_fourier_curve, FourierSpec};
    use crate::symmetry::{build_symmetric_pairing, Hyperplane};

    #[test]
    fn psi_values() {
        assert!((compute_psi(TAU, PI).unwrap() - 2.0).abs() < 1e-15);
        let l = 1e-8 * 3.0;
        assert!((compute_psi(3.0, l).unwrap() / l - 1.0).abs() < 1e-12);
        // (4/π) sin(π/4) = 2√2/π
        assert!((compute_psi(4.0, 1.0).unwrap() - 0.900_316_316_157_106).abs() < 1e-14);
        assert!(compute_psi(4.0, 4.5).is_err());
        assert!(compute_psi(4.0, -0.1).is_err());
        assert!(compute_psi(0.0, 0.0).is_err());
    }

    #[test]
    fn psi_is_symmetric_under_arc_swap() {
        for k in 0..=100 {
            let l = 7.3 * k as f64 / 100.0;
            let (a, b) = (psi(7.3, l), psi(7.3, 7.3 - l));
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * 7.3);
        }
    }

    #[test]
    fn circle_ratio_is_one() {
        let spline = PeriodicSpline::new(&circle_polygon(1.0, 2, 512));
        for (a, b) in [(0.0, 0.1), (0.3, 2.9), (1.0, 4.0), (6.0, 0.2)] {
            assert!((huisken_ratio(&spline, a, b).unwrap() - 1.0).abs() < 1e-6);
        }
        assert!(huisken_ratio(&spline, 1.0, 1.0).is_err());
        let r = min_huisken_ratio_spline(&spline);
        assert!((r.min - 1.0).abs() < 1e-6);
    }

    #[test]
    fn figure_eight_minimum_is_zero() {
        let spec = FourierSpec::new(
            vec![vec![crate::FourierTerm::cos(1, 1.0)], vec![crate::FourierTerm::sin(2, 1.0)]],
            512,
        );
        let c = synthesize_fourier_curve(&spec).unwrap();
        let r = min_huisken_ratio(&c);
        assert!(r.min < 1e-9 && r.d < 1e-9);
    }

    #[test]
    fn ellipse_minor_axis_pair_is_below_one() {
        let c = synthesize_fourier_curve(&FourierSpec::ellipse(2.0, 1.0, 512)).unwrap();
        let spline = PeriodicSpline::new(&c);
        let quarter = spline.knot_arclength(128);
        let three = spline.knot_arclength(384);
        let r = huisken_ratio(&spline, quarter, three).unwrap();
        // d = 2, ψ = L/π
        assert!((r - 2.0 * PI / spline.length()).abs() < 1e-9);
        assert!(r < 1.0);
    }

    #[test]
    fn symmetric_ratio_on_circle() {
        let c = circle_polygon(1.0, 2, 512);
        let pairing = build_symmetric_pairing(&c, &Hyperplane::coordinate(1, 2), 1e-6).unwrap();
        assert_eq!(symmetric_ratio(&pairing, 0.0), 1.0);
        for s in [1e-3, 0.5, 1.2, 2.0, 3.1] {
            assert!((symmetric_ratio(&pairing, s) - 1.0).abs() < 1e-6);
        }
        assert!((symmetric_ratio(&pairing, PI) - 1.0).abs() < 1e-6);
        let rep = min_symmetric_ratio(&pairing);
        assert!((rep.min - 1.0).abs() < 1e-6);
        for s in [0.2, 0.9, 1.5] {
            let v = variation_diagnostics(&pairing, s);
            assert!(v.r1.abs() < 1e-4, "{v:?}");
        }
        let g = geodesic_bound_check(&pairing, pairing.length() / 4.0);
        assert!(g.slack.abs() < 1e-4, "{g:?}");
        assert!(rate_lower_bound(&pairing, pairing.length() / 4.0).abs() < 1e-3);
    }

    #[test]
    fn small_s_limit_approaches_one() {
        let c = synthesize_fourier_curve(&FourierSpec::crown(1024)).unwrap();
        let pairing = build_symmetric_pairing(&c, &Hyperplane::coordinate(1, 3), 1e-6).unwrap();
        let v = symmetric_ratio(&pairing, 1e-7 * pairing.length());
        assert!((v - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_min(|x| (x - 0.3).powi(2) + 2.0, -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6 && (fx - 2.0).abs() < 1e-12);
    }
}
