//! Reflection hyperplanes, plane crossings and the symmetric pairing `s ↔ -s`.

use rayon::prelude::*;
use thiserror::Error;

use crate::curve::{dist, dot, norm, Curve, CurveError};
use crate::spline::PeriodicSpline;

/// Default tolerance (fraction of `L`) on the symmetry defect.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-6;

/// Vertices within this fraction of `L` of the plane count as lying on it.
pub const ON_PLANE_TOL: f64 = 1e-12;

/// Largest defect (fraction of `L`) that [`symmetrize_curve`] will repair.
pub const SYMMETRIZE_MAX_DEFECT: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymmetryError {
    #[error("plane normal must be nonzero")]
    ZeroNormal,
    #[error("plane lives in R^{plane} but the curve lives in R^{curve}")]
    DimensionMismatch { plane: usize, curve: usize },
    #[error("tangential contact: segment {segment} lies in the plane, crossing count is ill-defined")]
    TangentialContact { segment: usize },
    #[error("not symmetric two-crossing ({crossings} crossings, defect {defect:.3e}·L)")]
    NotSymmetricTwoCrossing { crossings: usize, defect: f64 },
    #[error("symmetry defect {defect:.3e}·L is too large to symmetrize")]
    DefectTooLarge { defect: f64 },
    #[error("reflection does not induce a vertex involution (vertex {0})")]
    NoVertexInvolution(usize),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// `{x : ⟨x, normal⟩ = offset}` with a unit normal.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Hyperplane {
    /// Normalizes `normal`; `offset` is rescaled so the described plane is unchanged.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self, SymmetryError> {
        let len = norm(&normal);
        if !(len > 0.0) || !len.is_finite() {
            return Err(SymmetryError::ZeroNormal);
        }
        if len == 1.0 {
            return Ok(Hyperplane { normal, offset });
        }
        Ok(Hyperplane { normal: normal.iter().map(|x| x / len).collect(), offset: offset / len })
    }

    /// The coordinate plane `x_axis = 0` in R^dim.
    pub fn coordinate(axis: usize, dim: usize) -> Self {
        let mut normal = vec![0.0; dim];
        normal[axis] = 1.0;
        Hyperplane { normal, offset: 0.0 }
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        dot(p, &self.normal) - self.offset
    }

    /// `x - 2(⟨x, n⟩ - offset) n`.
    pub fn reflect_into(&self, p: &[f64], out: &mut [f64]) {
        let d = self.signed_distance(p);
        for ((o, x), n) in out.iter_mut().zip(p).zip(&self.normal) {
            *o = x - 2.0 * d * n;
        }
    }

    pub fn reflect_point(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        self.reflect_into(p, &mut out);
        out
    }

    fn check_dim(&self, curve: &Curve) -> Result<(), SymmetryError> {
        if self.dim() != curve.dim() {
            return Err(SymmetryError::DimensionMismatch { plane: self.dim(), curve: curve.dim() });
        }
        Ok(())
    }
}

/// Reflects every vertex; the vertex order is kept.
pub fn reflect_curve(curve: &Curve, plane: &Hyperplane) -> Result<Curve, SymmetryError> {
    plane.check_dim(curve)?;
    Ok(curve.map_points(|p, out| plane.reflect_into(p, out))?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    /// Segment `segment → segment + 1` containing the crossing.
    pub segment: usize,
    /// Polygon arclength of the crossing.
    pub arclength: f64,
    pub position: Vec<f64>,
    /// Signed distance increases along the curve orientation here.
    pub rising: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossingSet {
    pub crossings: Vec<Crossing>,
}

impl CrossingSet {
    pub fn count(&self) -> usize {
        self.crossings.len()
    }
}

/// Transversal sign changes of the signed distance along the closed polygon.
///
/// A vertex exactly on the plane is classified as positive. A segment with
/// both ends within `1e-12·L` of the plane is a tangential contact.
pub fn count_plane_crossings(curve: &Curve, plane: &Hyperplane) -> Result<CrossingSet, SymmetryError> {
    plane.check_dim(curve)?;
    let n = curve.len();
    let tol = ON_PLANE_TOL * curve.length();
    let d: Vec<f64> = curve.points().map(|p| plane.signed_distance(p)).collect();
    let mut crossings = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if d[i].abs() <= tol && d[j].abs() <= tol {
            return Err(SymmetryError::TangentialContact { segment: i });
        }
        let (pi, pj) = (d[i] >= 0.0, d[j] >= 0.0);
        if pi == pj {
            continue;
        }
        let t = d[i] / (d[i] - d[j]);
        let (a, b) = (curve.point(i), curve.point(j));
        let position: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        let arclength = curve.arclength()[i] + t * curve.segment_length(i);
        crossings.push(Crossing { segment: i, arclength, position, rising: pj });
    }
    Ok(CrossingSet { crossings })
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for k in 0..p.len() {
        let ab = b[k] - a[k];
        ab2 += ab * ab;
        ap_ab += (p[k] - a[k]) * ab;
    }
    let t = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let mut d2 = 0.0;
    for k in 0..p.len() {
        let q = a[k] + t * (b[k] - a[k]);
        d2 += (p[k] - q) * (p[k] - q);
    }
    d2.sqrt()
}

/// Max over vertices of the distance to the reflected polygon, divided by `L`.
pub fn symmetry_defect(curve: &Curve, plane: &Hyperplane) -> Result<f64, SymmetryError> {
    let reflected = reflect_curve(curve, plane)?;
    let n = curve.len();
    let worst = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = curve.point(i);
            (0..n)
                .map(|j| point_segment_distance(p, reflected.point(j), reflected.point(j + 1)))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst / curve.length())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryVerdict {
    pub symmetric_two_crossing: bool,
    pub defect: f64,
    pub crossings: usize,
}

/// Reflection invariance (defect below `tol·L`) and exactly two crossings.
pub fn is_symmetric_two_crossing(curve: &Curve, plane: &Hyperplane, tol: f64) -> Result<SymmetryVerdict, SymmetryError> {
    let crossings = count_plane_crossings(curve, plane)?.count();
    let defect = symmetry_defect(curve, plane)?;
    Ok(SymmetryVerdict { symmetric_two_crossing: defect < tol && crossings == 2, defect, crossings })
}

/// Arclength coordinates centred on the anchor crossing `A`, in which the
/// reflection acts as `s ↦ -s`.
///
/// Arclength is that of the smooth periodic interpolant. The traversal
/// direction is chosen so that the signed distance to the plane increases
/// through the anchor, hence `y(s) ≥ 0` on `(0, L/2)`.
#[derive(Clone, Debug)]
pub struct SymmetricPairing {
    spline: PeriodicSpline,
    plane: Hyperplane,
    anchor: f64,
    direction: f64,
}

impl SymmetricPairing {
    pub fn spline(&self) -> &PeriodicSpline {
        &self.spline
    }

    pub fn plane(&self) -> &Hyperplane {
        &self.plane
    }

    /// Spline arclength of the anchor.
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// `+1` when `s` runs along the curve orientation, `-1` otherwise.
    pub fn direction(&self) -> f64 {
        self.direction
    }

    pub fn length(&self) -> f64 {
        self.spline.length()
    }

    fn absolute(&self, s: f64) -> f64 {
        self.anchor + self.direction * s
    }

    /// Point at signed arclength `s` from the anchor.
    pub fn position(&self, s: f64) -> Vec<f64> {
        self.spline.point_at(self.absolute(s))
    }

    /// Point and unit tangent (pointing toward increasing `s`).
    pub fn frame(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let (p, mut t) = self.spline.frame_at(self.absolute(s));
        if self.direction < 0.0 {
            t.iter_mut().for_each(|x| *x = -*x);
        }
        (p, t)
    }

    pub fn anchor_position(&self) -> Vec<f64> {
        self.position(0.0)
    }

    /// The reflected partner of `s`.
    pub fn pair(&self, s: f64) -> f64 {
        -s
    }

    /// Signed distance of `γ(s)` to the plane.
    pub fn y(&self, s: f64) -> f64 {
        self.plane.signed_distance(&self.position(s))
    }

    /// Same pairs, re-anchored at `B = A + L/2` with reversed orientation.
    /// Maps `s` to `L/2 - s`.
    pub fn swapped(&self) -> SymmetricPairing {
        SymmetricPairing {
            spline: self.spline.clone(),
            plane: self.plane.clone(),
            anchor: self.absolute(0.5 * self.length()),
            direction: -self.direction,
        }
    }

    /// Spline arclength, measured along the pairing direction from the
    /// anchor, of every knot in the open half `(0, L/2)`, sorted.
    pub fn half_grid(&self) -> Vec<f64> {
        let len = self.length();
        let mut grid: Vec<f64> = (0..self.spline.vertex_count())
            .map(|i| ((self.spline.knot_arclength(i) - self.anchor) * self.direction).rem_euclid(len))
            .filter(|&s| s > 1e-12 * len && s < 0.5 * len * (1.0 - 1e-12))
            .collect();
        grid.sort_by(f64::total_cmp);
        grid
    }
}

/// Pairing anchored at the rising crossing.
pub fn build_symmetric_pairing(curve: &Curve, plane: &Hyperplane, tol: f64) -> Result<SymmetricPairing, SymmetryError> {
    build_symmetric_pairing_near(curve, plane, tol, None)
}

/// Pairing anchored at the crossing nearest `previous_anchor` when given,
/// otherwise at the rising crossing.
pub fn build_symmetric_pairing_near(
    curve: &Curve,
    plane: &Hyperplane,
    tol: f64,
    previous_anchor: Option<&[f64]>,
) -> Result<SymmetricPairing, SymmetryError> {
    let verdict = is_symmetric_two_crossing(curve, plane, tol)?;
    if !verdict.symmetric_two_crossing {
        return Err(SymmetryError::NotSymmetricTwoCrossing { crossings: verdict.crossings, defect: verdict.defect });
    }
    let set = count_plane_crossings(curve, plane)?;
    let chosen = match previous_anchor {
        Some(prev) => set
            .crossings
            .iter()
            .min_by(|a, b| dist(&a.position, prev).total_cmp(&dist(&b.position, prev)))
            .expect("two crossings"),
        None => set.crossings.iter().find(|c| c.rising).expect("one rising crossing"),
    };
    let spline = PeriodicSpline::new(curve);
    let tau = refine_crossing(&spline, plane, curve, chosen.segment);
    let anchor = spline.arclength_at(tau);
    let direction = if chosen.rising { 1.0 } else { -1.0 };
    Ok(SymmetricPairing { spline, plane: plane.clone(), anchor, direction })
}

/// Root of the signed distance along the interpolant inside polygon segment
/// `segment`; returns the spline parameter.
pub fn refine_crossing(spline: &PeriodicSpline, plane: &Hyperplane, curve: &Curve, segment: usize) -> f64 {
    let lo0 = curve.arclength()[segment];
    let hi0 = lo0 + curve.segment_length(segment);
    let f = |tau: f64| plane.signed_distance(&spline.eval(tau));
    let (mut lo, mut hi) = (lo0, hi0);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        // the far vertex is on the plane; it belongs to the next segment's sign class
        return hi;
    }
    if flo.signum() == fhi.signum() {
        // the interpolant does not cross inside this segment; fall back to linear
        return lo0 + (hi0 - lo0) * flo / (flo - fhi);
    }
    for _ in 0..200 {
        let mut mid = (lo * fhi - hi * flo) / (fhi - flo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let fm = f(mid);
        if fm == 0.0 || hi - lo <= 1e-15 * hi0.abs().max(1.0) {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
            fhi *= 0.5;
        } else {
            hi = mid;
            fhi = fm;
            flo *= 0.5;
        }
    }
    0.5 * (lo + hi)
}

/// Averages the curve with its reflections through every plane in turn.
/// Vertices are matched with the nearest reflected vertex, and the match has
/// to be an involution.
pub fn symmetrize_curve(curve: &Curve, planes: &[Hyperplane]) -> Result<Curve, SymmetryError> {
    let mut current = curve.clone();
    for plane in planes {
        let defect = symmetry_defect(&current, plane)?;
        if defect >= SYMMETRIZE_MAX_DEFECT {
            return Err(SymmetryError::DefectTooLarge { defect });
        }
        let n = current.len();
        let dim = current.dim();
        let reflected = reflect_curve(&current, plane)?;
        let partner: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = current.point(i);
                (0..n)
                    .min_by(|&a, &b| dist(p, reflected.point(a)).total_cmp(&dist(p, reflected.point(b))))
                    .expect("non-empty")
            })
            .collect();
        if let Some(i) = (0..n).find(|&i| partner[partner[i]] != i) {
            return Err(SymmetryError::NoVertexInvolution(i));
        }
        let mut coords = vec![0.0; n * dim];
        for i in 0..n {
            let (p, q) = (current.point(i), reflected.point(partner[i]));
            for k in 0..dim {
                coords[i * dim + k] = 0.5 * (p[k] + q[k]);
            }
        }
        current = Curve::new(dim, coords)?;
    }
    Ok(current)
}
