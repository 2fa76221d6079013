//! The orthogonal projection onto the first two coordinates and the
//! "one-to-one convex projection" predicate.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use thiserror::Error;

use crate::curve::Curve;

/// Closest approach below `INJECTIVITY_TOL · L` counts as touching.
pub const INJECTIVITY_TOL: f64 = 1e-9;
/// Turning increments this close to zero are collinear and never break convexity.
pub const COLLINEAR_TOL: f64 = 1e-12;

pub type Point2 = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("projection is degenerate: all points are collinear")]
    Collinear,
    #[error("projected edge {0} has zero length")]
    ZeroEdge(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub polygon: Vec<Point2>,
    pub injective: bool,
    /// Closest approach between non-adjacent projected segments.
    pub closest_approach: f64,
    pub convex: bool,
    /// Smallest turning increment after orienting the polygon counter-clockwise.
    pub min_turn: f64,
    pub total_turning: f64,
}

impl ProjectionReport {
    pub fn passes(&self) -> bool {
        self.injective && self.convex
    }
}

pub fn project_xy(curve: &Curve) -> Vec<Point2> {
    curve.points().map(|p| [p[0], p[1]]).collect()
}

#[inline]
fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn dot2(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn len2(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let denom = dot2(ab, ab);
    let t = if denom > 0.0 { (dot2(ap, ab) / denom).clamp(0.0, 1.0) } else { 0.0 };
    len2([ap[0] - t * ab[0], ap[1] - t * ab[1]])
}

/// Distance between segments `ab` and `cd` in the plane; 0 when they meet.
pub fn segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

fn check_not_collinear(poly: &[Point2]) -> Result<(), ProjectionError> {
    let p0 = poly[0];
    let far = poly
        .iter()
        .copied()
        .max_by(|a, b| len2(sub(*a, p0)).total_cmp(&len2(sub(*b, p0))))
        .unwrap_or(p0);
    let dir = sub(far, p0);
    let scale = dot2(dir, dir);
    if scale == 0.0 {
        return Err(ProjectionError::Collinear);
    }
    let spread = poly.iter().map(|&p| cross(dir, sub(p, p0)).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * scale {
        return Err(ProjectionError::Collinear);
    }
    Ok(())
}

/// Signed exterior angles at every vertex, in `(-π, π]`.
fn turning_increments(poly: &[Point2]) -> Vec<f64> {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let e0 = sub(poly[i], poly[(i + n - 1) % n]);
            let e1 = sub(poly[(i + 1) % n], poly[i]);
            cross(e0, e1).atan2(dot2(e0, e1))
        })
        .collect()
}

/// Minimum distance over all pairs of non-adjacent edges.
pub fn closest_nonadjacent_approach(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let mut best = f64::INFINITY;
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                best = best.min(segment_distance(a, b, poly[j], poly[(j + 1) % n]));
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Is `P_xy` injective on the curve with convex image?
pub fn is_one_to_one_convex_projection(curve: &Curve) -> Result<ProjectionReport, ProjectionError> {
    let poly = project_xy(curve);
    check_not_collinear(&poly)?;
    let n = poly.len();
    let tol = INJECTIVITY_TOL * curve.length();

    let min_edge = (0..n).map(|i| len2(sub(poly[(i + 1) % n], poly[i]))).fold(f64::INFINITY, f64::min);
    let closest_approach = closest_nonadjacent_approach(&poly).min(min_edge);
    let turns = turning_increments(&poly);
    let folds = turns.iter().any(|t| t.abs() > PI - 1e-9);
    let injective = closest_approach > tol && !folds;

    let total_turning: f64 = turns.iter().sum();
    let orient = if total_turning < 0.0 { -1.0 } else { 1.0 };
    let min_turn = turns.iter().map(|t| orient * t).fold(f64::INFINITY, f64::min);
    let convex = min_turn >= -COLLINEAR_TOL && (total_turning.abs() - TAU).abs() < 1e-6;

    Ok(ProjectionReport { polygon: poly, injective, closest_approach, convex, min_turn, total_turning })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedCurvature {
    /// Total turning `Σ θ_i`.
    pub signed: f64,
    /// Total absolute curvature `Σ |θ_i|`.
    pub absolute: f64,
    /// Vertices where consecutive edges are anti-parallel; their angle counts as π.
    pub cusps: Vec<usize>,
}

pub fn projection_total_curvature(curve: &Curve) -> Result<ProjectedCurvature, ProjectionError> {
    let poly = project_xy(curve);
    let n = poly.len();
    let tol = 1e-14 * curve.length();
    if let Some(i) = (0..n).find(|&i| len2(sub(poly[(i + 1) % n], poly[i])) <= tol) {
        return Err(ProjectionError::ZeroEdge(i));
    }
    let turns = turning_increments(&poly);
    let cusps: Vec<usize> = (0..n).filter(|&i| turns[i].abs() >= PI - 1e-12).collect();
    let capped = |t: f64| t.clamp(-PI, PI);
    Ok(ProjectedCurvature {
        signed: turns.iter().map(|&t| capped(t)).sum(),
        absolute: turns.iter().map(|&t| capped(t).abs()).sum(),
        cusps,
    })
}
