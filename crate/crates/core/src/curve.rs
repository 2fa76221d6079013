//! Closed polygonal curves in R^n.
//!
//! A [`Curve`] stores `N` vertices interpreted cyclically, together with the
//! cumulative polygon arclength. Vertex `N-1` connects back to vertex `0`.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::spline::PeriodicSpline;

/// Minimum vertex count of a [`Curve`].
pub const MIN_VERTICES: usize = 8;

/// Consecutive vertices closer than this fraction of the total length are
/// treated as coincident.
pub const IMMERSION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("ambient dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("curve needs at least {min} vertices, got {got}")]
    TooFewVertices { min: usize, got: usize },
    #[error("coordinate buffer of length {len} is not a multiple of dimension {dim}")]
    RaggedPoints { len: usize, dim: usize },
    #[error("immersion failure: vertices {0} and {1} coincide")]
    NotImmersed(usize, usize),
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("degenerate Fourier spec: {0}")]
    DegenerateSpec(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    dim: usize,
    coords: Vec<f64>,
    arclength: Vec<f64>,
    length: f64,
}

impl Curve {
    /// Builds a curve from a flat coordinate buffer (`N * dim` values).
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self, CurveError> {
        if dim < 2 {
            return Err(CurveError::DimensionTooSmall(dim));
        }
        if coords.len() % dim != 0 {
            return Err(CurveError::RaggedPoints { len: coords.len(), dim });
        }
        let n = coords.len() / dim;
        if n < MIN_VERTICES {
            return Err(CurveError::TooFewVertices { min: MIN_VERTICES, got: n });
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(CurveError::NonFinite(i / dim));
        }
        let (arclength, length) = arclength_table(dim, &coords)?;
        Ok(Curve { dim, coords, arclength, length })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self, CurveError> {
        let dim = points.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(CurveError::RaggedPoints { len: p.len(), dim });
            }
            coords.extend_from_slice(p);
        }
        Curve::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Vertex `i` (taken modulo `N`).
    pub fn point(&self, i: usize) -> &[f64] {
        let i = i % self.len();
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Cumulative arclength of each vertex, `s_0 = 0`.
    pub fn arclength(&self) -> &[f64] {
        &self.arclength
    }

    /// Total polygon length, closing segment included.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Length of segment `i → i+1`.
    pub fn segment_length(&self, i: usize) -> f64 {
        let n = self.len();
        let i = i % n;
        if i + 1 < n {
            self.arclength[i + 1] - self.arclength[i]
        } else {
            self.length - self.arclength[i]
        }
    }

    pub fn min_segment_length(&self) -> f64 {
        (0..self.len()).map(|i| self.segment_length(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in self.points() {
            for (ck, pk) in c.iter_mut().zip(p) {
                *ck += pk;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|ck| *ck /= n);
        c
    }

    /// Applies `f` to every vertex and revalidates.
    pub fn map_points(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Curve, CurveError> {
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self.coords.chunks_exact(self.dim).zip(coords.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        Curve::new(self.dim, coords)
    }

    pub fn tangent_at(&self, index: usize) -> Vec<f64> {
        tangent_at(self, index)
    }

    pub fn curvature_vector(&self, index: usize) -> Vec<f64> {
        curvature_vector(self, index)
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Angle between two nonzero vectors, accurate near 0 and π.
pub(crate) fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (ux, uy) = (x / na, y / nb);
        diff += (ux - uy) * (ux - uy);
        sum += (ux + uy) * (ux + uy);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Cumulative arclength of a closed polygon given as a flat buffer.
///
/// Works for any vertex count ≥ 2; returns the per-vertex table and total `L`.
pub fn arclength_table(dim: usize, coords: &[f64]) -> Result<(Vec<f64>, f64), CurveError> {
    let n = coords.len() / dim;
    if n < 2 {
        return Err(CurveError::TooFewVertices { min: 2, got: n });
    }
    let seg: Vec<f64> = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            dist(&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim])
        })
        .collect();
    let total: f64 = seg.iter().sum();
    if !(total > 0.0) {
        return Err(CurveError::NotImmersed(0, 1 % n));
    }
    let mut table = Vec::with_capacity(n);
    let mut acc = 0.0;
    for (i, &h) in seg.iter().enumerate() {
        if h <= IMMERSION_TOL * total {
            return Err(CurveError::NotImmersed(i, (i + 1) % n));
        }
        table.push(acc);
        acc += h;
    }
    Ok((table, total))
}

/// Unit tangent from the normalized neighbour chord `γ_{i+1} - γ_{i-1}`.
pub fn tangent_at(curve: &Curve, index: usize) -> Vec<f64> {
    let n = curve.len();
    let i = index % n;
    let next = curve.point(i + 1);
    let prev = curve.point(i + n - 1);
    let mut t: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
    let len = norm(&t);
    t.iter_mut().for_each(|x| *x /= len);
    t
}

/// Three-point nonuniform second difference
/// `2[(γ_{i+1}-γ_i)/h₊ - (γ_i-γ_{i-1})/h₋] / (h₊ + h₋)`.
pub fn curvature_vector(curve: &Curve, index: usize) -> Vec<f64> {
    let mut out = vec![0.0; curve.dim()];
    curvature_vector_into(curve, index, &mut out);
    out
}

pub(crate) fn curvature_vector_into(curve: &Curve, index: usize, out: &mut [f64]) {
    let n = curve.len();
    let i = index % n;
    let h_plus = curve.segment_length(i);
    let h_minus = curve.segment_length(i + n - 1);
    let (prev, cur, next) = (curve.point(i + n - 1), curve.point(i), curve.point(i + 1));
    let w = 2.0 / (h_plus + h_minus);
    for k in 0..curve.dim() {
        out[k] = w * ((next[k] - cur[k]) / h_plus - (cur[k] - prev[k]) / h_minus);
    }
}

/// All curvature vectors, flat, plus their magnitudes.
pub fn curvature_profile(curve: &Curve) -> (Vec<f64>, Vec<f64>) {
    let dim = curve.dim();
    let mut vecs = vec![0.0; curve.coords().len()];
    let mut mags = Vec::with_capacity(curve.len());
    for (i, out) in vecs.chunks_exact_mut(dim).enumerate() {
        curvature_vector_into(curve, i, out);
        mags.push(norm(out));
    }
    (vecs, mags)
}

/// Discrete `∫ k² ds`: `Σ k_i² (h₊ + h₋)/2`.
pub fn integral_k_squared(curve: &Curve, k: &[f64]) -> f64 {
    let n = curve.len();
    (0..n)
        .map(|i| {
            let dual = 0.5 * (curve.segment_length(i) + curve.segment_length(i + n - 1));
            k[i] * k[i] * dual
        })
        .sum()
}

/// Sum of exterior angles between consecutive segments (discrete `∫ k ds`).
pub fn total_curvature(curve: &Curve) -> f64 {
    let n = curve.len();
    let dim = curve.dim();
    let mut prev = vec![0.0; dim];
    let mut cur = vec![0.0; dim];
    let edge = |i: usize, out: &mut [f64]| {
        let (a, b) = (curve.point(i), curve.point(i + 1));
        for k in 0..dim {
            out[k] = b[k] - a[k];
        }
    };
    edge(n - 1, &mut prev);
    let mut total = 0.0;
    for i in 0..n {
        edge(i, &mut cur);
        total += angle_between(&prev, &cur);
        std::mem::swap(&mut prev, &mut cur);
    }
    total
}

/// Resamples to `n_new` vertices with equal chord lengths along the periodic
/// cubic interpolant. With `anchor`, vertex 0 is placed at that polygon
/// arclength of the input curve.
pub fn resample_uniform(curve: &Curve, n_new: usize, anchor: Option<f64>) -> Result<Curve, CurveError> {
    if n_new < MIN_VERTICES {
        return Err(CurveError::TooFewVertices { min: MIN_VERTICES, got: n_new });
    }
    let spline = PeriodicSpline::new(curve);
    let start = anchor.unwrap_or(0.0).rem_euclid(curve.length());
    let coords = spline.equal_chord_points(start, n_new);
    Curve::new(curve.dim(), coords)
}

/// Reference regular polygon on the circle of given radius in the xy-plane.
pub fn circle_polygon(radius: f64, dim: usize, n: usize) -> Curve {
    let mut coords = vec![0.0; n * dim];
    for j in 0..n {
        let u = TAU * j as f64 / n as f64;
        coords[j * dim] = radius * u.cos();
        coords[j * dim + 1] = radius * u.sin();
    }
    Curve::new(dim, coords).expect("regular polygon is immersed")
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fourier::{synthesize_fourier_curve, FourierSpec, FourierTerm};

    #[test]
    fn circle_synthesis_is_inscribed_polygon() {
        for n in [256usize, 512] {
            let c = synthesize_fourier_curve(&FourierSpec::circle(1.0, 2, n)).unwrap();
            // exact inscribed perimeter
            let exact = 2.0 * n as f64 * (PI / n as f64).sin();
            assert!((c.length() - exact).abs() < 1e-12);
            assert!(c.length() <= TAU && c.length() >= TAU - 1e-3);
        }
        let c512 = synthesize_fourier_curve(&FourierSpec::circle(1.0, 2, 512)).unwrap();
        assert!((c512.length() - TAU).abs() < 1e-4);
    }

    #[test]
    fn square_corners_have_length_eight() {
        let sq = [1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let (table, l) = arclength_table(2, &sq).unwrap();
        assert_eq!(l, 8.0);
        assert_eq!(table, vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn repeated_points_are_rejected() {
        let mut pts: Vec<Vec<f64>> = (0..10).map(|j| vec![(j as f64).cos(), (j as f64).sin()]).collect();
        pts[4] = pts[3].clone();
        assert_eq!(Curve::from_points(&pts), Err(CurveError::NotImmersed(3, 4)));
        assert!(matches!(
            Curve::from_points(&pts[..5]),
            Err(CurveError::TooFewVertices { .. })
        ));
    }

    #[test]
    fn tangent_of_circle_and_line() {
        let c = circle_polygon(1.0, 3, 256);
        let t = tangent_at(&c, 0);
        assert!((t[0]).abs() < 1e-3 && (t[1] - 1.0).abs() < 1e-3 && t[2] == 0.0);
        // collinear interior vertex of a long thin hexagon-like polygon
        let pts: Vec<Vec<f64>> = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![2.0, 1.0],
            vec![3.0, 1.5],
            vec![4.0, 2.0],
            vec![3.0, 3.0],
            vec![1.0, 3.0],
            vec![-1.0, 2.0],
        ];
        let c = Curve::from_points(&pts).unwrap();
        let t = tangent_at(&c, 2);
        let d = (1.0f64 + 0.25).sqrt();
        assert!((t[0] - 1.0 / d).abs() < 1e-15 && (t[1] - 0.5 / d).abs() < 1e-15);
    }

    #[test]
    fn circle_curvature_is_inverse_radius() {
        let c = circle_polygon(1.0, 2, 512);
        for i in 0..c.len() {
            let k = curvature_vector(&c, i);
            let p = c.point(i);
            assert!((norm(&k) - 1.0).abs() < 1e-3);
            // points at the center
            assert!(dot(&k, p) < 0.0 && (dot(&k, p) / norm(p) + norm(&k)).abs() < 1e-9);
        }
        let c2 = circle_polygon(2.0, 2, 512);
        assert!((norm(&curvature_vector(&c2, 7)) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn curvature_stencil_is_exact_on_parabolas() {
        // y = x², nonuniform x spacing; stencil recovers γ_ss at the middle vertex
        // only up to the arclength metric, so check the y-second-difference in x instead
        let xs = [-0.3, 0.0, 0.1];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (hm, hp) = (xs[1] - xs[0], xs[2] - xs[1]);
        let second = 2.0 * ((ys[2] - ys[1]) / hp - (ys[1] - ys[0]) / hm) / (hp + hm);
        assert!((second - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_curvature_converges_second_order() {
        // sample a circle non-uniformly so the stencil error is visible
        let err = |n: usize| {
            let mut coords = Vec::new();
            for j in 0..n {
                let u = TAU * j as f64 / n as f64;
                let u = u + 0.3 * u.sin();
                coords.extend([u.cos(), u.sin()]);
            }
            let c = Curve::new(2, coords).unwrap();
            (0..n).map(|i| (norm(&curvature_vector(&c, i)) - 1.0).abs()).fold(0.0, f64::max)
        };
        let errs: Vec<f64> = [64, 128, 256, 512].iter().map(|&n| err(n)).collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.7, "{errs:?}");
        }
        // |k - 1/r| ≤ C/N² with a single fitted constant
        let c_fit = errs[0] * 64.0 * 64.0;
        for (e, n) in errs.iter().zip([64.0, 128.0, 256.0, 512.0]) {
            assert!(*e <= 1.5 * c_fit / (n * n));
        }
    }

    #[test]
    fn total_curvature_of_convex_curves() {
        let c = circle_polygon(1.0, 2, 300);
        assert!((total_curvature(&c) - TAU).abs() < 1e-6);
        let e = synthesize_fourier_curve(&FourierSpec::ellipse(2.0, 1.0, 256)).unwrap();
        assert!((total_curvature(&e) - TAU).abs() < 1e-6);
    }

    #[test]
    fn resample_circle_is_fixed_point() {
        let c = circle_polygon(1.0, 2, 256);
        let r = resample_uniform(&c, 256, Some(0.0)).unwrap();
        for i in 0..256 {
            assert!(dist(c.point(i), r.point(i)) < 1e-6, "vertex {i}");
        }
    }

    #[test]
    fn resample_equalizes_clustered_sampling() {
        let n = 200;
        let mut coords = Vec::new();
        for j in 0..n {
            let v = TAU * j as f64 / n as f64;
            let u = v + 0.8 * v.sin();
            coords.extend([u.cos(), u.sin()]);
        }
        let c = Curve::new(2, coords).unwrap();
        let r = resample_uniform(&c, 256, None).unwrap();
        let target = r.length() / 256.0;
        let worst = (0..256).map(|i| (r.segment_length(i) - target).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9 * r.length(), "{worst}");
        assert!((r.length() / c.length() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn resample_rejects_tiny_counts() {
        let c = circle_polygon(1.0, 2, 64);
        assert!(resample_uniform(&c, 4, None).is_err());
    }

    #[test]
    fn crown_curve_has_nontrivial_z() {
        let c = synthesize_fourier_curve(&FourierSpec::crown(512)).unwrap();
        assert_eq!(c.dim(), 3);
        assert_eq!(c.point(0), &[1.0, 0.0, 1.5]);
        let spec = FourierSpec::crown(512);
        assert_eq!(spec.coords[2][1], FourierTerm::cos(4, 0.5));
    }
}
