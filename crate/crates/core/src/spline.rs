//! Periodic C¹ cubic interpolation of a closed polygon.
//!
//! The interpolant is a Hermite cubic per segment, parametrized by the
//! polygon arclength `τ` of its knots. Knot tangents use the three-point
//! nonuniform first difference, which is exact on quadratics (Catmull–Rom
//! on the arclength parameter). Its own arclength `s` is measured by
//! Gauss–Legendre quadrature and is what the distance-ratio code uses.

use crate::curve::{dot, Curve};

// 5-point Gauss–Legendre on [0, 1]
const GL_NODES: [f64; 5] = [
    0.046_910_077_030_668_0,
    0.230_765_344_947_158_5,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_332_0,
];
const GL_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    dim: usize,
    n: usize,
    /// knot parameters, `n + 1` entries, last one is the period
    knots: Vec<f64>,
    points: Vec<f64>,
    tangents: Vec<f64>,
    /// spline arclength at each knot, `n + 1` entries
    arc: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(curve: &Curve) -> Self {
        let dim = curve.dim();
        let n = curve.len();
        let mut knots = curve.arclength().to_vec();
        knots.push(curve.length());
        let points = curve.coords().to_vec();
        let mut tangents = vec![0.0; n * dim];
        for i in 0..n {
            let hp = curve.segment_length(i);
            let hm = curve.segment_length(i + n - 1);
            let (prev, cur, next) = (curve.point(i + n - 1), curve.point(i), curve.point(i + 1));
            let wp = hm / (hp + hm);
            let wm = hp / (hp + hm);
            for k in 0..dim {
                tangents[i * dim + k] = wp * (next[k] - cur[k]) / hp + wm * (cur[k] - prev[k]) / hm;
            }
        }
        let mut spline = PeriodicSpline { dim, n, knots, points, tangents, arc: Vec::new() };
        let mut arc = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        arc.push(0.0);
        for i in 0..n {
            acc += spline.segment_arc(i, 1.0);
            arc.push(acc);
        }
        spline.arc = arc;
        spline
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Parameter period (polygon length of the source curve).
    pub fn period(&self) -> f64 {
        self.knots[self.n]
    }

    /// Arclength of the interpolant.
    pub fn length(&self) -> f64 {
        self.arc[self.n]
    }

    pub fn knot_param(&self, i: usize) -> f64 {
        self.knots[i % self.n]
    }

    /// Spline arclength of knot `i`.
    pub fn knot_arclength(&self, i: usize) -> f64 {
        self.arc[i % self.n]
    }

    pub fn knot_point(&self, i: usize) -> &[f64] {
        let i = i % self.n;
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn tangent(&self, i: usize) -> &[f64] {
        let i = i % self.n;
        &self.tangents[i * self.dim..(i + 1) * self.dim]
    }

    fn locate(&self, tau: f64) -> (usize, f64) {
        let period = self.period();
        let tau = tau.rem_euclid(period);
        let seg = self.knots.partition_point(|&k| k <= tau).saturating_sub(1).min(self.n - 1);
        (seg, tau - self.knots[seg])
    }

    fn seg_h(&self, seg: usize) -> f64 {
        self.knots[seg + 1] - self.knots[seg]
    }

    /// Position, first and second derivative w.r.t. `τ` inside `seg` at local offset.
    fn eval_local(&self, seg: usize, local: f64, pos: &mut [f64], d1: Option<&mut [f64]>, d2: Option<&mut [f64]>) {
        let h = self.seg_h(seg);
        let t = local / h;
        let (t2, t3) = (t * t, t * t * t);
        let (h00, h10, h01, h11) = (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2);
        let (p0, p1) = (self.knot_point(seg), self.knot_point(seg + 1));
        let (m0, m1) = (self.tangent(seg), self.tangent(seg + 1));
        for k in 0..self.dim {
            pos[k] = h00 * p0[k] + h10 * h * m0[k] + h01 * p1[k] + h11 * h * m1[k];
        }
        if let Some(d1) = d1 {
            let (a00, a10, a01, a11) = (6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t);
            for k in 0..self.dim {
                d1[k] = (a00 * p0[k] + a01 * p1[k]) / h + a10 * m0[k] + a11 * m1[k];
            }
        }
        if let Some(d2) = d2 {
            let (b00, b10, b01, b11) = (12.0 * t - 6.0, 6.0 * t - 4.0, -12.0 * t + 6.0, 6.0 * t - 2.0);
            for k in 0..self.dim {
                d2[k] = (b00 * p0[k] + b01 * p1[k]) / (h * h) + (b10 * m0[k] + b11 * m1[k]) / h;
            }
        }
    }

    pub fn eval(&self, tau: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        let (seg, local) = self.locate(tau);
        self.eval_local(seg, local, &mut p, None, None);
        p
    }

    pub fn eval_into(&self, tau: f64, out: &mut [f64]) {
        let (seg, local) = self.locate(tau);
        self.eval_local(seg, local, out, None, None);
    }

    /// Position and derivative w.r.t. `τ`.
    pub fn eval_with_derivative(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; self.dim];
        let mut d = vec![0.0; self.dim];
        let (seg, local) = self.locate(tau);
        self.eval_local(seg, local, &mut p, Some(&mut d), None);
        (p, d)
    }

    fn speed_local(&self, seg: usize, local: f64) -> f64 {
        let h = self.seg_h(seg);
        let t = local / h;
        let t2 = t * t;
        let (a00, a10, a01, a11) = (6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t);
        let (p0, p1) = (self.knot_point(seg), self.knot_point(seg + 1));
        let (m0, m1) = (self.tangent(seg), self.tangent(seg + 1));
        let mut s2 = 0.0;
        for k in 0..self.dim {
            let d = (a00 * p0[k] + a01 * p1[k]) / h + a10 * m0[k] + a11 * m1[k];
            s2 += d * d;
        }
        s2.sqrt()
    }

    /// Arclength of segment `seg` from its start to fraction `frac` of it.
    fn segment_arc(&self, seg: usize, frac: f64) -> f64 {
        let h = self.seg_h(seg) * frac;
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(&x, w)| w * self.speed_local(seg, x * h))
            .sum::<f64>()
            * h
    }

    /// Spline arclength at parameter `τ` (in `[0, length)`).
    pub fn arclength_at(&self, tau: f64) -> f64 {
        let (seg, local) = self.locate(tau);
        let h = self.seg_h(seg);
        self.arc[seg] + self.segment_arc(seg, local / h)
    }

    /// Parameter `τ` where the spline arclength equals `s` (taken modulo the length).
    pub fn param_at(&self, s: f64) -> f64 {
        let total = self.length();
        let s = s.rem_euclid(total);
        let seg = self.arc.partition_point(|&a| a <= s).saturating_sub(1).min(self.n - 1);
        let h = self.seg_h(seg);
        let (a0, a1) = (self.arc[seg], self.arc[seg + 1]);
        let mut local = h * (s - a0) / (a1 - a0);
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..50 {
            let f = a0 + self.segment_arc(seg, local / h) - s;
            if f.abs() <= 1e-15 * total.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = local;
            } else {
                lo = local;
            }
            let speed = self.speed_local(seg, local);
            let mut next = local - f / speed;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - local).abs() <= 1e-16 * h.max(1.0) {
                local = next;
                break;
            }
            local = next;
        }
        self.knots[seg] + local
    }

    /// Point at spline arclength `s`.
    pub fn point_at(&self, s: f64) -> Vec<f64> {
        self.eval(self.param_at(s))
    }

    /// Point and unit tangent (w.r.t. arclength) at spline arclength `s`.
    pub fn frame_at(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let (p, mut d) = self.eval_with_derivative(self.param_at(s));
        let len = dot(&d, &d).sqrt();
        d.iter_mut().for_each(|x| *x /= len);
        (p, d)
    }

    /// `n` points with equal consecutive chord lengths, the first at `τ0`.
    pub fn equal_chord_points(&self, tau0: f64, n: usize) -> Vec<f64> {
        let period = self.period();
        // the knots' own mean chord is close for curves that are already near equal-chord
        let mut c = period / n as f64;
        let target = tau0 + period;
        let mut best = self.march(tau0, c, n);
        let mut f = best[n] - target;
        let tol = 1e-12 * period;
        // bracketed secant (Illinois) on the closure defect, which increases with c
        let (mut c_lo, mut f_lo, mut c_hi, mut f_hi) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
        let mut prev: Option<(f64, f64)> = None;
        let mut side = 0i32;
        for _ in 0..200 {
            if f.abs() <= tol {
                break;
            }
            if f < 0.0 {
                c_lo = c;
                f_lo = f;
            } else {
                c_hi = c;
                f_hi = f;
            }
            let next = if c_lo.is_finite() && c_hi.is_finite() {
                let guess = (c_lo * f_hi - c_hi * f_lo) / (f_hi - f_lo);
                if guess > c_lo && guess < c_hi {
                    guess
                } else {
                    0.5 * (c_lo + c_hi)
                }
            } else {
                match prev {
                    Some((cp, fp)) if fp != f => c - f * (c - cp) / (f - fp),
                    // dτ_n/dc ≈ n·period/length
                    _ => c - f * self.length() / (n as f64 * period),
                }
            };
            prev = Some((c, f));
            c = next;
            best = self.march(tau0, c, n);
            f = best[n] - target;
            // Illinois modification keeps the stale endpoint from stalling
            let new_side = if f < 0.0 { -1 } else { 1 };
            if new_side == side {
                if side < 0 {
                    f_hi *= 0.5;
                } else {
                    f_lo *= 0.5;
                }
            }
            side = new_side;
        }
        let mut coords = Vec::with_capacity(n * self.dim);
        let mut p = vec![0.0; self.dim];
        for &tau in &best[..n] {
            self.eval_into(tau, &mut p);
            coords.extend_from_slice(&p);
        }
        coords
    }

    /// Places `n` consecutive points at chord distance `c`, returning all
    /// `n + 1` parameters (the last one should land one period after `τ0`).
    fn march(&self, tau0: f64, c: f64, n: usize) -> Vec<f64> {
        let mut taus = Vec::with_capacity(n + 1);
        taus.push(tau0);
        let mut p_prev = self.eval(tau0);
        let mut step = self.period() / n as f64;
        let mut pos = vec![0.0; self.dim];
        let mut d1 = vec![0.0; self.dim];
        let eps = 1e-16 * self.period();
        for _ in 0..n {
            let lo0 = *taus.last().unwrap();
            // Newton from the previous parameter step, safeguarded by a bracket
            // that is grown forward until the chord first exceeds c
            let (mut lo, mut hi) = (lo0, f64::INFINITY);
            let mut tau = lo0 + step;
            for _ in 0..200 {
                let (seg, local) = self.locate(tau);
                self.eval_local(seg, local, &mut pos, Some(&mut d1), None);
                let mut r2 = 0.0;
                let mut gp = 0.0;
                for k in 0..self.dim {
                    let d = pos[k] - p_prev[k];
                    r2 += d * d;
                    gp += d * d1[k];
                }
                let r = r2.sqrt();
                let g = r - c;
                if g > 0.0 {
                    hi = tau;
                } else {
                    lo = tau;
                }
                if g == 0.0 || hi - lo <= eps {
                    break;
                }
                let gp = gp / r;
                // a correction below the resolution of τ means we are done
                if gp > 0.0 && (g / gp).abs() <= eps.max(4.0 * f64::EPSILON * tau.abs()) {
                    break;
                }
                let mut next = if gp > 0.0 { tau - g / gp } else { f64::NAN };
                if !(next > lo && next < hi) {
                    next = if hi.is_finite() { 0.5 * (lo + hi) } else { tau + 0.5 * step };
                }
                let moved = (next - tau).abs();
                tau = next;
                if moved <= eps {
                    break;
                }
            }
            step = (tau - lo0).max(1e-300);
            self.eval_into(tau, &mut p_prev);
            taus.push(tau);
        }
        taus
    }
}
