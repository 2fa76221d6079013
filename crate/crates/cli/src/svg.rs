//! Stroke-only SVG snapshots of coordinate projections.

use std::fmt::Write as _;
use std::path::Path;

use scsf_core::fourier::coord_name;
use scsf_core::Curve;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvgError {
    #[error("view `{0}` uses the same coordinate twice")]
    DegenerateView(String),
    #[error("view `{view}` needs coordinate {axis} but the curve lives in R^{dim}")]
    MissingAxis { view: String, axis: usize, dim: usize },
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

/// An ordered pair of coordinate indices; `a` is drawn horizontally.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct View {
    pub a: usize,
    pub b: usize,
}

pub(crate) fn axis_index(name: &str) -> Option<usize> {
    match name {
        "x" => Some(0),
        "y" => Some(1),
        "z" => Some(2),
        _ => name.strip_prefix('c')?.parse().ok().filter(|&i| i >= 3),
    }
}

impl View {
    pub fn new(a: usize, b: usize) -> Self {
        View { a, b }
    }

    /// `xy`, `xz`, `yz`, ... or `a:b` with coordinate names, e.g. `x:c3`.
    pub fn parse(text: &str) -> Result<View, String> {
        let (a, b) = match text.split_once(':') {
            Some(pair) => pair,
            None if text.len() == 2 && text.is_ascii() => text.split_at(1),
            None => return Err(format!("bad view `{text}`")),
        };
        match (axis_index(a), axis_index(b)) {
            (Some(a), Some(b)) => Ok(View { a, b }),
            _ => Err(format!("bad view `{text}`")),
        }
    }

    pub fn name(&self) -> String {
        if self.a < 3 && self.b < 3 {
            format!("{}{}", coord_name(self.a), coord_name(self.b))
        } else {
            format!("{}:{}", coord_name(self.a), coord_name(self.b))
        }
    }

    fn check(&self, curve: &Curve) -> Result<(), SvgError> {
        if self.a == self.b {
            return Err(SvgError::DegenerateView(self.name()));
        }
        let axis = self.a.max(self.b);
        if axis >= curve.dim() {
            return Err(SvgError::MissingAxis { view: self.name(), axis, dim: curve.dim() });
        }
        Ok(())
    }
}

/// `[min_a, max_a] × [min_b, max_b]` in curve coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl ViewBox {
    /// Bounding box of the projection grown by 10% about its centre. A flat
    /// direction gets 10% of the other extent so the box never collapses.
    pub fn around(curve: &Curve, view: View) -> Result<ViewBox, SvgError> {
        view.check(curve)?;
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in curve.points() {
            for (k, axis) in [view.a, view.b].into_iter().enumerate() {
                lo[k] = lo[k].min(p[axis]);
                hi[k] = hi[k].max(p[axis]);
            }
        }
        let half = [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0];
        let floor = 0.1 * half[0].max(half[1]).max(f64::MIN_POSITIVE);
        let mut out = ViewBox { min: [0.0; 2], max: [0.0; 2] };
        for k in 0..2 {
            let c = (hi[k] + lo[k]) / 2.0;
            let h = (1.1 * half[k]).max(floor);
            out.min[k] = c - h;
            out.max[k] = c + h;
        }
        Ok(out)
    }
}

const PIXELS: f64 = 480.0;

/// SVG text of the projected polygon; the vertical axis points up.
pub fn render_svg(curve: &Curve, view: View, viewbox: &ViewBox) -> Result<String, SvgError> {
    view.check(curve)?;
    let w = viewbox.max[0] - viewbox.min[0];
    let h = viewbox.max[1] - viewbox.min[1];
    let scale = PIXELS / w.max(h);
    let (pw, ph) = (w * scale, h * scale);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{pw:.1}" height="{ph:.1}" viewBox="{:.6} {:.6} {:.6} {:.6}">"#,
        viewbox.min[0], -viewbox.max[1], w, h
    );
    let _ = write!(s, r#"<polygon fill="none" stroke="black" stroke-width="{:.6}" stroke-linejoin="round" points=""#, 1.5 / scale);
    for (i, p) in curve.points().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.6},{:.6}", p[view.a], -p[view.b]);
    }
    let _ = writeln!(s, r#""/>"#);
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

pub fn emit_snapshot_svg(curve: &Curve, view: View, viewbox: &ViewBox, path: &Path) -> Result<(), SvgError> {
    let text = render_svg(curve, view, viewbox)?;
    std::fs::write(path, text).map_err(|e| SvgError::Io { path: path.to_path_buf(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use scsf_core::curve::circle_polygon;

    #[test]
    fn views_parse_and_name() {
        assert_eq!(View::parse("xz").unwrap(), View::new(0, 2));
        assert_eq!(View::parse("x:c3").unwrap(), View::new(0, 3));
        assert_eq!(View::new(1, 2).name(), "yz");
        assert_eq!(View::new(0, 4).name(), "x:c4");
        assert!(View::parse("xw").is_err());
        assert!(View::parse("xyz").is_err());
    }

    #[test]
    fn unit_circle_viewbox() {
        let c = circle_polygon(1.0, 2, 256);
        let vb = ViewBox::around(&c, View::new(0, 1)).unwrap();
        for k in 0..2 {
            assert!((vb.min[k] + 1.1).abs() < 1e-12 && (vb.max[k] - 1.1).abs() < 1e-12, "{vb:?}");
        }
    }

    #[test]
    fn flat_view_does_not_collapse() {
        let c = circle_polygon(1.0, 3, 64);
        let vb = ViewBox::around(&c, View::new(0, 2)).unwrap();
        assert!((vb.max[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn degenerate_view_is_rejected() {
        let c = circle_polygon(1.0, 2, 64);
        assert!(matches!(ViewBox::around(&c, View::new(1, 1)), Err(SvgError::DegenerateView(_))));
        let vb = ViewBox { min: [-1.0; 2], max: [1.0; 2] };
        assert!(matches!(render_svg(&c, View::new(0, 0), &vb), Err(SvgError::DegenerateView(_))));
        assert!(matches!(render_svg(&c, View::new(0, 2), &vb), Err(SvgError::MissingAxis { .. })));
    }

    #[test]
    fn rendering_is_deterministic() {
        let c = circle_polygon(1.0, 2, 64);
        let vb = ViewBox::around(&c, View::new(0, 1)).unwrap();
        let a = render_svg(&c, View::new(0, 1), &vb).unwrap();
        let b = render_svg(&c, View::new(0, 1), &vb).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches(',').count(), 64);
        assert!(a.contains(r#"viewBox="-1.100000 -1.100000 2.200000 2.200000""#));
        assert!(a.contains(r#"fill="none""#));
    }
}
