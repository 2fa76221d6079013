//! Trigonometric descriptions of closed curves.
//!
//! Each coordinate is a finite series `Σ a_k cos(k u) + b_k sin(k u)` on
//! `u ∈ [0, 2π)`. This is how initial data is written in experiment configs.

use std::f64::consts::TAU;
use std::fmt;

use crate::curve::{Curve, CurveError};

/// One harmonic of a coordinate series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierTerm {
    pub freq: u32,
    pub cos: f64,
    pub sin: f64,
}

impl FourierTerm {
    pub fn cos(freq: u32, coef: f64) -> Self {
        FourierTerm { freq, cos: coef, sin: 0.0 }
    }

    pub fn sin(freq: u32, coef: f64) -> Self {
        FourierTerm { freq, cos: 0.0, sin: coef }
    }
}

/// Per-coordinate harmonic lists plus the number of samples to take.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpec {
    pub coords: Vec<Vec<FourierTerm>>,
    pub samples: usize,
}

impl FourierSpec {
    pub fn new(coords: Vec<Vec<FourierTerm>>, samples: usize) -> Self {
        FourierSpec { coords, samples }
    }

    /// `(cos u, sin u)` scaled by `radius`, padded with zero coordinates up to `dim`.
    pub fn circle(radius: f64, dim: usize, samples: usize) -> Self {
        let mut coords = vec![vec![FourierTerm::cos(1, radius)], vec![FourierTerm::sin(1, radius)]];
        coords.resize(dim.max(2), Vec::new());
        FourierSpec { coords, samples }
    }

    /// `(a cos u, b sin u)`.
    pub fn ellipse(a: f64, b: f64, samples: usize) -> Self {
        FourierSpec {
            coords: vec![vec![FourierTerm::cos(1, a)], vec![FourierTerm::sin(1, b)]],
            samples,
        }
    }

    /// `(cos u, 0.3 sin u, 0.5 cos 2u + 0.5 cos 4u + 0.5 cos 6u)`, the
    /// doubly reflection-symmetric space curve with a convex xy-shadow.
    pub fn crown(samples: usize) -> Self {
        FourierSpec {
            coords: vec![
                vec![FourierTerm::cos(1, 1.0)],
                vec![FourierTerm::sin(1, 0.3)],
                vec![
                    FourierTerm::cos(2, 0.5),
                    FourierTerm::cos(4, 0.5),
                    FourierTerm::cos(6, 0.5),
                ],
            ],
            samples,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        if self.coords.len() < 2 {
            return Err(CurveError::DimensionTooSmall(self.coords.len()));
        }
        let all_zero = self
            .coords
            .iter()
            .flatten()
            .all(|t| t.cos == 0.0 && t.sin == 0.0);
        if all_zero {
            return Err(CurveError::DegenerateSpec("all coefficients are zero".into()));
        }
        let has_loop = self
            .coords
            .iter()
            .flatten()
            .any(|t| t.freq == 1 && (t.cos != 0.0 || t.sin != 0.0));
        if !has_loop {
            return Err(CurveError::DegenerateSpec(
                "no coordinate has a nonzero frequency-1 term".into(),
            ));
        }
        Ok(())
    }

    /// Point at parameter `u`.
    pub fn eval(&self, u: f64) -> Vec<f64> {
        self.coords
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|t| {
                        let k = t.freq as f64;
                        t.cos * (k * u).cos() + t.sin * (k * u).sin()
                    })
                    .sum()
            })
            .collect()
    }
}

/// Samples the series at `u_j = 2πj/N`.
pub fn synthesize_fourier_curve(spec: &FourierSpec) -> Result<Curve, CurveError> {
    spec.validate()?;
    let n = spec.samples;
    let dim = spec.dim();
    let mut points = Vec::with_capacity(n * dim);
    for j in 0..n {
        let u = TAU * j as f64 / n as f64;
        points.extend(spec.eval(u));
    }
    Curve::new(dim, points)
}

impl fmt::Display for FourierSpec {
    /// Renders each coordinate in the config grammar, one per line:
    /// `c<i> = 0.5 cos 2u + 0.3 sin u`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, terms) in self.coords.iter().enumerate() {
            write!(f, "{} = {}", coord_name(i), format_series(terms))?;
            if i + 1 < self.coords.len() {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Names used for coordinates: `x`, `y`, `z`, then `c3`, `c4`, ...
pub fn coord_name(i: usize) -> String {
    match i {
        0 => "x".into(),
        1 => "y".into(),
        2 => "z".into(),
        _ => format!("c{i}"),
    }
}

pub fn format_series(terms: &[FourierTerm]) -> String {
    let mut parts = Vec::new();
    for t in terms {
        let arg = match t.freq {
            0 => String::new(),
            1 => "u".to_string(),
            k => format!("{k}u"),
        };
        if t.freq == 0 {
            if t.cos != 0.0 {
                parts.push(format!("{:?}", t.cos));
            }
            continue;
        }
        if t.cos != 0.0 {
            parts.push(format!("{:?} cos {arg}", t.cos));
        }
        if t.sin != 0.0 {
            parts.push(format!("{:?} sin {arg}", t.sin));
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Parses a series such as `0.5 cos 2u + 0.5cos4u - sin u + 1.5`.
///
/// A term is an optional coefficient followed by `cos` or `sin` and an
/// argument `ku` (or `u`), or a bare constant. Terms are joined with `+`/`-`.
pub fn parse_series(text: &str) -> Result<Vec<FourierTerm>, String> {
    let text = text.trim();
    if text == "0" || text.is_empty() {
        return Ok(Vec::new());
    }
    // split on + / - that are not part of an exponent
    let mut pieces: Vec<(f64, String)> = Vec::new();
    let mut sign = 1.0;
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let is_exponent_sign = i >= 2
            && matches!(chars[i - 1], 'e' | 'E')
            && (chars[i - 2].is_ascii_digit() || chars[i - 2] == '.');
        if (c == '+' || c == '-') && !is_exponent_sign {
            let op = if c == '-' { -1.0 } else { 1.0 };
            if cur.trim().is_empty() {
                sign *= op;
            } else {
                pieces.push((sign, std::mem::take(&mut cur)));
                sign = op;
            }
            cur.clear();
            continue;
        }
        cur.push(c);
    }
    if cur.trim().is_empty() {
        return Err("dangling operator at end of series".into());
    }
    pieces.push((sign, cur));

    let mut terms = Vec::new();
    for (sign, piece) in pieces {
        terms.push(parse_term(sign, piece.trim())?);
    }
    Ok(terms)
}

fn parse_term(sign: f64, piece: &str) -> Result<FourierTerm, String> {
    let compact: String = piece.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
    let (kind, idx) = if let Some(i) = compact.find("cos") {
        ("cos", i)
    } else if let Some(i) = compact.find("sin") {
        ("sin", i)
    } else {
        let c: f64 = compact
            .parse()
            .map_err(|_| format!("cannot parse term `{piece}`"))?;
        return Ok(FourierTerm { freq: 0, cos: sign * c, sin: 0.0 });
    };
    let coef_text = &compact[..idx];
    let coef = if coef_text.is_empty() {
        1.0
    } else {
        coef_text
            .parse::<f64>()
            .map_err(|_| format!("bad coefficient `{coef_text}` in `{piece}`"))?
    };
    let arg = compact[idx + 3..].trim_start_matches('(').trim_end_matches(')');
    let freq_text = arg
        .strip_suffix('u')
        .ok_or_else(|| format!("argument of `{kind}` must end in `u` in `{piece}`"))?;
    let freq = if freq_text.is_empty() {
        1
    } else {
        freq_text
            .parse::<u32>()
            .map_err(|_| format!("bad frequency `{freq_text}` in `{piece}`"))?
    };
    let coef = sign * coef;
    Ok(if kind == "cos" {
        FourierTerm::cos(freq, coef)
    } else {
        FourierTerm::sin(freq, coef)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_crown_coordinates() {
        let z = parse_series("0.5cos2u+0.5cos4u+0.5cos6u").unwrap();
        assert_eq!(
            z,
            vec![FourierTerm::cos(2, 0.5), FourierTerm::cos(4, 0.5), FourierTerm::cos(6, 0.5)]
        );
        assert_eq!(parse_series("cos u").unwrap(), vec![FourierTerm::cos(1, 1.0)]);
        assert_eq!(parse_series("0.3 sin u").unwrap(), vec![FourierTerm::sin(1, 0.3)]);
    }

    #[test]
    fn parses_signs_constants_and_exponents() {
        let t = parse_series("-2 sin 3u + 1.5 - 1e-3 cos(2u)").unwrap();
        assert_eq!(
            t,
            vec![
                FourierTerm::sin(3, -2.0),
                FourierTerm { freq: 0, cos: 1.5, sin: 0.0 },
                FourierTerm::cos(2, -1e-3),
            ]
        );
        assert_eq!(parse_series("0").unwrap(), vec![]);
        assert!(parse_series("cos").is_err());
        assert!(parse_series("cos u +").is_err());
        assert!(parse_series("2 tan u").is_err());
    }

    #[test]
    fn display_round_trips_through_parser() {
        let spec = FourierSpec::crown(64);
        let text = spec.to_string();
        for (i, line) in text.lines().enumerate() {
            let (_, rhs) = line.split_once('=').unwrap();
            assert_eq!(parse_series(rhs).unwrap(), spec.coords[i]);
        }
    }

    #[test]
    fn rejects_degenerate_specs() {
        let zero = FourierSpec::new(vec![vec![FourierTerm::cos(1, 0.0)], vec![]], 64);
        assert!(matches!(synthesize_fourier_curve(&zero), Err(CurveError::DegenerateSpec(_))));
        let no_loop = FourierSpec::new(vec![vec![FourierTerm::cos(2, 1.0)], vec![FourierTerm::sin(2, 1.0)]], 64);
        assert!(synthesize_fourier_curve(&no_loop).is_err());
    }
}
