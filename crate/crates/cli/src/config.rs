//! Experiment config files.
//!
//! The format is flat `key = value` lines grouped under `[section]` headers.
//! `#` starts a comment. Every key is optional except the curve and `n`.
//!
//! ```text
//! [curve]
//! x = cos u                  # one Fourier series per coordinate: x, y, z, c3, c4, ...
//! y = 0.3 sin u
//! z = 0.5 cos 2u + 0.5 cos 4u + 0.5 cos 6u
//! dim = 3                    # pads with zero coordinates; defaults to the highest given
//! n = 1024                   # vertices
//!
//! [flow]
//! sigma = 0.25               # Δt = σ (min Δs)², 0 < σ ≤ 0.5
//! resample_every = 25
//! symmetrize = false
//! record_every = 100         # steps between records
//! record_length_drop = 0.01  # extra record after L drops by this fraction; `none` disables
//! max_steps = none
//! max_time = none
//! min_length_fraction = 0.05
//! curvature_cap = 200        # stop at k_max ≥ cap / L(0)
//!
//! [planes]                   # id = axis name, or normal components [@ offset]
//! y0 = y
//! tilted = 1 1 0 @ 0.5
//!
//! [monitors]
//! huisken = true
//! symmetric = false          # uses the first plane
//! projection = false
//! diagnostics = true
//! rate_tol = 0.001
//!
//! [singularity]
//! q_lo = 0.1
//! q_hi = 10
//! max_drift = 3
//! min_tail = 8
//!
//! [output]
//! dir = out
//! trace = true
//! report = true
//! snapshots = true
//! snapshot_times = 0 0.1 0.2 # the final state is always drawn too
//! views = xy xz yz
//! seed = 0                   # reserved
//! ```
//!
//! A missing `[planes]` section means the single plane `y0 = y`; an empty
//! one means no planes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use scsf_core::flow::{FlowConfig, FlowError, Monitors, NamedPlane, StopConditions};
use scsf_core::fourier::{coord_name, parse_series};
use scsf_core::singularity::TypeThresholds;
use scsf_core::symmetry::Hyperplane;
use scsf_core::FourierSpec;
use thiserror::Error;

use crate::svg::{axis_index, View};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Parse { line, msg: msg.into() })
}

fn invalid<T>(field: &str, reason: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid { field: field.into(), reason: reason.into() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trace: bool,
    pub report: bool,
    pub snapshots: bool,
    pub snapshot_times: Vec<f64>,
    pub views: Vec<View>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            trace: true,
            report: true,
            snapshots: true,
            snapshot_times: vec![0.0],
            views: vec![View::new(0, 1)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub flow: FlowConfig,
    pub rate_tol: f64,
    pub thresholds: TypeThresholds,
    pub output: OutputConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn planar(&self) -> bool {
        self.flow.spec.coords.iter().skip(2).all(|c| c.iter().all(|t| t.cos == 0.0 && t.sin == 0.0))
    }

    /// Canonical text of the config with all defaults filled in. Parsing the
    /// echo gives back the same config.
    pub fn echo(&self) -> String {
        let f = &self.flow;
        let opt_f = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:?}"));
        let mut s = String::new();
        let _ = writeln!(s, "[curve]\n{}", f.spec);
        let _ = writeln!(s, "dim = {}\nn = {}\n", f.spec.dim(), f.n);
        let _ = writeln!(s, "[flow]");
        let _ = writeln!(s, "sigma = {:?}", f.sigma);
        let _ = writeln!(s, "resample_every = {}", f.resample_every);
        let _ = writeln!(s, "symmetrize = {}", f.symmetrize);
        let _ = writeln!(s, "record_every = {}", f.record_every);
        let _ = writeln!(s, "record_length_drop = {}", opt_f(f.record_length_drop));
        let _ = writeln!(s, "max_steps = {}", f.stop.max_steps.map_or("none".to_string(), |x| x.to_string()));
        let _ = writeln!(s, "max_time = {}", opt_f(f.stop.max_time));
        let _ = writeln!(s, "min_length_fraction = {}", opt_f(f.stop.min_length_fraction));
        let _ = writeln!(s, "curvature_cap = {}\n", opt_f(f.stop.curvature_cap_factor));
        let _ = writeln!(s, "[planes]");
        for p in &f.planes {
            let normal: Vec<String> = p.plane.normal().iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{} = {} @ {:?}", p.id, normal.join(" "), p.plane.offset());
        }
        let m = &f.monitors;
        let _ = writeln!(s, "\n[monitors]");
        let _ = writeln!(s, "huisken = {}\nsymmetric = {}\nprojection = {}\ndiagnostics = {}", m.huisken, m.symmetric, m.projection, m.diagnostics);
        let _ = writeln!(s, "rate_tol = {:?}\n", self.rate_tol);
        let t = &self.thresholds;
        let _ = writeln!(s, "[singularity]");
        let _ = writeln!(s, "q_lo = {:?}\nq_hi = {:?}\nmax_drift = {:?}\nmin_tail = {}\n", t.q_lo, t.q_hi, t.max_drift, t.min_tail);
        let o = &self.output;
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "dir = {}", o.dir.display());
        let _ = writeln!(s, "trace = {}\nreport = {}\nsnapshots = {}", o.trace, o.report, o.snapshots);
        let times: Vec<String> = o.snapshot_times.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(s, "snapshot_times = {}", times.join(" "));
        let views: Vec<String> = o.views.iter().map(|v| v.name()).collect();
        let _ = writeln!(s, "views = {}", views.join(" "));
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    parse_config_str(&text)
}

const SECTIONS: [&str; 6] = ["curve", "flow", "planes", "monitors", "singularity", "output"];

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn tokenize(text: &str) -> Result<(Vec<Entry>, bool), ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut section: Option<String> = None;
    let mut seen_sections = BTreeSet::new();
    let mut seen_keys = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return parse_err(line, "unterminated section header");
            };
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return parse_err(line, format!("unknown section [{name}]"));
            }
            if !seen_sections.insert(name.to_string()) {
                return parse_err(line, format!("section [{name}] appears twice"));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return parse_err(line, format!("expected `key = value`, got `{content}`"));
        };
        let Some(sec) = &section else {
            return parse_err(line, "key outside of any section");
        };
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return parse_err(line, format!("bad key `{key}`"));
        }
        if !seen_keys.insert((sec.clone(), key.to_string())) {
            return parse_err(line, format!("duplicate key `{key}` in [{sec}]"));
        }
        entries.push(Entry { line, section: sec.clone(), key: key.into(), value: value.trim().into() });
    }
    Ok((entries, seen_sections.contains("planes")))
}

fn num<T: std::str::FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value.parse().or_else(|_| parse_err(e.line, format!("`{}`: cannot parse `{}`", e.key, e.value)))
}

fn opt_num<T: std::str::FromStr>(e: &Entry) -> Result<Option<T>, ConfigError> {
    if e.value == "none" {
        Ok(None)
    } else {
        num(e).map(Some)
    }
}

fn boolean(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        v => parse_err(e.line, format!("`{}`: expected true or false, got `{v}`", e.key)),
    }
}

fn unknown<T>(e: &Entry) -> Result<T, ConfigError> {
    parse_err(e.line, format!("unknown key `{}` in [{}]", e.key, e.section))
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let (entries, has_planes) = tokenize(text)?;

    let mut coords: Vec<(usize, Vec<scsf_core::FourierTerm>)> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut n: Option<usize> = None;
    let mut flow = FlowConfig::new(FourierSpec::new(Vec::new(), 0), 0);
    flow.stop = StopConditions::default();
    flow.monitors = Monitors::default();
    let mut planes_raw: Vec<&Entry> = Vec::new();
    let mut rate_tol = scsf_core::ratio::DIAGNOSTIC_TOL;
    let mut thresholds = TypeThresholds::default();
    let mut output = OutputConfig::default();
    let mut seed = 0;

    for e in &entries {
        match (e.section.as_str(), e.key.as_str()) {
            ("curve", "n") => n = Some(num(e)?),
            ("curve", "dim") => dim = Some(num(e)?),
            ("curve", k) => {
                let Some(i) = axis_index(k) else { return unknown(e) };
                let terms = parse_series(&e.value).or_else(|m| parse_err(e.line, format!("`{k}`: {m}")))?;
                coords.push((i, terms));
            }
            ("flow", "sigma") => flow.sigma = num(e)?,
            ("flow", "resample_every") => flow.resample_every = num(e)?,
            ("flow", "symmetrize") => flow.symmetrize = boolean(e)?,
            ("flow", "record_every") => flow.record_every = num(e)?,
            ("flow", "record_length_drop") => flow.record_length_drop = opt_num(e)?,
            ("flow", "max_steps") => flow.stop.max_steps = opt_num(e)?,
            ("flow", "max_time") => flow.stop.max_time = opt_num(e)?,
            ("flow", "min_length_fraction") => flow.stop.min_length_fraction = opt_num(e)?,
            ("flow", "curvature_cap") => flow.stop.curvature_cap_factor = opt_num(e)?,
            ("planes", _) => planes_raw.push(e),
            ("monitors", "huisken") => flow.monitors.huisken = boolean(e)?,
            ("monitors", "symmetric") => flow.monitors.symmetric = boolean(e)?,
            ("monitors", "projection") => flow.monitors.projection = boolean(e)?,
            ("monitors", "diagnostics") => flow.monitors.diagnostics = boolean(e)?,
            ("monitors", "rate_tol") => rate_tol = num(e)?,
            ("singularity", "q_lo") => thresholds.q_lo = num(e)?,
            ("singularity", "q_hi") => thresholds.q_hi = num(e)?,
            ("singularity", "max_drift") => thresholds.max_drift = num(e)?,
            ("singularity", "min_tail") => thresholds.min_tail = num(e)?,
            ("output", "dir") => output.dir = PathBuf::from(&e.value),
            ("output", "trace") => output.trace = boolean(e)?,
            ("output", "report") => output.report = boolean(e)?,
            ("output", "snapshots") => output.snapshots = boolean(e)?,
            ("output", "snapshot_times") => {
                output.snapshot_times = e
                    .value
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().or_else(|_| parse_err(e.line, format!("bad snapshot time `{t}`"))))
                    .collect::<Result<_, _>>()?;
            }
            ("output", "views") => {
                output.views = e
                    .value
                    .split_whitespace()
                    .map(|v| View::parse(v).or_else(|m| parse_err(e.line, m)))
                    .collect::<Result<_, _>>()?;
            }
            ("output", "seed") => seed = num(e)?,
            _ => return unknown(e),
        }
    }

    let Some(n) = n else { return invalid("n", "missing from [curve]") };
    if coords.is_empty() {
        return invalid("curve", "no coordinate series given");
    }
    let highest = coords.iter().map(|(i, _)| i + 1).max().unwrap_or(0).max(2);
    let dim = dim.unwrap_or(highest);
    if dim < highest {
        return invalid("dim", format!("{dim} is smaller than the highest coordinate given ({})", coord_name(highest - 1)));
    }
    let mut series = vec![Vec::new(); dim];
    for (i, terms) in coords {
        series[i] = terms;
    }
    flow.spec = FourierSpec::new(series, n);
    flow.n = n;

    if has_planes {
        for e in planes_raw {
            let plane = parse_plane(&e.value, dim).or_else(|m| parse_err(e.line, format!("plane `{}`: {m}", e.key)))?;
            flow.planes.push(NamedPlane { id: e.key.clone(), plane });
        }
    } else {
        flow.planes.push(NamedPlane { id: "y0".into(), plane: Hyperplane::coordinate(1, dim) });
    }

    let cfg = ExperimentConfig { flow, rate_tol, thresholds, output, seed };
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_plane(value: &str, dim: usize) -> Result<Hyperplane, String> {
    let (normal_text, offset) = match value.split_once('@') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().map_err(|_| format!("bad offset `{}`", b.trim()))?),
        None => (value.trim(), 0.0),
    };
    if let Some(axis) = axis_index(normal_text) {
        if axis >= dim {
            return Err(format!("axis `{normal_text}` does not exist in R^{dim}"));
        }
        let mut normal = vec![0.0; dim];
        normal[axis] = 1.0;
        return Hyperplane::new(normal, offset).map_err(|e| e.to_string());
    }
    let normal: Vec<f64> = normal_text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad normal component `{t}`")))
        .collect::<Result<_, _>>()?;
    if normal.len() != dim {
        return Err(format!("normal has {} components, the curve lives in R^{dim}", normal.len()));
    }
    Hyperplane::new(normal, offset).map_err(|e| e.to_string())
}

fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    if let Err(e) = cfg.flow.validate() {
        return match e {
            FlowError::InvalidConfig { field, reason } => invalid(field, reason),
            other => invalid("flow", other.to_string()),
        };
    }
    let mut ids = BTreeSet::new();
    for p in &cfg.flow.planes {
        if !ids.insert(&p.id) {
            return invalid("planes", format!("duplicate plane id `{}`", p.id));
        }
    }
    let t = &cfg.thresholds;
    if !(t.q_lo > 0.0 && t.q_lo < t.q_hi) {
        return invalid("q_lo", format!("need 0 < q_lo < q_hi, got {} and {}", t.q_lo, t.q_hi));
    }
    if !(t.max_drift > 1.0) {
        return invalid("max_drift", format!("must exceed 1, got {}", t.max_drift));
    }
    if t.min_tail < 2 {
        return invalid("min_tail", "must be at least 2");
    }
    if !(cfg.rate_tol >= 0.0) {
        return invalid("rate_tol", format!("must be nonnegative, got {}", cfg.rate_tol));
    }
    let o = &cfg.output;
    if !(o.trace || o.report || o.snapshots) {
        return invalid("output", "at least one of trace, report, snapshots must be enabled");
    }
    if o.snapshots && o.views.is_empty() {
        return invalid("views", "snapshots are enabled but no view is given");
    }
    for v in &o.views {
        if v.a.max(v.b) >= cfg.flow.spec.dim() {
            return invalid("views", format!("view `{}` needs R^{}", v.name(), v.a.max(v.b) + 1));
        }
    }
    if o.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
        return invalid("snapshot_times", "times must be nonnegative");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[curve]\nx = cos u\ny = sin u\nn = 128\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.flow.n, 128);
        assert_eq!(c.flow.sigma, 0.25);
        assert_eq!(c.flow.planes.len(), 1);
        assert_eq!(c.flow.planes[0].id, "y0");
        assert_eq!(c.output.views, vec![View::new(0, 1)]);
        assert!(c.planar());
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config_str(MINIMAL).unwrap();
        let echo = c.echo();
        let again = parse_config_str(&echo).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.echo(), echo);
    }

    #[test]
    fn large_sigma_is_rejected() {
        let err = parse_config_str(&format!("{MINIMAL}[flow]\nsigma = 0.9\n")).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { field, .. } if field == "sigma"), "{err}");
    }

    #[test]
    fn unknown_keys_report_line_numbers() {
        let err = parse_config_str(&format!("{MINIMAL}\n[flow]\nsgima = 0.2\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 7, .. }), "{err}");
        let err = parse_config_str("[curve]\nx = cos u\nw = sin u\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err}");
        let err = parse_config_str("[curves]\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }), "{err}");
        let err = parse_config_str(&format!("{MINIMAL}n = 64\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn planes_parse_axis_and_normal_forms() {
        let text = "[curve]\nx = cos u\ny = sin u\nz = 0.1 sin 2u\nn = 64\n[planes]\na = x\nb = 0 2 0 @ 1\n";
        let c = parse_config_str(text).unwrap();
        assert_eq!(c.flow.planes[0].plane.normal(), &[1.0, 0.0, 0.0]);
        assert_eq!(c.flow.planes[1].plane.normal(), &[0.0, 1.0, 0.0]);
        assert_eq!(c.flow.planes[1].plane.offset(), 0.5);
        let none = parse_config_str(&format!("{MINIMAL}[planes]\n")).unwrap();
        assert!(none.flow.planes.is_empty());
        let bad = parse_config_str(&format!("{MINIMAL}[planes]\np = 1 0 0\n")).unwrap_err();
        assert!(matches!(bad, ConfigError::Parse { line: 6, .. }));
    }

    #[test]
    fn dim_pads_coordinates() {
        let c = parse_config_str(&format!("{MINIMAL}dim = 4\n")).unwrap();
        assert_eq!(c.flow.spec.dim(), 4);
        assert!(parse_config_str(&format!("{MINIMAL}z = sin u\ndim = 2\n")).is_err());
    }

    #[test]
    fn outputs_must_not_all_be_off() {
        let text = format!("{MINIMAL}[output]\ntrace = false\nreport = false\nsnapshots = false\n");
        assert!(matches!(parse_config_str(&text), Err(ConfigError::Invalid { field, .. }) if field == "output"));
    }
}
