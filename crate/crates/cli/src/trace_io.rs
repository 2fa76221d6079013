//! CSV files written by a run: `trace.csv`, `shape.csv` and `singularity.csv`.

use std::path::{Path, PathBuf};

use scsf_core::flow::TraceRow;
use scsf_core::singularity::{ShapeStats, SingularityReport};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}`")]
    BadValue { path: PathBuf, row: usize, column: String, value: String },
}

/// Fixed leading and trailing columns; `crossings_<id>` sit in between.
pub const LEADING: [&str; 8] = ["t", "step", "L", "k_max", "int_k2", "min_dpsi", "min_I", "argmin_s0"];
pub const TRAILING: [&str; 7] =
    ["proj_injective", "proj_convex", "sym_defect", "var_res1", "var_res2", "geo_slack", "rate_ok"];

pub fn trace_header(plane_ids: &[String]) -> Vec<String> {
    LEADING
        .iter()
        .map(|s| s.to_string())
        .chain(plane_ids.iter().map(|id| format!("crossings_{id}")))
        .chain(TRAILING.iter().map(|s| s.to_string()))
        .collect()
}

fn f(x: f64) -> String {
    format!("{x:?}")
}

fn of(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

fn ob(x: Option<bool>) -> String {
    x.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> TraceError + '_ {
    move |e| TraceError::Csv { path: path.to_path_buf(), source: e }
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<(), TraceError> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(&header).map_err(&err)?;
    for r in rows {
        w.write_record(&r).map_err(&err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

pub fn write_trace_csv(path: &Path, plane_ids: &[String], rows: &[TraceRow]) -> Result<(), TraceError> {
    write_rows(
        path,
        trace_header(plane_ids),
        rows.iter().map(|r| {
            let mut out = vec![
                f(r.t),
                r.step.to_string(),
                f(r.length),
                f(r.k_max),
                f(r.int_k2),
                of(r.min_dpsi),
                of(r.min_i),
                of(r.argmin_s0),
            ];
            for i in 0..plane_ids.len() {
                out.push(r.crossings.get(i).copied().flatten().map(|c| c.to_string()).unwrap_or_default());
            }
            out.extend([
                ob(r.proj_injective),
                ob(r.proj_convex),
                of(r.sym_defect),
                of(r.var_res1),
                of(r.var_res2),
                of(r.geo_slack),
                ob(r.rate_ok),
            ]);
            out
        }),
    )
}

const SHAPE_HEADER: [&str; 7] = ["t", "step", "roundness", "max_radius", "min_radius", "mean_radius", "planarity"];

pub fn write_shape_csv(path: &Path, rows: &[TraceRow]) -> Result<(), TraceError> {
    write_rows(
        path,
        SHAPE_HEADER.iter().map(|s| s.to_string()).collect(),
        rows.iter().filter_map(|r| {
            let s = r.shape.as_ref()?;
            Some(vec![
                f(r.t),
                r.step.to_string(),
                f(s.roundness),
                f(s.max_radius),
                f(s.min_radius),
                f(s.mean_radius),
                f(s.planarity_defect),
            ])
        }),
    )
}

/// `t, Q, roundness, rescaled_radius` for every record before `T_est`.
pub fn write_singularity_csv(path: &Path, report: &SingularityReport) -> Result<(), TraceError> {
    let header = ["t", "Q", "roundness", "rescaled_radius"].iter().map(|s| s.to_string()).collect();
    let lookup = |series: &[(f64, f64)], t: f64| series.iter().find(|(s, _)| *s == t).map(|&(_, v)| v);
    write_rows(
        path,
        header,
        report.classification.q_series.iter().map(|&(t, q)| {
            vec![
                f(t),
                f(q),
                of(lookup(&report.roundness_series, t)),
                of(lookup(&report.rescaled_radius_series, t)),
            ]
        }),
    )
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, TraceError> {
        let err = csv_err(path);
        let mut r = csv::Reader::from_path(path).map_err(&err)?;
        let header = r.headers().map_err(&err)?.iter().map(String::from).collect();
        let records = r.records().collect::<Result<Vec<_>, _>>().map_err(&err)?;
        Ok(Table { path: path.to_path_buf(), header, records })
    }

    fn col(&self, name: &str) -> Result<usize, TraceError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TraceError::MissingColumn { path: self.path.clone(), column: name.into() })
    }

    fn get<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<Option<T>, TraceError> {
        let v = self.records[row].get(col).unwrap_or("");
        if v.is_empty() {
            return Ok(None);
        }
        v.parse().map(Some).map_err(|_| TraceError::BadValue {
            path: self.path.clone(),
            row: row + 1,
            column: self.header[col].clone(),
            value: v.into(),
        })
    }

    fn req<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T, TraceError> {
        self.get(row, col)?.ok_or_else(|| TraceError::BadValue {
            path: self.path.clone(),
            row: row + 1,
            column: self.header[col].clone(),
            value: String::new(),
        })
    }

    fn flag(&self, row: usize, col: usize) -> Result<Option<bool>, TraceError> {
        Ok(self.get::<u8>(row, col)?.map(|v| v != 0))
    }
}

/// Reads a trace back; returns the plane ids and the rows. Shape statistics
/// come from `shape` when given.
pub fn read_trace_csv(path: &Path, shape: Option<&Path>) -> Result<(Vec<String>, Vec<TraceRow>), TraceError> {
    let t = Table::read(path)?;
    let lead: Vec<usize> = LEADING.iter().map(|c| t.col(c)).collect::<Result<_, _>>()?;
    let trail: Vec<usize> = TRAILING.iter().map(|c| t.col(c)).collect::<Result<_, _>>()?;
    let planes: Vec<(String, usize)> = t
        .header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("crossings_").map(|id| (id.to_string(), i)))
        .collect();
    let mut rows = Vec::with_capacity(t.records.len());
    for i in 0..t.records.len() {
        rows.push(TraceRow {
            t: t.req(i, lead[0])?,
            step: t.req(i, lead[1])?,
            length: t.req(i, lead[2])?,
            k_max: t.req(i, lead[3])?,
            int_k2: t.req(i, lead[4])?,
            min_dpsi: t.get(i, lead[5])?,
            min_i: t.get(i, lead[6])?,
            argmin_s0: t.get(i, lead[7])?,
            crossings: planes.iter().map(|(_, c)| t.get(i, *c)).collect::<Result<_, _>>()?,
            proj_injective: t.flag(i, trail[0])?,
            proj_convex: t.flag(i, trail[1])?,
            sym_defect: t.get(i, trail[2])?,
            var_res1: t.get(i, trail[3])?,
            var_res2: t.get(i, trail[4])?,
            geo_slack: t.get(i, trail[5])?,
            rate_ok: t.flag(i, trail[6])?,
            sym_ok: None,
            rate_bound: None,
            shape: None,
        });
    }
    if let Some(path) = shape {
        let s = Table::read(path)?;
        let cols: Vec<usize> = SHAPE_HEADER.iter().map(|c| s.col(c)).collect::<Result<_, _>>()?;
        for i in 0..s.records.len() {
            let step: u64 = s.req(i, cols[1])?;
            let stats = ShapeStats {
                roundness: s.req(i, cols[2])?,
                max_radius: s.req(i, cols[3])?,
                min_radius: s.req(i, cols[4])?,
                mean_radius: s.req(i, cols[5])?,
                planarity_defect: s.req(i, cols[6])?,
            };
            if let Some(r) = rows.iter_mut().find(|r| r.step == step) {
                r.shape = Some(stats);
            }
        }
    }
    Ok((planes.into_iter().map(|(id, _)| id).collect(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, step: u64) -> TraceRow {
        TraceRow {
            t,
            step,
            length: 6.0 - t,
            k_max: 1.0 + t,
            int_k2: 6.3,
            min_dpsi: Some(0.9),
            min_i: None,
            argmin_s0: None,
            crossings: vec![Some(2), None],
            proj_injective: Some(true),
            proj_convex: Some(false),
            sym_defect: Some(1e-16),
            rate_ok: Some(true),
            shape: Some(ShapeStats {
                roundness: 1.5,
                max_radius: 1.2,
                min_radius: 0.8,
                mean_radius: 1.0,
                planarity_defect: 0.0,
            }),
            ..TraceRow::default()
        }
    }

    #[test]
    fn header_is_fixed() {
        let h = trace_header(&["y0".into(), "x0".into()]);
        assert_eq!(
            h.join(","),
            "t,step,L,k_max,int_k2,min_dpsi,min_I,argmin_s0,crossings_y0,crossings_x0,\
             proj_injective,proj_convex,sym_defect,var_res1,var_res2,geo_slack,rate_ok"
        );
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let trace = dir.path().join("trace.csv");
        let shape = dir.path().join("shape.csv");
        let ids = vec!["y0".to_string(), "x0".to_string()];
        let rows = vec![row(0.0, 0), row(0.1 + 0.2, 10)];
        write_trace_csv(&trace, &ids, &rows).unwrap();
        write_shape_csv(&shape, &rows).unwrap();
        let (ids2, back) = read_trace_csv(&trace, Some(&shape)).unwrap();
        assert_eq!(ids2, ids);
        assert_eq!(back, rows);
        let (_, bare) = read_trace_csv(&trace, None).unwrap();
        assert!(bare.iter().all(|r| r.shape.is_none()));
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "t,step\n0,0\n").unwrap();
        assert!(matches!(read_trace_csv(&p, None), Err(TraceError::MissingColumn { .. })));
    }
}
