//! CSV and JSON schemas for every emitted table, with matching readers.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classification::{ConeRow, PortraitRow};
use crate::error::{Error, Result};
use crate::optimizer::SweepRow;
use crate::plan_cost::CostTerm;
use crate::recursion::Orbit;
use crate::separatrix::{Polyline, SeparatrixCurve};

fn io_err(op: &'static str, e: impl std::fmt::Display) -> Error {
    Error::Io {
        op,
        detail: e.to_string(),
    }
}

/// Writes `rows` with a header row taken from the field names.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| io_err("write_csv", e))?;
    }
    w.flush().map_err(|e| io_err("write_csv", e))
}

/// Header-only output when `rows` is empty.
pub fn write_csv_with_header<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header).map_err(|e| io_err("write_csv", e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err("write_csv", e))?;
    }
    w.flush().map_err(|e| io_err("write_csv", e))
}

pub fn read_csv<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| io_err("read_csv", e))
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_err("write_json", e))?;
    writeln!(out).map_err(|e| io_err("write_json", e))
}

pub fn read_json<R: Read, T: DeserializeOwned>(input: R) -> Result<T> {
    serde_json::from_reader(input).map_err(|e| io_err("read_json", e))
}

/// `y,phi,residual`; residual is NaN where the preimage leaves the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub y: f64,
    pub phi: f64,
    pub residual: f64,
}

pub fn curve_rows(curve: &SeparatrixCurve) -> Vec<CurveRow> {
    curve
        .nodes()
        .iter()
        .zip(curve.values())
        .map(|(&y, &phi)| CurveRow {
            y,
            phi,
            residual: curve.residual(y).unwrap_or(f64::NAN),
        })
        .collect()
}

/// `step,param,y,z`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardRow {
    pub step: usize,
    pub param: f64,
    pub y: f64,
    pub z: f64,
}

pub fn backward_rows(lines: &[Polyline]) -> Vec<BackwardRow> {
    lines
        .iter()
        .flat_map(|l| {
            l.points.iter().map(move |&(param, y, z)| BackwardRow {
                step: l.step,
                param,
                y,
                z,
            })
        })
        .collect()
}

/// `x1,label,break_step`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitCsvRow {
    pub x1: f64,
    pub label: String,
    pub break_step: Option<usize>,
}

pub fn portrait_rows(rows: &[PortraitRow]) -> Vec<PortraitCsvRow> {
    rows.iter()
        .map(|r| PortraitCsvRow {
            x1: r.x1,
            label: r.label.as_str().to_owned(),
            break_step: r.label.break_step(),
        })
        .collect()
}

/// `y,z,eta_ok,xi_ok`
pub type ConeCsvRow = ConeRow;

/// `x1,EN,label,break_step`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub x1: f64,
    #[serde(rename = "EN")]
    pub en: f64,
    pub label: String,
    pub break_step: Option<usize>,
}

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<SweepCsvRow> {
    rows.iter()
        .map(|r| SweepCsvRow {
            x1: r.x1,
            en: r.en,
            label: r.label.as_str().to_owned(),
            break_step: r.break_step(),
        })
        .collect()
}

/// `k,x_k,z_k,flag` with z_k = x_k - x_{k-1}; the last row carries the end reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRow {
    pub k: usize,
    pub x_k: f64,
    pub z_k: f64,
    pub flag: String,
}

pub fn orbit_rows(orbit: &Orbit) -> Vec<OrbitRow> {
    let xs = orbit.xs();
    (1..xs.len())
        .map(|k| OrbitRow {
            k,
            x_k: xs[k],
            z_k: xs[k] - xs[k - 1],
            flag: if k + 1 == xs.len() { orbit.end().as_str() } else { "" }.to_owned(),
        })
        .collect()
}

/// `k,x_k,f(x_{k-1}),term`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub k: usize,
    pub x_k: f64,
    #[serde(rename = "f(x_{k-1})")]
    pub f_prev: f64,
    pub term: f64,
}

pub fn plan_rows(terms: &[CostTerm]) -> Vec<PlanRow> {
    terms
        .iter()
        .map(|t| PlanRow {
            k: t.k,
            x_k: t.x_k,
            f_prev: t.f_prev,
            term: t.term,
        })
        .collect()
}

/// Seed t with the iterates (x_n, y_n) it generates.
pub type BeckRow = (f64, Vec<(f64, f64)>);

/// Wide layout `t,x1,y1,x2,y2,...`, one row per seed value.
pub fn write_beck_csv<W: Write>(out: W, rows: &[BeckRow]) -> Result<()> {
    let steps = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
    let mut header = vec!["t".to_owned()];
    for n in 1..=steps {
        header.push(format!("x{n}"));
        header.push(format!("y{n}"));
    }
    w.write_record(&header).map_err(|e| io_err("write_csv", e))?;
    for (t, it) in rows {
        let mut rec = vec![t.to_string()];
        for n in 0..steps {
            match it.get(n) {
                Some((x, y)) => {
                    rec.push(x.to_string());
                    rec.push(y.to_string());
                }
                None => {
                    rec.push(String::new());
                    rec.push(String::new());
                }
            }
        }
        w.write_record(&rec).map_err(|e| io_err("write_csv", e))?;
    }
    w.flush().map_err(|e| io_err("write_csv", e))
}

pub fn read_beck_csv<R: Read>(input: R) -> Result<Vec<BeckRow>> {
    let mut r = csv::Reader::from_reader(input);
    let parse = |s: &str| s.parse::<f64>().map_err(|e| io_err("read_csv", e));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err("read_csv", e))?;
        let t = parse(rec.get(0).unwrap_or_default())?;
        let mut it = Vec::new();
        let fields: Vec<&str> = rec.iter().skip(1).collect();
        for pair in fields.chunks(2) {
            if pair.len() < 2 || pair[0].is_empty() {
                break;
            }
            it.push((parse(pair[0])?, parse(pair[1])?));
        }
        out.push((t, it));
    }
    Ok(out)
}
