//! File formats.
//!
//! - Scored data: header `score,label[,group]`, one example per row. Pools
//!   may omit `label`. A group cell may list several groups separated by
//!   `;`.
//! - Feature data: header `label,f1,...,fD[,group]`.
//! - Logistic model: line 1 `logistic v1`, line 2 the intercept, then one
//!   line per weight, then the standardization means and scales (one per
//!   line).
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use css_core::data::{LabeledRow, LogisticModel};
use css_core::{CalibrationSet, GroupId, Membership, Pool, ScoredExample};

use crate::error::{HarnessError, Result};

/// `x` as a positional decimal with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let sci = format!("{:.16e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp >= 16 {
        format!("{digits}{}", "0".repeat((exp - 16) as usize))
    } else if exp >= 0 {
        let (int, frac) = digits.split_at(exp as usize + 1);
        format!("{int}.{frac}")
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    if x < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path, e))
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn require(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| HarnessError::MissingHeader(name.to_string()))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_error(e: csv::Error, fallback_column: &str) -> HarnessError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::io("<input>", source),
        _ => HarnessError::Parse { line, column: fallback_column.to_string() },
    }
}

fn parse_real(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    rec.get(idx)
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| HarnessError::Parse { line: line_of(rec), column: name.to_string() })
}

fn parse_label(rec: &csv::StringRecord, idx: usize) -> Result<bool> {
    match rec.get(idx).map(str::trim) {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        _ => Err(HarnessError::Parse { line: line_of(rec), column: "label".to_string() }),
    }
}

fn parse_groups(rec: &csv::StringRecord, idx: Option<usize>) -> Membership {
    idx.and_then(|i| rec.get(i))
        .map(|cell| Membership::from_groups(cell.split(';').map(str::trim).filter(|g| !g.is_empty()).map(GroupId::from)))
        .unwrap_or_default()
}

fn check_score(rec: &csv::StringRecord, s: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&s) {
        Ok(s)
    } else {
        Err(HarnessError::Parse { line: line_of(rec), column: "score".to_string() })
    }
}

/// Scored rows from any reader; `label` is required.
pub fn parse_scored<R: Read>(input: R) -> Result<Vec<ScoredExample>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(e, "score"))?.clone();
    let (si, li, gi) = (require(&headers, "score")?, require(&headers, "label")?, column(&headers, "group"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, "score"))?;
        let score = check_score(&rec, parse_real(&rec, si, "score")?)?;
        out.push(ScoredExample { score, label: parse_label(&rec, li)?, groups: parse_groups(&rec, gi) });
    }
    Ok(out)
}

pub fn read_scored_csv(path: &Path) -> Result<CalibrationSet> {
    Ok(CalibrationSet::new(parse_scored(open(path)?)?)?)
}

/// A pool; `label` and `group` columns are optional.
pub fn parse_pool<R: Read>(input: R) -> Result<Pool> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(e, "score"))?.clone();
    let (si, li, gi) = (require(&headers, "score")?, column(&headers, "label"), column(&headers, "group"));
    let (mut scores, mut labels, mut groups) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, "score"))?;
        scores.push(check_score(&rec, parse_real(&rec, si, "score")?)?);
        if let Some(li) = li {
            labels.push(parse_label(&rec, li)?);
        }
        groups.push(parse_groups(&rec, gi));
    }
    let mut pool = Pool::new(scores)?;
    if li.is_some() {
        pool = pool.with_labels(labels)?;
    }
    if gi.is_some() {
        pool = pool.with_groups(groups)?;
    }
    Ok(pool)
}

pub fn read_pool_csv(path: &Path) -> Result<Pool> {
    parse_pool(open(path)?)
}

pub fn parse_features<R: Read>(input: R) -> Result<Vec<LabeledRow>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(e, "label"))?.clone();
    let li = require(&headers, "label")?;
    let gi = column(&headers, "group");
    let feature_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != li && Some(*i) != gi)
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, "label"))?;
        let features =
            feature_cols.iter().map(|(i, name)| parse_real(&rec, *i, name)).collect::<Result<Vec<f64>>>()?;
        out.push(LabeledRow { features, label: parse_label(&rec, li)?, groups: parse_groups(&rec, gi) });
    }
    Ok(out)
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<LabeledRow>> {
    parse_features(open(path)?)
}

fn group_cell(groups: &Membership) -> String {
    groups.groups().iter().map(GroupId::as_str).collect::<Vec<_>>().join(";")
}

/// Writes `score,label[,group]`; the group column appears when any example
/// has a group.
pub fn write_scored<W: Write>(out: W, examples: &[ScoredExample]) -> Result<()> {
    let grouped = examples.iter().any(|e| !e.groups.is_empty());
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| csv_error(e, "score");
    if grouped {
        w.write_record(["score", "label", "group"]).map_err(io)?;
    } else {
        w.write_record(["score", "label"]).map_err(io)?;
    }
    for e in examples {
        let label = if e.label { "1" } else { "0" };
        if grouped {
            w.write_record([fmt17(e.score).as_str(), label, group_cell(&e.groups).as_str()]).map_err(io)?;
        } else {
            w.write_record([fmt17(e.score).as_str(), label]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io("<output>", e))
}

pub fn write_scored_csv(path: &Path, examples: &[ScoredExample]) -> Result<()> {
    write_scored(create(path)?, examples)
}

pub fn write_features_csv(path: &Path, rows: &[LabeledRow]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.features.len());
    let grouped = rows.iter().any(|r| !r.groups.is_empty());
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| csv_error(e, "label");
    let mut header = vec!["label".to_string()];
    header.extend((1..=d).map(|j| format!("f{j}")));
    if grouped {
        header.push("group".to_string());
    }
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = vec![if r.label { "1".to_string() } else { "0".to_string() }];
        rec.extend(r.features.iter().map(|&v| fmt17(v)));
        if grouped {
            rec.push(group_cell(&r.groups));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_model(path: &Path, model: &LogisticModel) -> Result<()> {
    let mut w = create(path)?;
    let mut text = String::from("logistic v1\n");
    text.push_str(&fmt17(model.intercept()));
    text.push('\n');
    for v in model.weights().iter().chain(model.means()).chain(model.scales()) {
        text.push_str(&fmt17(*v));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

pub fn parse_model(text: &str) -> Result<LogisticModel> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("logistic v1") {
        return Err(HarnessError::Model("first line must be `logistic v1`".into()));
    }
    let values = lines
        .map(|l| l.parse::<f64>().map_err(|_| HarnessError::Model(format!("not a number: `{l}`"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() || (values.len() - 1) % 3 != 0 {
        return Err(HarnessError::Model("expected an intercept and three values per feature".into()));
    }
    let d = (values.len() - 1) / 3;
    let (w, rest) = values[1..].split_at(d);
    let (means, scales) = rest.split_at(d);
    LogisticModel::from_parts(values[0], w.to_vec(), means.to_vec(), scales.to_vec())
        .map_err(|e| HarnessError::Model(e.to_string()))
}

pub fn read_model(path: &Path) -> Result<LogisticModel> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| HarnessError::io(path, e))?;
    parse_model(&text)
}
