//! Text file formats shared by the pipelines: JSON-lines datasets, point and
//! split CSVs, and number formatting for reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classifier::LabeledFeature;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::index::VectorSet;
use crate::localize::GeoRecord;
use crate::sampling::Partition;

/// Formats like C's `%.6g`: six significant digits, trailing zeros dropped.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Resolves a JSON-lines row's vector: either inline, or a row index into a
/// companion VEC1 file. Exactly one must be present.
fn resolve_embedding(
    inline: &Option<Vec<f32>>,
    offset: Option<usize>,
    vectors: Option<&VectorSet>,
    id: u64,
) -> Result<Vec<f32>> {
    let record_err = |message: String| Error::Record { id: id.to_string(), message };
    match (inline, offset) {
        (Some(v), None) => Ok(v.clone()),
        (None, Some(offset)) => {
            let set = vectors
                .ok_or_else(|| record_err("embedding offset given but no vector file supplied".into()))?;
            if offset >= set.len() {
                return Err(record_err(format!("offset {offset} beyond {} vectors", set.len())));
            }
            Ok(set.row(offset).to_vec())
        }
        (Some(_), Some(_)) => Err(record_err("both embedding and offset given".into())),
        (None, None) => Err(record_err("neither embedding nor offset given".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: u64,
    lat: f64,
    lon: f64,
    #[serde(default)]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureLine {
    id: u64,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<usize>,
}

fn json_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

fn check_uniform_dim(dims: impl Iterator<Item = (u64, usize)>) -> Result<()> {
    let mut expected = None;
    for (id, d) in dims {
        match expected {
            None => expected = Some(d),
            Some(e) if e != d => {
                return Err(Error::Record {
                    id: id.to_string(),
                    message: format!("embedding has dimension {d}, expected {e}"),
                })
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_unique_ids(ids: impl Iterator<Item = u64>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Record { id: id.to_string(), message: "duplicate id".into() });
        }
    }
    Ok(())
}

/// Parses geotagged records, one JSON object per line:
/// `{"id":0,"lat":48.85,"lon":2.35,"label":"paris","embedding":[...]}` or with
/// `"offset":N` into `vectors` instead of an inline embedding.
pub fn parse_records(text: &str, vectors: Option<&VectorSet>) -> Result<Vec<GeoRecord>> {
    let mut out = Vec::new();
    for (line, r) in json_lines::<RecordLine>(text)? {
        let location = GeoPoint::new(r.lat, r.lon)
            .map_err(|e| Error::Parse { line, message: format!("record {}: {e}", r.id) })?;
        out.push(GeoRecord {
            id: r.id,
            location,
            embedding: resolve_embedding(&r.embedding, r.offset, vectors, r.id)?,
            label: r.label,
        });
    }
    check_unique_ids(out.iter().map(|r| r.id))?;
    check_uniform_dim(out.iter().map(|r| (r.id, r.embedding.len())))?;
    Ok(out)
}

pub fn records_to_jsonl(records: &[GeoRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let line = RecordLine {
            id: r.id,
            lat: r.location.lat(),
            lon: r.location.lon(),
            label: r.label.clone(),
            embedding: Some(r.embedding.clone()),
            offset: None,
        };
        s.push_str(&serde_json::to_string(&line).expect("records serialize"));
        s.push('\n');
    }
    s
}

/// Parses labelled features: `{"id":0,"labels":["rifle"],"embedding":[...]}`.
pub fn parse_features(text: &str, vectors: Option<&VectorSet>) -> Result<Vec<LabeledFeature>> {
    let mut out = Vec::new();
    for (_, f) in json_lines::<FeatureLine>(text)? {
        out.push(LabeledFeature {
            id: f.id,
            features: resolve_embedding(&f.embedding, f.offset, vectors, f.id)?,
            labels: f.labels.into_iter().collect(),
        });
    }
    check_unique_ids(out.iter().map(|f| f.id))?;
    check_uniform_dim(out.iter().map(|f| (f.id, f.features.len())))?;
    Ok(out)
}

pub fn features_to_jsonl(items: &[LabeledFeature]) -> String {
    let mut s = String::new();
    for f in items {
        let line = FeatureLine {
            id: f.id,
            labels: f.labels.iter().cloned().collect(),
            embedding: Some(f.features.clone()),
            offset: None,
        };
        s.push_str(&serde_json::to_string(&line).expect("features serialize"));
        s.push('\n');
    }
    s
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, message: e.to_string() }
}

fn expect_header(rdr: &mut csv::Reader<&[u8]>, want: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(csv_err)?;
    let got: Vec<&str> = headers.iter().collect();
    if got != want {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", want.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Reads an `id,lat,lon` point CSV.
pub fn parse_points_csv(text: &str) -> Result<Vec<(i64, GeoPoint)>> {
    let mut rdr = csv_reader(text);
    expect_header(&mut rdr, &["id", "lat", "lon"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<(i64, f64, f64)>() {
        let (id, lat, lon) = row.map_err(csv_err)?;
        let p = GeoPoint::new(lat, lon)
            .map_err(|e| Error::Record { id: id.to_string(), message: e.to_string() })?;
        out.push((id, p));
    }
    Ok(out)
}

pub fn points_to_csv(points: &[(i64, GeoPoint)]) -> String {
    let mut s = String::from("id,lat,lon\n");
    for (id, p) in points {
        s.push_str(&format!("{id},{},{}\n", fmt_sig(p.lat()), fmt_sig(p.lon())));
    }
    s
}

/// Reads a `lat,lon` vertex CSV describing a polygon.
pub fn parse_polygon_csv(text: &str) -> Result<crate::osm::Polygon> {
    let mut rdr = csv_reader(text);
    expect_header(&mut rdr, &["lat", "lon"])?;
    let mut verts = Vec::new();
    for row in rdr.deserialize::<(f64, f64)>() {
        verts.push(row.map_err(csv_err)?);
    }
    crate::osm::Polygon::new(verts)
}

/// Reads an `id,partition` split CSV.
pub fn parse_split_csv(text: &str) -> Result<BTreeMap<u64, Partition>> {
    let mut rdr = csv_reader(text);
    expect_header(&mut rdr, &["id", "partition"])?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<(u64, String)>() {
        let (id, part) = row.map_err(csv_err)?;
        out.insert(id, part.parse()?);
    }
    Ok(out)
}

pub fn split_to_csv(split: &BTreeMap<u64, Partition>) -> String {
    let mut s = String::from("id,partition\n");
    for (id, p) in split {
        s.push_str(&format!("{id},{}\n", p.as_str()));
    }
    s
}
