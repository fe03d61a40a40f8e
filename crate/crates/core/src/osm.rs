//! Street-node extraction from OpenStreetMap XML.
//!
//! Only the `osm`, `node`, `way`, `nd` and `tag` elements are understood;
//! everything else is skipped. A node counts as a street node when at least
//! one way carrying a `highway` tag (any value) references it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct OsmNode {
    pub id: i64,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OsmWay {
    pub id: i64,
    pub node_refs: Vec<i64>,
    pub tags: BTreeMap<String, String>,
}

impl OsmWay {
    pub fn is_highway(&self) -> bool {
        self.tags.contains_key("highway")
    }
}

/// Parsed contents of one OSM document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OsmDocument {
    pub nodes: Vec<OsmNode>,
    pub ways: Vec<OsmWay>,
}

/// A closed ring of `(lat, lon)` vertices, tested as a planar polygon.
///
/// Vertices are kept as given (longitude is not wrapped) so that a ring may
/// run along the -180 meridian. The closing vertex is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(mut vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::invalid(format!(
                "polygon needs at least 3 distinct vertices, got {}",
                vertices.len()
            )));
        }
        for &(lat, lon) in &vertices {
            if !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 || lon.abs() > 180.0 {
                return Err(Error::invalid(format!("polygon vertex ({lat}, {lon}) out of range")));
            }
        }
        Ok(Polygon { vertices })
    }

    /// Rectangle covering every valid coordinate.
    pub fn whole_world() -> Self {
        Polygon {
            vertices: vec![(-90.0, -180.0), (-90.0, 180.0), (90.0, 180.0), (90.0, -180.0)],
        }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }
}

/// Even-odd ray casting in the (lon, lat) plane. Points on an edge or vertex
/// are inside.
pub fn point_in_polygon(p: GeoPoint, poly: &Polygon) -> bool {
    let (py, px) = (p.lat(), p.lon());
    let verts = &poly.vertices;
    let n = verts.len();
    let mut inside = false;
    for i in 0..n {
        let (ay, ax) = verts[i];
        let (by, bx) = verts[(i + 1) % n];
        if on_segment(px, py, ax, ay, bx, by) {
            return true;
        }
        if (ay > py) != (by > py) {
            let x_cross = ax + (py - ay) * (bx - ax) / (by - ay);
            if px < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    let scale = (bx - ax).abs().max((by - ay).abs()).max(1.0);
    if cross.abs() > 1e-12 * scale {
        return false;
    }
    px >= ax.min(bx) && px <= ax.max(bx) && py >= ay.min(by) && py <= ay.max(by)
}

/// Parses an OSM XML document.
pub fn parse_osm(document: &[u8]) -> Result<OsmDocument> {
    let mut reader = Reader::from_reader(document);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut doc = OsmDocument::default();
    let mut current_way: Option<OsmWay> = None;

    let line_at = |pos: u64| -> usize {
        let end = (pos as usize).min(document.len());
        1 + document[..end].iter().filter(|&&b| b == b'\n').count()
    };

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Parse {
            line: line_at(reader.error_position()),
            message: e.to_string(),
        })?;
        let line = line_at(reader.buffer_position());
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    b"node" => doc.nodes.push(parse_node(e, line)?),
                    b"way" => {
                        let way = OsmWay { id: required_int(e, b"id", "way", line)?, ..Default::default() };
                        if is_empty {
                            doc.ways.push(way);
                        } else {
                            current_way = Some(way);
                        }
                    }
                    b"nd" => {
                        if let Some(way) = current_way.as_mut() {
                            way.node_refs.push(required_int(e, b"ref", "nd", line)?);
                        }
                    }
                    b"tag" => {
                        if let Some(way) = current_way.as_mut() {
                            let k = attr(e, b"k", line)?;
                            let v = attr(e, b"v", line)?;
                            if let Some(k) = k {
                                way.tags.insert(k, v.unwrap_or_default());
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::End(ref e) if e.name().as_ref() == b"way" => {
                if let Some(way) = current_way.take() {
                    doc.ways.push(way);
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(doc)
}

fn attr(e: &BytesStart<'_>, key: &[u8], line: usize) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::Parse { line, message: err.to_string() })?;
        if a.key.as_ref() == key {
            let value = a
                .unescape_value()
                .map_err(|err| Error::Parse { line, message: err.to_string() })?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

fn required_int(e: &BytesStart<'_>, key: &[u8], element: &str, line: usize) -> Result<i64> {
    let raw = attr(e, key, line)?.ok_or_else(|| Error::Parse {
        line,
        message: format!("<{element}> without {} attribute", String::from_utf8_lossy(key)),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("<{element}> has non-integer {}=\"{raw}\"", String::from_utf8_lossy(key)),
    })
}

fn parse_node(e: &BytesStart<'_>, line: usize) -> Result<OsmNode> {
    let id = required_int(e, b"id", "node", line)?;
    let coord = |key: &[u8], name: &str| -> Result<f64> {
        let raw = attr(e, key, line)?.ok_or_else(|| Error::Record {
            id: id.to_string(),
            message: format!("node missing {name} attribute"),
        })?;
        raw.trim().parse().map_err(|_| Error::Record {
            id: id.to_string(),
            message: format!("node has non-numeric {name}=\"{raw}\""),
        })
    };
    let lat = coord(b"lat", "lat")?;
    let lon = coord(b"lon", "lon")?;
    let location = GeoPoint::new(lat, lon).map_err(|err| Error::Record {
        id: id.to_string(),
        message: err.to_string(),
    })?;
    Ok(OsmNode { id, location })
}

/// Street nodes with their OSM ids, ascending by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreetNodes {
    pub points: Vec<(i64, GeoPoint)>,
    /// `(way id, missing node id)` for references to nodes absent from the document.
    pub dangling_refs: Vec<(i64, i64)>,
}

impl StreetNodes {
    pub fn locations(&self) -> Vec<GeoPoint> {
        self.points.iter().map(|&(_, p)| p).collect()
    }
}

/// Collects nodes referenced by highway-tagged ways, optionally clipped to a
/// boundary. Dangling references are skipped and reported.
pub fn extract_street_nodes(
    nodes: &[OsmNode],
    ways: &[OsmWay],
    boundary: Option<&Polygon>,
) -> StreetNodes {
    let by_id: HashMap<i64, GeoPoint> = nodes.iter().map(|n| (n.id, n.location)).collect();
    let mut selected = BTreeSet::new();
    let mut dangling_refs = Vec::new();
    for way in ways.iter().filter(|w| w.is_highway()) {
        for &r in &way.node_refs {
            if by_id.contains_key(&r) {
                selected.insert(r);
            } else {
                dangling_refs.push((way.id, r));
            }
        }
    }
    let points = selected
        .into_iter()
        .map(|id| (id, by_id[&id]))
        .filter(|&(_, p)| boundary.is_none_or(|poly| point_in_polygon(p, poly)))
        .collect();
    StreetNodes { points, dangling_refs }
}
