//! Import of OpenStreetMap XML extracts (`<node lat lon>` / `<way><nd ref>`).
//!
//! Only ways carrying a `highway` tag are used. Nodes are projected to local
//! meters with an equirectangular projection about the bounding-box centre,
//! every consecutive way segment becomes a pair of directed edges, and only
//! the largest weakly connected component is kept.

use std::collections::{BTreeMap, HashMap};

use log::warn;

use super::generate::nearest_node;
use super::{weak_components, EdgeSpec, Graph, GraphError};
use crate::num::round_sig9;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }

    fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_lat + self.max_lat),
            0.5 * (self.min_lon + self.max_lon),
        )
    }
}

#[derive(Debug, Clone)]
pub struct RoadImport {
    pub graph: Graph,
    /// Original OSM node id of each graph node.
    pub osm_ids: Vec<i64>,
    /// Nodes discarded because they were outside the largest component.
    pub dropped_nodes: usize,
}

fn parse_err(e: impl std::fmt::Display) -> GraphError {
    GraphError::Parse(e.to_string())
}

fn attr<T: std::str::FromStr>(node: roxmltree::Node, name: &str) -> Result<T, GraphError> {
    let raw = node
        .attribute(name)
        .ok_or_else(|| parse_err(format!("<{}> without '{name}'", node.tag_name().name())))?;
    raw.parse()
        .map_err(|_| parse_err(format!("bad '{name}' value {raw:?}")))
}

/// Reads the `<bounds>` element of an extract, if present.
pub fn bounds_from_extract(xml: &str) -> Result<Option<BoundingBox>, GraphError> {
    let doc = roxmltree::Document::parse(xml).map_err(parse_err)?;
    doc.descendants()
        .find(|n| n.has_tag_name("bounds"))
        .map(|b| {
            Ok(BoundingBox {
                min_lat: attr(b, "minlat")?,
                min_lon: attr(b, "minlon")?,
                max_lat: attr(b, "maxlat")?,
                max_lon: attr(b, "maxlon")?,
            })
        })
        .transpose()
}

pub fn import_road_network(xml: &str, bbox: &BoundingBox) -> Result<RoadImport, GraphError> {
    let doc = roxmltree::Document::parse(xml).map_err(parse_err)?;
    let (lat0, lon0) = bbox.center();
    let cos_lat0 = lat0.to_radians().cos();

    let mut coords: HashMap<i64, (f64, f64)> = HashMap::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("node")) {
        let (id, lat, lon): (i64, f64, f64) = (attr(node, "id")?, attr(node, "lat")?, attr(node, "lon")?);
        if bbox.contains(lat, lon) {
            let x = EARTH_RADIUS_M * (lon - lon0).to_radians() * cos_lat0;
            let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
            coords.insert(id, (round_sig9(x), round_sig9(y)));
        }
    }

    // Undirected segments keyed by ordered OSM id pair.
    let mut segments: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for way in doc.descendants().filter(|n| n.has_tag_name("way")) {
        let is_road = way
            .children()
            .any(|c| c.has_tag_name("tag") && c.attribute("k") == Some("highway"));
        if !is_road {
            continue;
        }
        let refs = way
            .children()
            .filter(|c| c.has_tag_name("nd"))
            .map(|c| attr::<i64>(c, "ref"))
            .collect::<Result<Vec<_>, _>>()?;
        for pair in refs.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (Some(pa), Some(pb)) = (coords.get(&a), coords.get(&b)) else {
                continue;
            };
            let length = round_sig9((pa.0 - pb.0).hypot(pa.1 - pb.1));
            if a == b || length <= 0.0 {
                continue;
            }
            let key = (a.min(b), a.max(b));
            segments
                .entry(key)
                .and_modify(|l| *l = l.min(length))
                .or_insert(length);
        }
    }
    if segments.is_empty() {
        return Err(GraphError::EmptyResult(
            "no road segment lies inside the bounding box".into(),
        ));
    }

    let mut osm_ids: Vec<i64> = segments.keys().flat_map(|&(a, b)| [a, b]).collect();
    osm_ids.sort_unstable();
    osm_ids.dedup();
    let index: HashMap<i64, usize> = osm_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let pairs: Vec<(usize, usize)> = segments
        .keys()
        .map(|&(a, b)| (index[&a], index[&b]))
        .collect();

    let labels = weak_components(osm_ids.len(), pairs.iter().copied());
    let mut sizes = vec![0usize; labels.iter().max().map_or(0, |m| m + 1)];
    for &l in &labels {
        sizes[l] += 1;
    }
    // Largest component; the lowest label (smallest OSM id) wins ties.
    let keep = (0..sizes.len())
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .expect("at least one component");
    let dropped_nodes = osm_ids.len() - sizes[keep];
    if dropped_nodes > 0 {
        warn!(
            "road import: dropped {dropped_nodes} nodes outside the largest connected component ({} components)",
            sizes.len()
        );
    }

    let mut remap = vec![usize::MAX; osm_ids.len()];
    let mut kept_ids = Vec::with_capacity(sizes[keep]);
    let mut positions = Vec::with_capacity(sizes[keep]);
    for (old, &id) in osm_ids.iter().enumerate() {
        if labels[old] == keep {
            remap[old] = kept_ids.len();
            kept_ids.push(id);
            positions.push(coords[&id]);
        }
    }
    let mut edges = Vec::with_capacity(2 * pairs.len());
    for (&(a, b), (&_, &length)) in pairs.iter().zip(&segments) {
        if labels[a] == keep {
            let (u, v) = (remap[a], remap[b]);
            edges.push(EdgeSpec { from: u, to: v, length });
            edges.push(EdgeSpec { from: v, to: u, length });
        }
    }
    let base = nearest_node(&positions, 0.0, 0.0);
    let destinations = (0..positions.len()).filter(|&v| v != base);
    let graph = Graph::new(&positions, &edges, base, destinations)?;
    Ok(RoadImport {
        graph,
        osm_ids: kept_ids,
        dropped_nodes,
    })
}
