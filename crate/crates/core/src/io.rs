//! Shape-graph file format: a single JSON document.
//!
//! ```json
//! {
//!   "nodes": [{"id": "a", "x": 0.0, "y": 1.5}, {"id": "n"}],
//!   "edges": [{"u": "a", "v": "b", "points": [[0.0, 1.5], ...], "weight": 2.1}],
//!   "metadata": {"source": "..."}
//! }
//! ```
//!
//! Nodes without coordinates are null (padding) nodes. The `weight` field is
//! optional and defaults to the curve's arc length. Unknown top-level fields
//! are preserved in `metadata` on load. Curve endpoints are snapped onto
//! their node positions when within 1e-3; larger gaps are data errors.

use crate::curve::PlanarCurve;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::graph::{simplify_multiedges, Node, RawEdge, ShapeGraph};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;

const SNAP_TOL: f64 = 1e-3;

#[derive(Serialize, Deserialize)]
struct FileNode {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct FileEdge {
    u: String,
    v: String,
    points: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct FileGraph {
    #[serde(default)]
    nodes: Vec<FileNode>,
    #[serde(default)]
    edges: Vec<FileEdge>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    metadata: Map<String, Value>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

/// Parse a shape graph from a JSON string.
pub fn from_json(text: &str) -> Result<ShapeGraph> {
    let file: FileGraph =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("{e}")))?;

    let mut nodes = Vec::with_capacity(file.nodes.len());
    for fnode in &file.nodes {
        let position = match (fnode.x, fnode.y) {
            (Some(x), Some(y)) => {
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::Data(format!(
                        "node `{}` has non-finite coordinates",
                        fnode.id
                    )));
                }
                Some(Point::new(x, y))
            }
            (None, None) => None,
            _ => {
                return Err(Error::Parse(format!(
                    "node `{}` must carry both x and y or neither",
                    fnode.id
                )))
            }
        };
        nodes.push(Node { id: fnode.id.clone(), position });
    }

    let position_of = |id: &str| -> Option<Option<Point>> {
        nodes.iter().find(|n| n.id == id).map(|n| n.position)
    };

    let mut raw = Vec::with_capacity(file.edges.len());
    for fe in &file.edges {
        if fe.points.len() < 2 {
            return Err(Error::Data(format!(
                "edge `{}`-`{}` needs at least 2 points",
                fe.u, fe.v
            )));
        }
        let mut pts: Vec<Point> = fe.points.iter().map(|&p| Point::from(p)).collect();
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(Error::Data(format!(
                "edge `{}`-`{}` has non-finite points",
                fe.u, fe.v
            )));
        }
        // snap endpoints onto their node positions
        for (end, id) in [(0usize, &fe.u), (pts.len() - 1, &fe.v)] {
            let pos = position_of(id).ok_or_else(|| {
                Error::Data(format!("edge references unknown node id `{id}`"))
            })?;
            if let Some(p) = pos {
                let d = pts[end].distance(p);
                if d > SNAP_TOL {
                    return Err(Error::Data(format!(
                        "edge `{}`-`{}`: endpoint is {d:.3e} away from node `{id}` (max {SNAP_TOL:.0e})",
                        fe.u, fe.v
                    )));
                }
                pts[end] = p;
            }
        }
        raw.push(RawEdge {
            u: fe.u.clone(),
            v: fe.v.clone(),
            curve: PlanarCurve::new(pts)?,
            weight: fe.weight,
        });
    }

    let mut graph = simplify_multiedges(nodes, raw)?;
    for (k, v) in file.metadata {
        graph.metadata.insert(k, v);
    }
    for (k, v) in file.extra {
        graph.metadata.insert(k, v);
    }
    Ok(graph)
}

/// Serialize a shape graph to a JSON string. Numeric fields keep full f64
/// round-trip precision.
pub fn to_json(g: &ShapeGraph) -> String {
    let nodes = g
        .nodes()
        .iter()
        .map(|n| FileNode {
            id: n.id.clone(),
            x: n.position.map(|p| p.x),
            y: n.position.map(|p| p.y),
        })
        .collect();
    let edges = g
        .edges()
        .map(|(&(u, v), e)| FileEdge {
            u: g.nodes()[u].id.clone(),
            v: g.nodes()[v].id.clone(),
            points: e.curve.samples().iter().map(|&p| p.into()).collect(),
            weight: Some(e.weight),
        })
        .collect();
    let file = FileGraph {
        nodes,
        edges,
        metadata: g.metadata.clone().into_iter().collect(),
        extra: Map::new(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("graph serialization cannot fail");
    s.push('\n');
    s
}

pub fn load(path: impl AsRef<Path>) -> Result<ShapeGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read `{}`: {e}", path.display())))?;
    from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save(g: &ShapeGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), to_json(g))?;
    Ok(())
}

/// Bitwise structural equality, used to check lossless round trips.
pub fn graphs_identical(a: &ShapeGraph, b: &ShapeGraph) -> bool {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    for (na, nb) in a.nodes().iter().zip(b.nodes()) {
        if na.id != nb.id {
            return false;
        }
        match (na.position, nb.position) {
            (None, None) => {}
            (Some(p), Some(q)) => {
                if p.x.to_bits() != q.x.to_bits() || p.y.to_bits() != q.y.to_bits() {
                    return false;
                }
            }
            _ => return false,
        }
    }
    for ((ka, ea), (kb, eb)) in a.edges().zip(b.edges()) {
        if ka != kb || ea.weight.to_bits() != eb.weight.to_bits() {
            return false;
        }
        if ea.curve.len() != eb.curve.len() {
            return false;
        }
        for (p, q) in ea.curve.samples().iter().zip(eb.curve.samples()) {
            if p.x.to_bits() != q.x.to_bits() || p.y.to_bits() != q.y.to_bits() {
                return false;
            }
        }
    }
    a.metadata == b.metadata
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};

    fn sample_graph() -> ShapeGraph {
        let a = Point::new(0.125, 0.25);
        let b = Point::new(1.0 / 3.0, 2.0 / 7.0);
        let curve = PlanarCurve::new(vec![a, Point::new(0.2, 0.9), b]).unwrap();
        let mut g = ShapeGraph::new(
            vec![
                Node::real("a", a),
                Node::real("b", b),
                Node::null("pad"),
            ],
            vec![((0, 1), Edge { curve, weight: 0.123456789123 })],
        )
        .unwrap();
        g.metadata
            .insert("source".into(), serde_json::json!("unit-test"));
        g
    }

    #[test]
    fn round_trip_is_lossless() {
        let g = sample_graph();
        let text = to_json(&g);
        let back = from_json(&text).unwrap();
        assert!(graphs_identical(&g, &back));
        // and once more through the serializer
        assert_eq!(text, to_json(&back));
    }

    #[test]
    fn unknown_top_level_fields_go_to_metadata() {
        let text = r#"{
            "nodes": [{"id": "a", "x": 0.0, "y": 0.0}, {"id": "b", "x": 1.0, "y": 0.0}],
            "edges": [{"u": "a", "v": "b", "points": [[0.0,0.0],[1.0,0.0]]}],
            "provenance": {"tool": "x"}
        }"#;
        let g = from_json(text).unwrap();
        assert!(g.metadata.contains_key("provenance"));
        // default weight = arc length
        assert!((g.edge(0, 1).unwrap().weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_node_id_is_a_data_error() {
        let text = r#"{
            "nodes": [{"id": "a", "x": 0.0, "y": 0.0}],
            "edges": [{"u": "a", "v": "zz", "points": [[0.0,0.0],[1.0,0.0]]}]
        }"#;
        let err = from_json(text).unwrap_err();
        assert!(err.to_string().contains("zz"), "{err}");
    }

    #[test]
    fn endpoint_snapping_and_limit() {
        // 5e-4 off: snapped exactly onto the node
        let near = r#"{
            "nodes": [{"id": "a", "x": 0.0, "y": 0.0}, {"id": "b", "x": 1.0, "y": 0.0}],
            "edges": [{"u": "a", "v": "b", "points": [[0.0005,0.0],[1.0,0.0]]}]
        }"#;
        let g = from_json(near).unwrap();
        assert_eq!(g.edge(0, 1).unwrap().curve.first(), Point::ZERO);

        // 5e-3 off: rejected
        let far = r#"{
            "nodes": [{"id": "a", "x": 0.0, "y": 0.0}, {"id": "b", "x": 1.0, "y": 0.0}],
            "edges": [{"u": "a", "v": "b", "points": [[0.005,0.0],[1.0,0.0]]}]
        }"#;
        assert!(from_json(far).is_err());
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let err = from_json("{ nodes: oops").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn save_and_load_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let g = sample_graph();
        save(&g, &path).unwrap();
        let back = load(&path).unwrap();
        assert!(graphs_identical(&g, &back));
        let missing = load(dir.path().join("nope.json")).unwrap_err();
        assert!(missing.to_string().contains("nope.json"));
    }
}
