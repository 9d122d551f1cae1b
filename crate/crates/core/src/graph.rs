//! The shape-graph data model: labelled nodes in the plane joined by sampled
//! curves, with per-edge weights. Null (padding) nodes carry no position and
//! no incident real edges.

use crate::curve::PlanarCurve;
use crate::error::{Error, Result};
use crate::geom::Point;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A graph node: a label plus either a planar position or the abstract null
/// position.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub position: Option<Point>,
}

impl Node {
    pub fn real(id: impl Into<String>, position: Point) -> Self {
        Node {
            id: id.into(),
            position: Some(position),
        }
    }

    pub fn null(id: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            position: None,
        }
    }

    pub fn is_null(&self) -> bool {
        self.position.is_none()
    }
}

/// A real edge: its sampled curve (oriented from the lower to the higher
/// node index of its key) and a nonnegative weight.
#[derive(Debug, Clone)]
pub struct Edge {
    pub curve: PlanarCurve,
    pub weight: f64,
}

/// An edge read from a file before multi-edge simplification.
#[derive(Debug, Clone)]
pub struct RawEdge {
    pub u: String,
    pub v: String,
    pub curve: PlanarCurve,
    pub weight: Option<f64>,
}

/// A shape graph: nodes, at most one curve per node pair, free-form metadata.
#[derive(Debug, Clone)]
pub struct ShapeGraph {
    nodes: Vec<Node>,
    edges: BTreeMap<(usize, usize), Edge>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn norm_key(u: usize, v: usize) -> (usize, usize) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl ShapeGraph {
    /// Build a graph from nodes and index-keyed edges. Edge keys are
    /// normalized; curves supplied for a reversed key are reversed to keep
    /// the low-to-high orientation convention. Node ids must be unique.
    pub fn new(nodes: Vec<Node>, edges: Vec<((usize, usize), Edge)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.id.clone()) {
                return Err(Error::Data(format!("duplicate node id `{}`", n.id)));
            }
        }
        let mut map = BTreeMap::new();
        for ((u, v), mut e) in edges {
            if u >= nodes.len() || v >= nodes.len() {
                return Err(Error::Data(format!("edge ({u},{v}) out of node range")));
            }
            if u > v {
                e.curve = e.curve.reversed();
            }
            if map.insert(norm_key(u, v), e).is_some() {
                let (a, b) = norm_key(u, v);
                return Err(Error::Data(format!(
                    "multiple edges between `{}` and `{}`; simplify first",
                    nodes[a].id, nodes[b].id
                )));
            }
        }
        Ok(ShapeGraph {
            nodes,
            edges: map,
            metadata: BTreeMap::new(),
        })
    }

    pub fn empty() -> Self {
        ShapeGraph {
            nodes: Vec::new(),
            edges: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&(usize, usize), &Edge)> {
        self.edges.iter()
    }

    pub fn edge(&self, u: usize, v: usize) -> Option<&Edge> {
        self.edges.get(&norm_key(u, v))
    }

    pub fn real_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_null()).count()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .keys()
            .filter(|&&(u, v)| u == i || v == i)
            .count()
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.degree(i) == 1
    }

    pub fn total_edge_length(&self) -> f64 {
        self.edges.values().map(|e| e.curve.arc_length()).sum()
    }

    /// Connected components over all nodes; edges with positive weight
    /// connect, everything else is isolated. Components are listed by their
    /// smallest node index.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for (&(u, v), e) in &self.edges {
            if e.weight > 0.0 && u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(x) = stack.pop() {
                comp.push(x);
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Induced subgraph on the given node indices (cross edges dropped).
    pub fn induced(&self, keep: &[usize]) -> ShapeGraph {
        let keep_sorted: Vec<usize> = {
            let mut k = keep.to_vec();
            k.sort_unstable();
            k.dedup();
            k
        };
        let remap: BTreeMap<usize, usize> = keep_sorted
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let nodes = keep_sorted.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|(&(u, v), e)| {
                let (nu, nv) = (remap.get(&u)?, remap.get(&v)?);
                Some(((*nu, *nv), e.clone()))
            })
            .collect();
        ShapeGraph {
            nodes,
            edges,
            metadata: self.metadata.clone(),
        }
    }
}

/// How real edges are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightPolicy {
    /// Every real edge gets weight 1.
    Binary,
    /// Every real edge is weighted by its arc length.
    Length,
}

impl fmt::Display for WeightPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPolicy::Binary => write!(f, "binary"),
            WeightPolicy::Length => write!(f, "length"),
        }
    }
}

impl std::str::FromStr for WeightPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(WeightPolicy::Binary),
            "length" => Ok(WeightPolicy::Length),
            other => Err(Error::Argument(format!(
                "unknown weight policy `{other}` (expected binary|length)"
            ))),
        }
    }
}

/// Reassign every real edge weight according to the policy.
pub fn assign_weights(g: &ShapeGraph, policy: WeightPolicy) -> ShapeGraph {
    let mut out = g.clone();
    for e in out.edges.values_mut() {
        e.weight = match policy {
            WeightPolicy::Binary => 1.0,
            WeightPolicy::Length => e.curve.arc_length(),
        };
    }
    out
}

/// An invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    SelfLoop { node: String },
    EndpointMismatch { u: String, v: String, distance: f64 },
    NullNodeEdge { node: String },
    InvalidWeight { u: String, v: String, weight: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { node } => write!(f, "self-loop at node `{node}`"),
            Violation::EndpointMismatch { u, v, distance } => write!(
                f,
                "edge `{u}`-`{v}`: curve endpoint is {distance:.3e} away from its node"
            ),
            Violation::NullNodeEdge { node } => {
                write!(f, "null node `{node}` has an incident real edge")
            }
            Violation::InvalidWeight { u, v, weight } => {
                write!(f, "edge `{u}`-`{v}` has invalid weight {weight}")
            }
        }
    }
}

const ENDPOINT_TOL: f64 = 1e-6;

/// Collect every invariant violation; an empty list means the graph is valid.
pub fn validate(g: &ShapeGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for (&(u, v), e) in &g.edges {
        if u == v {
            out.push(Violation::SelfLoop {
                node: g.nodes[u].id.clone(),
            });
            continue;
        }
        for &i in &[u, v] {
            if g.nodes[i].is_null() {
                out.push(Violation::NullNodeEdge {
                    node: g.nodes[i].id.clone(),
                });
            }
        }
        if !(e.weight >= 0.0) || !e.weight.is_finite() {
            out.push(Violation::InvalidWeight {
                u: g.nodes[u].id.clone(),
                v: g.nodes[v].id.clone(),
                weight: e.weight,
            });
        }
        if let (Some(pu), Some(pv)) = (g.nodes[u].position, g.nodes[v].position) {
            let d0 = e.curve.first().distance(pu);
            let d1 = e.curve.last().distance(pv);
            let d = d0.max(d1);
            if d > ENDPOINT_TOL {
                out.push(Violation::EndpointMismatch {
                    u: g.nodes[u].id.clone(),
                    v: g.nodes[v].id.clone(),
                    distance: d,
                });
            }
        }
    }
    out
}

/// Fresh labels that do not collide with any existing node id.
fn fresh_ids(taken: &mut BTreeSet<String>, count: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    while out.len() < count {
        let candidate = format!("*{k}");
        if taken.insert(candidate.clone()) {
            out.push(candidate);
        }
        k += 1;
    }
    out
}

/// Pad both graphs with null nodes so they share the node-set size
/// |V0| + |V1|. Appended nodes are null and touch no real edge; original
/// content is untouched.
pub fn pad_nulls(g0: &ShapeGraph, g1: &ShapeGraph) -> (ShapeGraph, ShapeGraph) {
    let pad = |g: &ShapeGraph, extra: usize| -> ShapeGraph {
        let mut out = g.clone();
        let mut taken: BTreeSet<String> = out.nodes.iter().map(|n| n.id.clone()).collect();
        for id in fresh_ids(&mut taken, extra) {
            out.nodes.push(Node::null(id));
        }
        out
    };
    (pad(g0, g1.node_count()), pad(g1, g0.node_count()))
}

/// Drop connected components with fewer than `min_nodes` nodes.
pub fn remove_small_components(g: &ShapeGraph, min_nodes: usize) -> ShapeGraph {
    if min_nodes == 0 {
        return g.clone();
    }
    let keep: Vec<usize> = g
        .connected_components()
        .into_iter()
        .filter(|c| c.len() >= min_nodes)
        .flatten()
        .collect();
    g.induced(&keep)
}

/// Build a simple graph from a raw edge list. When a node pair carries k > 1
/// curves, k-1 of them are split at their arc-length midpoint through a new
/// degree-2 node, preserving the union of curves.
pub fn simplify_multiedges(nodes: Vec<Node>, raw: Vec<RawEdge>) -> Result<ShapeGraph> {
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if index.insert(n.id.clone(), i).is_some() {
            return Err(Error::Data(format!("duplicate node id `{}`", n.id)));
        }
    }
    let mut nodes = nodes;
    let mut taken: BTreeSet<String> = index.keys().cloned().collect();
    let mut edges: BTreeMap<(usize, usize), Edge> = BTreeMap::new();

    for e in raw {
        let u = *index
            .get(&e.u)
            .ok_or_else(|| Error::Data(format!("edge references unknown node id `{}`", e.u)))?;
        let v = *index
            .get(&e.v)
            .ok_or_else(|| Error::Data(format!("edge references unknown node id `{}`", e.v)))?;
        let mut curve = e.curve;
        if u > v {
            curve = curve.reversed();
        }
        let key = norm_key(u, v);
        let weight = e.weight.unwrap_or_else(|| curve.arc_length());
        if !edges.contains_key(&key) {
            edges.insert(key, Edge { curve, weight });
            continue;
        }
        if u == v {
            return Err(Error::Data(format!(
                "multiple self-loops at node `{}`",
                e.u
            )));
        }
        // duplicate pair: split this curve at its midpoint through a new node
        if curve.is_degenerate() {
            return Err(Error::Degenerate(format!(
                "cannot split degenerate duplicate edge `{}`-`{}`",
                e.u, e.v
            )));
        }
        let (front, back, mid) = split_at_midpoint(&curve)?;
        let mid_id = fresh_ids(&mut taken, 1).pop().unwrap();
        let mid_idx = nodes.len();
        nodes.push(Node::real(mid_id, mid));
        let wf = front.arc_length();
        let wb = back.arc_length();
        let fkey = norm_key(key.0, mid_idx);
        let bkey = norm_key(mid_idx, key.1);
        let fcurve = if fkey.0 == mid_idx { front.reversed() } else { front };
        let bcurve = if bkey.0 == mid_idx { back } else { back.reversed() };
        edges.insert(fkey, Edge { curve: fcurve, weight: wf });
        edges.insert(bkey, Edge { curve: bcurve, weight: wb });
    }

    Ok(ShapeGraph {
        nodes,
        edges,
        metadata: BTreeMap::new(),
    })
}

fn split_at_midpoint(curve: &PlanarCurve) -> Result<(PlanarCurve, PlanarCurve, Point)> {
    let pts = curve.samples();
    let total = curve.arc_length();
    let half = total / 2.0;
    let mut acc = 0.0;
    for i in 0..pts.len() - 1 {
        let seg = pts[i].distance(pts[i + 1]);
        if acc + seg >= half && seg > 0.0 {
            let f = (half - acc) / seg;
            let mid = pts[i].lerp(pts[i + 1], f.clamp(0.0, 1.0));
            let mut front: Vec<Point> = pts[..=i].to_vec();
            front.push(mid);
            let mut back = vec![mid];
            back.extend_from_slice(&pts[i + 1..]);
            return Ok((PlanarCurve::new(front)?, PlanarCurve::new(back)?, mid));
        }
        acc += seg;
    }
    Err(Error::Degenerate("could not split curve".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn seg_curve(a: Point, b: Point) -> PlanarCurve {
        PlanarCurve::new(vec![a, a.lerp(b, 0.5), b]).unwrap()
    }

    fn two_node_graph() -> ShapeGraph {
        let a = Point::ZERO;
        let b = Point::new(1.0, 0.0);
        ShapeGraph::new(
            vec![Node::real("a", a), Node::real("b", b)],
            vec![((0, 1), Edge { curve: seg_curve(a, b), weight: 1.0 })],
        )
        .unwrap()
    }

    #[test]
    fn validate_empty_and_valid() {
        assert!(validate(&ShapeGraph::empty()).is_empty());
        assert!(validate(&two_node_graph()).is_empty());
    }

    #[test]
    fn validate_reports_self_loop_by_name() {
        let a = Point::ZERO;
        let g = ShapeGraph::new(
            vec![Node::real("a", a), Node::real("b", Point::new(1.0, 0.0))],
            vec![((0, 0), Edge { curve: seg_curve(a, a + Point::new(0.5, 0.5)), weight: 1.0 })],
        )
        .unwrap();
        let v = validate(&g);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("`a`"));
    }

    #[test]
    fn validate_reports_endpoint_mismatch() {
        let a = Point::ZERO;
        let b = Point::new(1.0, 0.0);
        let g = ShapeGraph::new(
            vec![Node::real("a", a), Node::real("b", b)],
            vec![((0, 1), Edge { curve: seg_curve(a, b + Point::new(0.5, 0.0)), weight: 1.0 })],
        )
        .unwrap();
        let v = validate(&g);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::EndpointMismatch { .. }));
    }

    #[test]
    fn weights_by_policy() {
        let g = two_node_graph();
        let by_len = assign_weights(&g, WeightPolicy::Length);
        assert!((by_len.edge(0, 1).unwrap().weight - 1.0).abs() < 1e-12);
        let by_bin = assign_weights(&g, WeightPolicy::Binary);
        assert_eq!(by_bin.edge(0, 1).unwrap().weight, 1.0);

        // quarter unit circle edge, length policy ~ pi/2
        let arc: Vec<Point> = (0..500)
            .map(|i| {
                let t = PI / 2.0 * i as f64 / 499.0;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        let g = ShapeGraph::new(
            vec![
                Node::real("a", Point::new(1.0, 0.0)),
                Node::real("b", Point::new(0.0, 1.0)),
            ],
            vec![((0, 1), Edge { curve: PlanarCurve::new(arc).unwrap(), weight: 0.0 })],
        )
        .unwrap();
        let w = assign_weights(&g, WeightPolicy::Length)
            .edge(0, 1)
            .unwrap()
            .weight;
        assert!((w - PI / 2.0).abs() < 1e-4, "got {w}");
    }

    #[test]
    fn padding_sizes_and_validity() {
        let g3 = two_node_graph(); // 2 nodes; build a 3rd
        let mut g3 = g3;
        g3.nodes.push(Node::real("c", Point::new(2.0, 0.0)));
        let g5 = {
            let mut g = two_node_graph();
            for (i, id) in ["c", "d", "e"].iter().enumerate() {
                g.nodes.push(Node::real(*id, Point::new(2.0 + i as f64, 0.0)));
            }
            g
        };
        let (p0, p1) = pad_nulls(&g3, &g5);
        assert_eq!(p0.node_count(), 8);
        assert_eq!(p1.node_count(), 8);
        assert!(validate(&p0).is_empty());
        assert!(validate(&p1).is_empty());

        let g = two_node_graph();
        let (q0, q1) = pad_nulls(&g, &g);
        assert_eq!(q0.node_count(), 4);
        assert_eq!(q1.node_count(), 4);
    }

    #[test]
    fn small_component_removal() {
        let a = Point::ZERO;
        let b = Point::new(1.0, 0.0);
        let c = Point::new(5.0, 5.0);
        let d = Point::new(6.0, 5.0);
        let g = ShapeGraph::new(
            vec![
                Node::real("a", a),
                Node::real("b", b),
                Node::real("c", c),
                Node::real("d", d),
                Node::real("e", Point::new(2.0, 0.0)),
            ],
            vec![
                ((0, 1), Edge { curve: seg_curve(a, b), weight: 1.0 }),
                ((1, 4), Edge { curve: seg_curve(b, Point::new(2.0, 0.0)), weight: 1.0 }),
                ((2, 3), Edge { curve: seg_curve(c, d), weight: 1.0 }),
            ],
        )
        .unwrap();
        let kept = remove_small_components(&g, 3);
        assert_eq!(kept.node_count(), 3);
        assert_eq!(kept.edge_count(), 2);
        assert_eq!(remove_small_components(&g, 0).node_count(), 5);
        assert_eq!(remove_small_components(&g, 10).node_count(), 0);
    }

    #[test]
    fn simplify_keeps_simple_input() {
        let a = Point::ZERO;
        let b = Point::new(1.0, 0.0);
        let g = simplify_multiedges(
            vec![Node::real("a", a), Node::real("b", b)],
            vec![RawEdge {
                u: "a".into(),
                v: "b".into(),
                curve: seg_curve(a, b),
                weight: None,
            }],
        )
        .unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn simplify_splits_duplicates() {
        let a = Point::ZERO;
        let b = Point::new(1.0, 0.0);
        let dup = |dy: f64| RawEdge {
            u: "a".into(),
            v: "b".into(),
            curve: PlanarCurve::new(vec![a, Point::new(0.5, dy), b]).unwrap(),
            weight: None,
        };
        let g = simplify_multiedges(
            vec![Node::real("a", a), Node::real("b", b)],
            vec![dup(0.0), dup(0.4)],
        )
        .unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);

        let g3 = simplify_multiedges(
            vec![Node::real("a", a), Node::real("b", b)],
            vec![dup(0.0), dup(0.4), dup(-0.4)],
        )
        .unwrap();
        assert_eq!(g3.node_count(), 4); // 2 original + 2 midpoints
        assert_eq!(g3.edge_count(), 5); // 1 kept + 2x2 halves
    }

    #[test]
    fn missing_node_id_is_reported() {
        let err = simplify_multiedges(
            vec![Node::real("a", Point::ZERO)],
            vec![RawEdge {
                u: "a".into(),
                v: "ghost".into(),
                curve: seg_curve(Point::ZERO, Point::new(1.0, 0.0)),
                weight: None,
            }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }
}
