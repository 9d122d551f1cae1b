//! Seeded synthetic shape graphs and perturbations, used by the benchmark
//! subcommand and by solver-quality checks with known ground truth.

use crate::curve::PlanarCurve;
use crate::geom::Point;
use crate::graph::{Edge, Node, ShapeGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CURVE_POINTS: usize = 16;

fn bent_curve(a: Point, b: Point, bend: f64) -> PlanarCurve {
    let chord = b - a;
    let normal = Point::new(-chord.y, chord.x);
    let pts = (0..CURVE_POINTS)
        .map(|i| {
            let t = i as f64 / (CURVE_POINTS - 1) as f64;
            a.lerp(b, t) + normal * (bend * t * (1.0 - t))
        })
        .collect();
    PlanarCurve::new(pts).unwrap()
}

/// Random connected shape graph with `n` nodes in the unit square: a random
/// spanning tree plus ~n/4 extra edges, with gently bent curves. Identical
/// for identical (n, seed).
pub fn random_graph(n: usize, seed: u64) -> ShapeGraph {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            Node::real(
                format!("v{i}"),
                Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
            )
        })
        .collect();
    let mut edges: Vec<((usize, usize), Edge)> = Vec::new();
    let mut present = std::collections::BTreeSet::new();
    let add = |u: usize, v: usize, rng: &mut ChaCha8Rng, edges: &mut Vec<((usize, usize), Edge)>, present: &mut std::collections::BTreeSet<(usize, usize)>| {
        let key = if u < v { (u, v) } else { (v, u) };
        if u == v || present.contains(&key) {
            return;
        }
        present.insert(key);
        let a = nodes[key.0].position.unwrap();
        let b = nodes[key.1].position.unwrap();
        let bend = rng.gen_range(-0.25..0.25);
        edges.push((key, Edge { curve: bent_curve(a, b, bend), weight: 1.0 }));
    };
    for v in 1..n {
        let u = rng.gen_range(0..v);
        add(u, v, &mut rng, &mut edges, &mut present);
    }
    for _ in 0..n / 4 {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        add(u, v, &mut rng, &mut edges, &mut present);
    }
    ShapeGraph::new(nodes, edges).unwrap()
}

/// Controls for [`perturb_graph`].
#[derive(Debug, Clone, Copy)]
pub struct Perturbation {
    /// Relative amplitude of the per-edge bend change (endpoints fixed).
    pub stretch: f64,
    /// Number of non-cut nodes to delete (with their incident edges).
    pub delete_nodes: usize,
    /// Number of additional edges to delete.
    pub delete_edges: usize,
    /// Shuffle the node order (relabels indices, keeps ids).
    pub reorder: bool,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            stretch: 0.15,
            delete_nodes: 1,
            delete_edges: 1,
            reorder: true,
        }
    }
}

/// Perturb a graph by stretching edge curves, deleting nodes/edges, and
/// reordering nodes. Returns the perturbed graph and the ground-truth
/// correspondence: original node index -> surviving new index (None if
/// deleted).
pub fn perturb_graph(
    g: &ShapeGraph,
    p: Perturbation,
    seed: u64,
) -> (ShapeGraph, Vec<Option<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.node_count();

    // stretch: rescale each curve's deviation from its chord
    let mut edges: Vec<((usize, usize), Edge)> = g
        .edges()
        .map(|(&(u, v), e)| {
            let a = e.curve.first();
            let b = e.curve.last();
            let factor = 1.0 + rng.gen_range(-p.stretch..p.stretch);
            let pts: Vec<Point> = e
                .curve
                .samples()
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let t = i as f64 / (e.curve.len() - 1) as f64;
                    let base = a.lerp(b, t);
                    base + (s - base) * factor
                })
                .collect();
            (
                (u, v),
                Edge {
                    curve: PlanarCurve::new(pts).unwrap(),
                    weight: e.weight,
                },
            )
        })
        .collect();

    // delete edges (never disconnecting a leaf completely is not enforced;
    // registration copes with isolated nodes)
    for _ in 0..p.delete_edges.min(edges.len().saturating_sub(1)) {
        let k = rng.gen_range(0..edges.len());
        edges.remove(k);
    }

    // delete nodes, preferring leaves so the graph stays recognizable
    let mut deleted = std::collections::BTreeSet::new();
    for _ in 0..p.delete_nodes.min(n.saturating_sub(2)) {
        let degree = |i: usize, edges: &Vec<((usize, usize), Edge)>| {
            edges
                .iter()
                .filter(|((u, v), _)| *u == i || *v == i)
                .count()
        };
        let mut candidates: Vec<usize> = (0..n)
            .filter(|i| !deleted.contains(i))
            .collect();
        candidates.sort_by_key(|&i| degree(i, &edges));
        let min_deg = degree(candidates[0], &edges);
        let leaves: Vec<usize> = candidates
            .into_iter()
            .filter(|&i| degree(i, &edges) == min_deg)
            .collect();
        let victim = leaves[rng.gen_range(0..leaves.len())];
        deleted.insert(victim);
        edges.retain(|((u, v), _)| *u != victim && *v != victim);
    }

    // survivors, optionally reordered
    let mut survivors: Vec<usize> = (0..n).filter(|i| !deleted.contains(i)).collect();
    if p.reorder {
        use rand::seq::SliceRandom;
        survivors.shuffle(&mut rng);
    }
    let mut mapping = vec![None; n];
    for (new, &old) in survivors.iter().enumerate() {
        mapping[old] = Some(new);
    }

    let nodes: Vec<Node> = survivors.iter().map(|&old| g.nodes()[old].clone()).collect();
    let remapped = edges
        .into_iter()
        .filter_map(|((u, v), e)| Some(((mapping[u]?, mapping[v]?), e)))
        .collect();
    let out = ShapeGraph::new(nodes, remapped).expect("perturbed graph is structurally valid");
    (out, mapping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate;

    #[test]
    fn generation_is_deterministic_and_valid() {
        let a = random_graph(12, 3);
        let b = random_graph(12, 3);
        assert!(crate::io::graphs_identical(&a, &b));
        assert!(validate(&a).is_empty());
        assert_eq!(a.connected_components().len(), 1);
    }

    #[test]
    fn perturbation_tracks_ground_truth() {
        let g = random_graph(10, 7);
        let (h, mapping) = perturb_graph(&g, Perturbation::default(), 11);
        assert!(validate(&h).is_empty());
        let survivors = mapping.iter().filter(|m| m.is_some()).count();
        assert_eq!(survivors, h.node_count());
        for (old, m) in mapping.iter().enumerate() {
            if let Some(new) = m {
                assert_eq!(g.nodes()[old].id, h.nodes()[*new].id);
            }
        }
    }
}
