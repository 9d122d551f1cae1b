//! Multi-resolution representation of shape graphs: internal node metrics
//! (Euclidean, geodesic, effective resistance), complete-linkage
//! dendrograms, coarsened graphs, and resolution selection against a target
//! graph.

use crate::curve::{fit_to_endpoints, from_srvf, karcher_mean_curves, resample, to_srvf, PlanarCurve};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::graph::{Edge, Node, ShapeGraph};
use crate::matching::{register_pair, MatchParams};
use nalgebra::DMatrix;

/// Which internal node metric to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    Geodesic,
    EffectiveResistance,
}

/// A pairwise node metric on a graph: symmetric, zero diagonal. Entries
/// across connected components are finite sentinels (10x the largest
/// intra-component entry) so downstream clustering stays well defined.
#[derive(Debug, Clone)]
pub struct InternalMetric {
    pub kind: MetricKind,
    pub matrix: DMatrix<f64>,
}

/// Pairwise node metric of the requested kind. Geodesic distances sum edge
/// arc lengths along paths; effective resistance uses conductances equal to
/// reciprocal edge lengths through the Laplacian pseudoinverse.
pub fn internal_metric(g: &ShapeGraph, kind: MetricKind) -> Result<InternalMetric> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Argument("graph has no nodes".into()));
    }
    if g.nodes().iter().any(|x| x.is_null()) {
        return Err(Error::Argument(
            "internal metrics require a graph without null nodes".into(),
        ));
    }
    let matrix = match kind {
        MetricKind::Euclidean => {
            DMatrix::from_fn(n, n, |i, j| {
                g.nodes()[i]
                    .position
                    .unwrap()
                    .distance(g.nodes()[j].position.unwrap())
            })
        }
        MetricKind::Geodesic => {
            let mut d = DMatrix::from_element(n, n, f64::INFINITY);
            for i in 0..n {
                d[(i, i)] = 0.0;
            }
            for (&(u, v), e) in g.edges() {
                let len = e.curve.arc_length();
                if !(len > 0.0) {
                    return Err(Error::Argument(
                        "geodesic metric requires positive edge lengths".into(),
                    ));
                }
                if len < d[(u, v)] {
                    d[(u, v)] = len;
                    d[(v, u)] = len;
                }
            }
            for k in 0..n {
                for i in 0..n {
                    if !d[(i, k)].is_finite() {
                        continue;
                    }
                    for j in 0..n {
                        let via = d[(i, k)] + d[(k, j)];
                        if via < d[(i, j)] {
                            d[(i, j)] = via;
                            d[(j, i)] = via;
                        }
                    }
                }
            }
            apply_sentinel(d)
        }
        MetricKind::EffectiveResistance => {
            let comps = g.connected_components();
            let mut d = DMatrix::from_element(n, n, f64::INFINITY);
            for i in 0..n {
                d[(i, i)] = 0.0;
            }
            for comp in comps {
                let m = comp.len();
                if m == 1 {
                    continue;
                }
                let local: std::collections::BTreeMap<usize, usize> =
                    comp.iter().enumerate().map(|(l, &gidx)| (gidx, l)).collect();
                let mut q = DMatrix::<f64>::zeros(m, m);
                for (&(u, v), e) in g.edges() {
                    let (Some(&lu), Some(&lv)) = (local.get(&u), local.get(&v)) else {
                        continue;
                    };
                    let len = e.curve.arc_length();
                    if !(len > 0.0) {
                        return Err(Error::Argument(
                            "effective resistance requires positive edge lengths".into(),
                        ));
                    }
                    let w = 1.0 / len;
                    q[(lu, lv)] -= w;
                    q[(lv, lu)] -= w;
                    q[(lu, lu)] += w;
                    q[(lv, lv)] += w;
                }
                // Moore-Penrose pseudoinverse of the singular Laplacian via
                // the rank-one shift: (Q + J/m)^{-1} - J/m
                let jm = DMatrix::from_element(m, m, 1.0 / m as f64);
                let shifted = &q + &jm;
                let inv = shifted.try_inverse().ok_or_else(|| {
                    Error::Data("component Laplacian shift is singular".into())
                })?;
                let pinv = inv - jm;
                for a in 0..m {
                    for b in 0..m {
                        let r = pinv[(a, a)] + pinv[(b, b)] - 2.0 * pinv[(a, b)];
                        d[(comp[a], comp[b])] = r.max(0.0);
                    }
                }
            }
            apply_sentinel(d)
        }
    };
    Ok(InternalMetric { kind, matrix })
}

fn apply_sentinel(mut d: DMatrix<f64>) -> DMatrix<f64> {
    let max_finite = d.iter().filter(|v| v.is_finite()).cloned().fold(0.0, f64::max);
    let sentinel = if max_finite > 0.0 { 10.0 * max_finite } else { 1.0 };
    for v in d.iter_mut() {
        if !v.is_finite() {
            *v = sentinel;
        }
    }
    d
}

/// One merge of the agglomerative process: clusters `a` and `b` (leaf ids
/// 0..n-1, merged clusters n, n+1, ...) joined at `height`.
#[derive(Debug, Clone, Copy)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Complete-linkage merge tree over the nodes of a metric.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaf_count(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Cut the tree into exactly `k` clusters. Cluster ids are compacted in
    /// order of each cluster's smallest node index.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n {
            return Err(Error::Argument(format!(
                "cannot cut {} leaves into {k} clusters",
                self.n
            )));
        }
        // union-find over the first n-k merges
        let total = self.n + self.merges.len();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (step, m) in self.merges.iter().take(self.n - k).enumerate() {
            let target = self.n + step;
            for side in [m.a, m.b] {
                let root = find(&mut parent, side);
                parent[root] = target;
            }
        }
        let mut rep: Vec<usize> = (0..self.n).map(|i| find(&mut parent, i)).collect();
        // compact ids ordered by smallest member
        let mut first_seen: Vec<(usize, usize)> = Vec::new(); // (root, min index)
        for (i, &r) in rep.iter().enumerate() {
            if !first_seen.iter().any(|&(root, _)| root == r) {
                first_seen.push((r, i));
            }
        }
        first_seen.sort_by_key(|&(_, min_idx)| min_idx);
        let id_of = |root: usize| first_seen.iter().position(|&(r, _)| r == root).unwrap();
        for r in rep.iter_mut() {
            *r = id_of(*r);
        }
        Ok(rep)
    }
}

/// Complete-linkage agglomeration of the metric's nodes. Ties between merge
/// candidates resolve to the smallest (i, j) cluster-id pair.
pub fn build_dendrogram(metric: &InternalMetric) -> Dendrogram {
    let n = metric.matrix.nrows();
    let total = if n > 0 { 2 * n - 1 } else { 0 };
    let mut dist = vec![f64::NAN; total * total];
    let at = |i: usize, j: usize| i * total + j;
    for i in 0..n {
        for j in 0..n {
            dist[at(i, j)] = metric.matrix[(i, j)];
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let d = dist[at(a, b)];
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (height, a, b) = best;
        let new_id = n + merges.len();
        for &c in &active {
            if c == a || c == b {
                continue;
            }
            let d = dist[at(a, c)].max(dist[at(b, c)]);
            dist[at(new_id, c)] = d;
            dist[at(c, new_id)] = d;
        }
        active.retain(|&c| c != a && c != b);
        active.push(new_id);
        merges.push(Merge { a, b, height });
    }
    Dendrogram { n, merges }
}

/// A graph coarsened to a fraction `level` of its original node count.
#[derive(Debug, Clone)]
pub struct CoarseGraph {
    pub level: f64,
    /// Original node index -> cluster id.
    pub assignment: Vec<usize>,
    pub graph: ShapeGraph,
}

/// Coarsen a graph to k = max(1, round(h*n)) clusters cut from the
/// dendrogram. Cluster representatives sit at member-position means;
/// inter-cluster edges carry the Karcher mean of the crossing curves,
/// similarity-fitted to the representative endpoints, weighted by the fitted
/// arc length. Intra-cluster edges are discarded.
pub fn coarsen(g: &ShapeGraph, dend: &Dendrogram, h: f64, samples: usize) -> Result<CoarseGraph> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Argument(format!("h must lie in (0,1], got {h}")));
    }
    let n = g.node_count();
    if dend.leaf_count() != n {
        return Err(Error::Argument(
            "dendrogram was built for a different node count".into(),
        ));
    }
    let k = ((h * n as f64).round() as usize).clamp(1, n);
    let assignment = dend.cut(k)?;

    let mut sums = vec![(Point::ZERO, 0usize); k];
    for (i, &c) in assignment.iter().enumerate() {
        let p = g.nodes()[i].position.ok_or_else(|| {
            Error::Argument("coarsening requires a graph without null nodes".into())
        })?;
        sums[c].0 = sums[c].0 + p;
        sums[c].1 += 1;
    }
    let reps: Vec<Point> = sums
        .iter()
        .map(|&(acc, cnt)| acc / cnt.max(1) as f64)
        .collect();

    // gather inter-cluster curves, oriented low-cluster -> high-cluster
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<PlanarCurve>> =
        std::collections::BTreeMap::new();
    for (&(u, v), e) in g.edges() {
        let (cu, cv) = (assignment[u], assignment[v]);
        if cu == cv {
            continue;
        }
        let curve = if cu < cv { e.curve.clone() } else { e.curve.reversed() };
        let key = (cu.min(cv), cu.max(cv));
        groups.entry(key).or_default().push(curve);
    }

    let nodes: Vec<Node> = reps
        .iter()
        .enumerate()
        .map(|(c, &p)| Node::real(format!("c{c}"), p))
        .collect();
    let mut edges = Vec::new();
    for ((ci, cj), curves) in groups {
        let (pi, pj) = (reps[ci], reps[cj]);
        if pi.distance(pj) < 1e-12 {
            // representatives coincide; an edge cannot be drawn
            continue;
        }
        let srvs: Vec<_> = curves
            .iter()
            .map(|c| Ok(to_srvf(&resample(c, samples)?)))
            .collect::<Result<Vec<_>>>()?;
        let mean = karcher_mean_curves(&srvs, 1e-8, 30)?;
        let raw = from_srvf(&mean, pi);
        let fitted = match fit_to_endpoints(&raw, pi, pj) {
            Ok(c) => c,
            // degenerate mean shape: fall back to the straight segment
            Err(_) => PlanarCurve::new(vec![pi, pi.lerp(pj, 0.5), pj])?,
        };
        let weight = fitted.arc_length();
        edges.push(((ci, cj), Edge { curve: fitted, weight }));
    }
    let graph = ShapeGraph::new(nodes, edges)?;
    Ok(CoarseGraph {
        level: h,
        assignment,
        graph,
    })
}

/// Outcome of resolution selection.
#[derive(Debug, Clone)]
pub struct ResolutionSelection {
    pub h_star: f64,
    pub coarse: CoarseGraph,
    /// (h, d_graph) for every requested level, in input order.
    pub profile: Vec<(f64, f64)>,
}

/// Register `g1` against coarsenings of `g2` over the given levels and pick
/// the distance-minimizing level (ties resolve toward the larger h).
pub fn select_resolution(
    g1: &ShapeGraph,
    g2: &ShapeGraph,
    levels: &[f64],
    params: &MatchParams,
) -> Result<ResolutionSelection> {
    if levels.is_empty() {
        return Err(Error::Argument("levels must not be empty".into()));
    }
    let metric = internal_metric(g2, MetricKind::EffectiveResistance)?;
    let dend = build_dendrogram(&metric);
    let mut profile = Vec::with_capacity(levels.len());
    let mut best: Option<(f64, f64, CoarseGraph)> = None; // (d, h, coarse)
    for &h in levels {
        let coarse = coarsen(g2, &dend, h, params.samples)?;
        let reg = register_pair(g1, &coarse.graph, params)?;
        profile.push((h, reg.d_graph));
        let replace = match &best {
            None => true,
            Some((bd, bh, _)) => reg.d_graph < *bd || (reg.d_graph == *bd && h > *bh),
        };
        if replace {
            best = Some((reg.d_graph, h, coarse));
        }
    }
    let (_, h_star, coarse) = best.unwrap();
    Ok(ResolutionSelection {
        h_star,
        coarse,
        profile,
    })
}

/// Uniform grid of `count` levels on (0, 1], ending at 1.
pub fn uniform_levels(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / count as f64).collect()
}
