//! Population statistics on shape-graph space: pairwise distance matrices,
//! Karcher means of graph collections, tangent PCA over shooting vectors,
//! and distance-matrix clustering with mode and outlier reporting.

use crate::curve::{fit_to_endpoints, from_srvf, register, resample, to_srvf, PlanarCurve, SrvCurve};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::graph::{assign_weights, Edge, Node, ShapeGraph};
use crate::matching::{register_padded_pair, MatchParams, PairRegistration, Registration};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Symmetric matrix of registered graph distances: each unordered pair is
/// registered in both directions and the two distances averaged.
pub fn pairwise_distances(graphs: &[ShapeGraph], params: &MatchParams) -> Result<DMatrix<f64>> {
    let m = graphs.len();
    if m < 2 {
        return Err(Error::Argument("need at least 2 graphs".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let values: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let ab = crate::matching::register_pair(&graphs[i], &graphs[j], params)?.d_graph;
            let ba = crate::matching::register_pair(&graphs[j], &graphs[i], params)?.d_graph;
            Ok(0.5 * (ab + ba))
        })
        .collect();
    let mut out = DMatrix::zeros(m, m);
    for (&(i, j), v) in pairs.iter().zip(values) {
        let v = v?;
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    Ok(out)
}

/// Template-indexed data of one input registered onto the mean template.
#[derive(Debug, Clone)]
pub(crate) struct MatchedGraphData {
    /// Position of the input node matched to each template node (None when
    /// matched to padding).
    pub positions: Vec<Option<Point>>,
    /// Real matched edges per template pair (a < b): SRV curve oriented
    /// a -> b (registered to the mean's edge when one exists) and weight.
    pub edges: BTreeMap<(usize, usize), (SrvCurve, f64)>,
}

/// The mean's own template-indexed data (raw averages, before curves are
/// refit to endpoints for display).
#[derive(Debug, Clone)]
pub(crate) struct MeanData {
    pub positions: Vec<Point>,
    pub edges: BTreeMap<(usize, usize), (SrvCurve, f64)>,
}

/// Turn template data into a shape graph: curves are rebuilt from the SRV
/// blocks and similarity-fitted onto their endpoint positions.
fn materialize(data: &MeanData, ids: &[String]) -> Result<ShapeGraph> {
    let nodes: Vec<Node> = ids
        .iter()
        .zip(&data.positions)
        .map(|(id, &p)| Node::real(id.clone(), p))
        .collect();
    let mut edges = Vec::new();
    for (&(a, b), (q, w)) in &data.edges {
        if *w <= 1e-9 {
            continue;
        }
        let (pa, pb) = (data.positions[a], data.positions[b]);
        let raw = from_srvf(q, pa);
        let curve = match fit_to_endpoints(&raw, pa, pb) {
            Ok(c) => c,
            Err(_) => {
                if pa.distance(pb) < 1e-12 {
                    continue; // endpoints collapsed; nothing to draw
                }
                PlanarCurve::new(vec![pa, pa.lerp(pb, 0.5), pb])?
            }
        };
        edges.push(((a, b), Edge { curve, weight: *w }));
    }
    ShapeGraph::new(nodes, edges)
}

fn graph_to_mean_data(g: &ShapeGraph, samples: usize) -> Result<MeanData> {
    let positions: Vec<Point> = g
        .nodes()
        .iter()
        .map(|x| {
            x.position
                .ok_or_else(|| Error::Argument("mean template must have no null nodes".into()))
        })
        .collect::<Result<_>>()?;
    let mut edges = BTreeMap::new();
    for (&(u, v), e) in g.edges() {
        if e.weight <= 0.0 {
            continue;
        }
        let q = to_srvf(&resample(&e.curve, samples)?);
        edges.insert((u, v), (q, e.weight));
    }
    Ok(MeanData { positions, edges })
}

fn extract_matched(
    pair: &PairRegistration,
    n_template: usize,
    mean: &MeanData,
    samples: usize,
) -> Result<MatchedGraphData> {
    let sigma = &pair.registration.permutation;
    let g1 = &pair.padded1;
    let positions: Vec<Option<Point>> = (0..n_template)
        .map(|a| g1.nodes()[sigma[a]].position)
        .collect();

    let mut inv = vec![usize::MAX; sigma.len()];
    for (i, &j) in sigma.iter().enumerate() {
        inv[j] = i;
    }
    let mut edges = BTreeMap::new();
    for (&(ju, jv), e) in g1.edges() {
        if e.weight <= 0.0 {
            continue;
        }
        let (a, b) = (inv[ju], inv[jv]);
        if a >= n_template || b >= n_template {
            continue;
        }
        let (ta, tb) = (a.min(b), a.max(b));
        // curve oriented sigma[ta] -> sigma[tb]
        let (ja, _jb) = (sigma[ta], sigma[tb]);
        let stored = &e.curve; // oriented min(ju,jv) -> max(ju,jv)
        let oriented = if ja == ju.min(jv) {
            stored.clone()
        } else {
            stored.reversed()
        };
        let mut q = to_srvf(&resample(&oriented, samples)?);
        if let Some((mq, _)) = mean.edges.get(&(ta, tb)) {
            let (_, reg) = register(mq, &q);
            q = reg;
        }
        edges.insert((ta, tb), (q, e.weight));
    }
    Ok(MatchedGraphData { positions, edges })
}

fn average_matched(matched: &[MatchedGraphData], prev: &MeanData, samples: usize) -> MeanData {
    let m = matched.len() as f64;
    let n = prev.positions.len();
    let mut positions = Vec::with_capacity(n);
    for a in 0..n {
        let mut acc = Point::ZERO;
        let mut count = 0usize;
        for data in matched {
            if let Some(p) = data.positions[a] {
                acc = acc + p;
                count += 1;
            }
        }
        // average over real matches only; an all-null slot keeps its previous
        // position (the abstract point has no coordinates)
        positions.push(if count > 0 {
            acc / count as f64
        } else {
            prev.positions[a]
        });
    }

    let mut keys: std::collections::BTreeSet<(usize, usize)> = std::collections::BTreeSet::new();
    for data in matched {
        keys.extend(data.edges.keys().cloned());
    }
    let mut edges = BTreeMap::new();
    for key in keys {
        let mut vals = vec![Point::ZERO; samples];
        let mut w = 0.0;
        for data in matched {
            if let Some((q, wi)) = data.edges.get(&key) {
                for (acc, v) in vals.iter_mut().zip(q.values()) {
                    *acc = *acc + *v;
                }
                w += wi;
            }
            // null slots contribute a zero SRV curve and zero weight
        }
        for v in vals.iter_mut() {
            *v = *v / m;
        }
        w /= m;
        if w > 1e-12 {
            edges.insert(key, (SrvCurve::new(vals).expect("finite average"), w));
        }
    }
    MeanData { positions, edges }
}

/// Mean template initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanInit {
    /// The graph with the most nodes (ties: most edges, then input order).
    Largest,
    /// A caller-chosen input index.
    Index(usize),
}

/// Result of the iterative graph mean.
pub struct MeanResult {
    pub mean: ShapeGraph,
    /// Final per-input registrations onto the mean.
    pub registrations: Vec<Registration>,
    /// Sum of squared graph distances after each accepted iteration
    /// (non-increasing within a 1e-6 relative tolerance).
    pub objective_trace: Vec<f64>,
    pub(crate) template_ids: Vec<String>,
    pub(crate) mean_data: MeanData,
    pub(crate) matched: Vec<MatchedGraphData>,
    pub(crate) params: MatchParams,
}

struct MeanState {
    mean_graph: ShapeGraph,
    mean_data: MeanData,
    matched: Vec<MatchedGraphData>,
    registrations: Vec<Registration>,
    objective: f64,
}

fn evaluate_mean(
    mean_graph: &ShapeGraph,
    mean_data: &MeanData,
    graphs: &[ShapeGraph],
    params: &MatchParams,
) -> Result<(Vec<MatchedGraphData>, Vec<Registration>, f64)> {
    let n_template = mean_graph.node_count();
    let pairs: Vec<Result<PairRegistration>> = graphs
        .par_iter()
        .map(|g| register_padded_pair(mean_graph, g, params))
        .collect();
    let mut matched = Vec::with_capacity(graphs.len());
    let mut registrations = Vec::with_capacity(graphs.len());
    let mut objective = 0.0;
    for pair in pairs {
        let pair = pair?;
        objective += pair.registration.d_graph * pair.registration.d_graph;
        matched.push(extract_matched(&pair, n_template, mean_data, params.samples)?);
        registrations.push(pair.registration);
    }
    Ok((matched, registrations, objective))
}

/// Iterative Karcher mean of a graph collection: register every input to the
/// current mean, average the matched adjacency data and node positions,
/// repeat until the summed squared distance stabilizes. An iteration that
/// increases the objective beyond a 1e-6 relative tolerance is rejected and
/// terminates the loop.
pub fn karcher_mean_graphs(
    graphs: &[ShapeGraph],
    tol: f64,
    max_iter: usize,
    init: MeanInit,
    params: &MatchParams,
) -> Result<MeanResult> {
    if graphs.is_empty() {
        return Err(Error::Argument("karcher mean of zero graphs".into()));
    }
    params.validate()?;
    let weighted: Vec<ShapeGraph> = graphs
        .iter()
        .map(|g| assign_weights(g, params.weight_policy))
        .collect();

    let init_idx = match init {
        MeanInit::Index(i) => {
            if i >= graphs.len() {
                return Err(Error::Argument(format!(
                    "init index {i} out of range for {} graphs",
                    graphs.len()
                )));
            }
            i
        }
        MeanInit::Largest => {
            let mut best = 0usize;
            for (i, g) in weighted.iter().enumerate() {
                let better = (g.node_count(), g.edge_count()) > (weighted[best].node_count(), weighted[best].edge_count());
                if better {
                    best = i;
                }
            }
            best
        }
    };

    let template = weighted[init_idx].clone();
    let template_ids: Vec<String> = template.nodes().iter().map(|n| n.id.clone()).collect();
    let mean_data = graph_to_mean_data(&template, params.samples)?;
    let (matched, registrations, objective) =
        evaluate_mean(&template, &mean_data, &weighted, params)?;
    let mut state = MeanState {
        mean_graph: template,
        mean_data,
        matched,
        registrations,
        objective,
    };
    let mut trace = vec![state.objective];

    for _ in 0..max_iter {
        let new_data = average_matched(&state.matched, &state.mean_data, params.samples);
        let new_graph = materialize(&new_data, &template_ids)?;
        let (new_matched, new_regs, new_obj) =
            evaluate_mean(&new_graph, &new_data, &weighted, params)?;
        if new_obj > state.objective * (1.0 + 1e-6) + 1e-12 {
            break; // reject the update, keep the previous mean
        }
        let delta = (state.objective - new_obj).abs();
        let converged = delta <= tol * state.objective.max(1e-12);
        state = MeanState {
            mean_graph: new_graph,
            mean_data: new_data,
            matched: new_matched,
            registrations: new_regs,
            objective: new_obj,
        };
        trace.push(state.objective);
        if converged {
            break;
        }
    }

    Ok(MeanResult {
        mean: state.mean_graph,
        registrations: state.registrations,
        objective_trace: trace,
        template_ids,
        mean_data: state.mean_data,
        matched: state.matched,
        params: *params,
    })
}

/// Fixed flattening order for shooting vectors: per template pair (sorted),
/// the SRV samples then the weight, followed by all node positions. Blocks
/// are scaled so the flattened Euclidean norm mirrors the linearized graph
/// distance: SRV samples by sqrt(2*lambda*quadrature weight), edge weights
/// by eta*sqrt(2*lambda), node coordinates by sqrt(1-lambda).
#[derive(Debug, Clone)]
pub struct FlattenLayout {
    pub pairs: Vec<(usize, usize)>,
    pub samples: usize,
    pub node_count: usize,
    pub srvf_scale: Vec<f64>,
    pub weight_scale: f64,
    pub node_scale: f64,
}

impl FlattenLayout {
    fn new(pairs: Vec<(usize, usize)>, samples: usize, node_count: usize, params: &MatchParams) -> Self {
        let dt = 1.0 / (samples - 1) as f64;
        let srvf_scale = (0..samples)
            .map(|i| {
                let w = if i == 0 || i == samples - 1 { 0.5 * dt } else { dt };
                (2.0 * params.lambda * w).sqrt()
            })
            .collect();
        FlattenLayout {
            pairs,
            samples,
            node_count,
            srvf_scale,
            weight_scale: params.eta * (2.0 * params.lambda).sqrt(),
            node_scale: (1.0 - params.lambda).sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.pairs.len() * (2 * self.samples + 1) + 2 * self.node_count
    }

    fn flatten(&self, positions: &[Point], edges: &BTreeMap<(usize, usize), (SrvCurve, f64)>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        let null = SrvCurve::null(self.samples);
        for key in &self.pairs {
            let (q, w) = edges
                .get(key)
                .map(|(q, w)| (q, *w))
                .unwrap_or((&null, 0.0));
            for (i, v) in q.values().iter().enumerate() {
                out.push(v.x * self.srvf_scale[i]);
                out.push(v.y * self.srvf_scale[i]);
            }
            out.push(w * self.weight_scale);
        }
        for p in positions {
            out.push(p.x * self.node_scale);
            out.push(p.y * self.node_scale);
        }
        out
    }

    fn flatten_matched(&self, data: &MatchedGraphData, mean: &MeanData) -> Vec<f64> {
        // nodes matched to padding contribute zero displacement: their
        // coordinate is taken equal to the mean's
        let positions: Vec<Point> = data
            .positions
            .iter()
            .zip(&mean.positions)
            .map(|(p, &mp)| p.unwrap_or(mp))
            .collect();
        self.flatten(&positions, &data.edges)
    }

    /// Invert the flattening. Coordinates whose scale is zero (lambda at an
    /// endpoint of [0,1]) fall back to the mean's values; weights clamp at 0.
    fn unflatten(&self, flat: &[f64], fallback: &MeanData) -> MeanData {
        let mut idx = 0usize;
        let mut edges = BTreeMap::new();
        for key in &self.pairs {
            let mut vals = Vec::with_capacity(self.samples);
            for i in 0..self.samples {
                let s = self.srvf_scale[i];
                let (x, y) = (flat[idx], flat[idx + 1]);
                idx += 2;
                if s > 1e-300 {
                    vals.push(Point::new(x / s, y / s));
                } else {
                    let fb = fallback
                        .edges
                        .get(key)
                        .map(|(q, _)| q.values()[i])
                        .unwrap_or(Point::ZERO);
                    vals.push(fb);
                }
            }
            let w = if self.weight_scale > 1e-300 {
                (flat[idx] / self.weight_scale).max(0.0)
            } else {
                fallback.edges.get(key).map(|&(_, w)| w).unwrap_or(0.0)
            };
            idx += 1;
            if w > 1e-9 {
                edges.insert(*key, (SrvCurve::new(vals).expect("finite unflatten"), w));
            }
        }
        let mut positions = Vec::with_capacity(self.node_count);
        for a in 0..self.node_count {
            let (x, y) = (flat[idx], flat[idx + 1]);
            idx += 2;
            if self.node_scale > 1e-300 {
                positions.push(Point::new(x / self.node_scale, y / self.node_scale));
            } else {
                positions.push(fallback.positions[a]);
            }
        }
        MeanData { positions, edges }
    }
}

/// Tangent PCA about a graph mean.
pub struct TangentModel {
    pub mean: ShapeGraph,
    /// The mean in flattened coordinates.
    pub mean_flat: Vec<f64>,
    /// Average shooting vector (near zero at a converged mean); kept so
    /// input reconstruction is exact.
    pub center: Vec<f64>,
    /// Per-input shooting vectors (flattened differences from the mean).
    pub vectors: Vec<Vec<f64>>,
    /// Orthonormal principal directions for the numerically nonzero
    /// components, by descending singular value (`rank` entries).
    pub directions: Vec<Vec<f64>>,
    /// All singular values (descending), scaled by 1/sqrt(m) so the sum of
    /// squares equals the total centered variance.
    pub singular_values: Vec<f64>,
    /// Number of numerically nonzero components.
    pub rank: usize,
    pub layout: FlattenLayout,
    pub(crate) mean_data: MeanData,
    pub(crate) template_ids: Vec<String>,
}

impl TangentModel {
    /// Flattened coordinates of the deformation mean + t * sigma_d * U_d.
    pub fn deformation_vector(&self, direction: usize, t: f64) -> Result<Vec<f64>> {
        if direction >= self.rank {
            return Err(Error::Argument(format!(
                "direction {direction} out of range (rank {})",
                self.rank
            )));
        }
        let sigma = self.singular_values[direction];
        let u = &self.directions[direction];
        Ok(self
            .mean_flat
            .iter()
            .zip(u)
            .map(|(&m, &ui)| m + t * sigma * ui)
            .collect())
    }

    /// Reconstruct input `i` from the mean, the center offset, and all
    /// principal components (exact up to floating point).
    pub fn reconstruct_input(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.vectors.len() {
            return Err(Error::Argument(format!("input {i} out of range")));
        }
        let v = &self.vectors[i];
        let centered: Vec<f64> = v.iter().zip(&self.center).map(|(&a, &c)| a - c).collect();
        let mut out: Vec<f64> = self
            .mean_flat
            .iter()
            .zip(&self.center)
            .map(|(&m, &c)| m + c)
            .collect();
        for u in &self.directions {
            let coeff: f64 = centered.iter().zip(u).map(|(&a, &b)| a * b).sum();
            for (o, &ui) in out.iter_mut().zip(u) {
                *o += coeff * ui;
            }
        }
        Ok(out)
    }
}

/// PCA of the shooting vectors stored in a mean result.
pub fn tangent_pca(mean_result: &MeanResult) -> Result<TangentModel> {
    let m = mean_result.matched.len();
    if m < 2 {
        return Err(Error::Argument("tangent PCA needs at least 2 inputs".into()));
    }
    let mut keys: std::collections::BTreeSet<(usize, usize)> =
        mean_result.mean_data.edges.keys().cloned().collect();
    for data in &mean_result.matched {
        keys.extend(data.edges.keys().cloned());
    }
    let layout = FlattenLayout::new(
        keys.into_iter().collect(),
        mean_result.params.samples,
        mean_result.mean_data.positions.len(),
        &mean_result.params,
    );
    let mean_flat = layout.flatten(&mean_result.mean_data.positions, &mean_result.mean_data.edges);
    let vectors: Vec<Vec<f64>> = mean_result
        .matched
        .iter()
        .map(|data| {
            layout
                .flatten_matched(data, &mean_result.mean_data)
                .iter()
                .zip(&mean_flat)
                .map(|(&a, &b)| a - b)
                .collect()
        })
        .collect();
    let dim = layout.dim();
    let mut center = vec![0.0; dim];
    for v in &vectors {
        for (c, &vi) in center.iter_mut().zip(v) {
            *c += vi;
        }
    }
    for c in center.iter_mut() {
        *c /= m as f64;
    }

    // Centered PCA through the m x m Gram matrix: with m inputs and a huge
    // flattened dimension this is both cheaper and numerically sturdier than
    // a direct SVD of the wide matrix. Right singular vectors are recovered
    // as X^T u / s for the numerically nonzero singular values.
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&center).map(|(&a, &c)| a - c).collect())
        .collect();
    let gram = DMatrix::from_fn(m, m, |i, j| {
        centered[i]
            .iter()
            .zip(&centered[j])
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
    });
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut singular_values: Vec<f64> = order
        .iter()
        .map(|&i| (eig.eigenvalues[i].max(0.0) / m as f64).sqrt())
        .collect();
    let top = singular_values.first().cloned().unwrap_or(0.0);
    let rank = singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * top.max(1e-300))
        .count();
    singular_values.truncate(m);

    let mut directions = Vec::with_capacity(rank);
    for d in 0..rank {
        let col = eig.eigenvectors.column(order[d]);
        let s_raw = (eig.eigenvalues[order[d]].max(0.0)).sqrt();
        let mut dir = vec![0.0f64; dim];
        for (i, row) in centered.iter().enumerate() {
            let coeff = col[i] / s_raw;
            for (o, &x) in dir.iter_mut().zip(row) {
                *o += coeff * x;
            }
        }
        directions.push(dir);
    }

    Ok(TangentModel {
        mean: mean_result.mean.clone(),
        mean_flat,
        center,
        vectors,
        directions,
        singular_values,
        rank,
        layout,
        mean_data: mean_result.mean_data.clone(),
        template_ids: mean_result.template_ids.clone(),
    })
}

/// Materialize the graph at mean + t * sigma_d * (direction d). Edge weights
/// clamp at zero; numerically null edges are dropped.
pub fn pc_deformation(model: &TangentModel, direction: usize, t: f64) -> Result<ShapeGraph> {
    let flat = model.deformation_vector(direction, t)?;
    let data = model.layout.unflatten(&flat, &model.mean_data);
    materialize(&data, &model.template_ids)
}

/// Clustering report over a pairwise distance matrix.
#[derive(Debug, Clone)]
pub struct ClusterReport {
    /// Per-graph cluster id, or None for outliers.
    pub labels: Vec<Option<usize>>,
    /// One representative (medoid) index per cluster.
    pub modes: Vec<usize>,
    pub k: usize,
    /// Mean silhouette of the selected partition.
    pub silhouette: f64,
}

/// Partition a symmetric distance matrix around medoids. The cluster count
/// is chosen by silhouette maximization over k in {2, ..., min(8, m-1)};
/// points whose distance to their medoid exceeds the (1 - outlier_fraction)
/// quantile are flagged as outliers.
pub fn cluster_distances(matrix: &DMatrix<f64>, outlier_fraction: f64) -> Result<ClusterReport> {
    let m = matrix.nrows();
    if m < 3 {
        return Err(Error::Argument("need at least 3 graphs to cluster".into()));
    }
    if matrix.ncols() != m {
        return Err(Error::Argument("distance matrix must be square".into()));
    }
    for i in 0..m {
        if matrix[(i, i)] != 0.0 {
            return Err(Error::Argument("distance matrix diagonal must be zero".into()));
        }
        for j in 0..m {
            let v = matrix[(i, j)];
            if !(v >= 0.0) || (matrix[(j, i)] - v).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::Argument(
                    "distance matrix must be symmetric and nonnegative".into(),
                ));
            }
        }
    }
    if !(0.0..0.5).contains(&outlier_fraction) {
        return Err(Error::Argument(format!(
            "outlier fraction must lie in [0, 0.5), got {outlier_fraction}"
        )));
    }

    let k_max = m.saturating_sub(1).min(8);
    let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>)> = None; // (sil, k, medoids, assign)
    for k in 2..=k_max {
        let (medoids, assign) = k_medoids(matrix, k);
        let sil = mean_silhouette(matrix, &assign, k);
        let better = match &best {
            None => true,
            Some((bs, _, _, _)) => sil > *bs + 1e-12,
        };
        if better {
            best = Some((sil, k, medoids, assign));
        }
    }
    let (silhouette, k, modes, assign) = best.expect("k range is nonempty");

    // outlier flagging by the distance-to-medoid quantile
    let dists: Vec<f64> = (0..m).map(|i| matrix[(i, modes[assign[i]])]).collect();
    let mut sorted = dists.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = (((1.0 - outlier_fraction) * m as f64).ceil() as usize).clamp(1, m);
    let threshold = sorted[rank - 1];
    let labels = (0..m)
        .map(|i| {
            if dists[i] > threshold {
                None
            } else {
                Some(assign[i])
            }
        })
        .collect();

    Ok(ClusterReport {
        labels,
        modes,
        k,
        silhouette,
    })
}

/// Deterministic k-medoids: greedy min-sum seed, farthest-point expansion,
/// then Voronoi iterations (ties resolve to the smaller index).
fn k_medoids(matrix: &DMatrix<f64>, k: usize) -> (Vec<usize>, Vec<usize>) {
    let m = matrix.nrows();
    let mut medoids = Vec::with_capacity(k);
    // seed: point with the smallest distance sum
    let first = (0..m)
        .min_by(|&a, &b| {
            let sa: f64 = (0..m).map(|j| matrix[(a, j)]).sum();
            let sb: f64 = (0..m).map(|j| matrix[(b, j)]).sum();
            sa.total_cmp(&sb).then(a.cmp(&b))
        })
        .unwrap();
    medoids.push(first);
    while medoids.len() < k {
        let next = (0..m)
            .filter(|i| !medoids.contains(i))
            .max_by(|&a, &b| {
                let da = medoids.iter().map(|&c| matrix[(a, c)]).fold(f64::INFINITY, f64::min);
                let db = medoids.iter().map(|&c| matrix[(b, c)]).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        medoids.push(next);
    }
    medoids.sort_unstable();

    let assign_to = |medoids: &[usize]| -> Vec<usize> {
        (0..m)
            .map(|i| {
                let mut best = 0usize;
                for c in 1..medoids.len() {
                    if matrix[(i, medoids[c])] < matrix[(i, medoids[best])] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    };

    let mut assign = assign_to(&medoids);
    for _ in 0..50 {
        let mut new_medoids = medoids.clone();
        for c in 0..k {
            let members: Vec<usize> = (0..m).filter(|&i| assign[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let best = members
                .iter()
                .cloned()
                .min_by(|&a, &b| {
                    let sa: f64 = members.iter().map(|&j| matrix[(a, j)]).sum();
                    let sb: f64 = members.iter().map(|&j| matrix[(b, j)]).sum();
                    sa.total_cmp(&sb).then(a.cmp(&b))
                })
                .unwrap();
            new_medoids[c] = best;
        }
        new_medoids.sort_unstable();
        let new_assign = assign_to(&new_medoids);
        if new_medoids == medoids && new_assign == assign {
            break;
        }
        medoids = new_medoids;
        assign = new_assign;
    }
    (medoids, assign)
}

fn mean_silhouette(matrix: &DMatrix<f64>, assign: &[usize], k: usize) -> f64 {
    let m = assign.len();
    let mut total = 0.0;
    for i in 0..m {
        let own = assign[i];
        let own_members: Vec<usize> = (0..m).filter(|&j| j != i && assign[j] == own).collect();
        if own_members.is_empty() {
            continue; // singleton: silhouette 0 by convention
        }
        let a: f64 =
            own_members.iter().map(|&j| matrix[(i, j)]).sum::<f64>() / own_members.len() as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c == own {
                continue;
            }
            let members: Vec<usize> = (0..m).filter(|&j| assign[j] == c).collect();
            if members.is_empty() {
                continue;
            }
            let d: f64 =
                members.iter().map(|&j| matrix[(i, j)]).sum::<f64>() / members.len() as f64;
            b = b.min(d);
        }
        if b.is_finite() {
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    total / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{self, Perturbation};

    fn population(template_seed: u64, count: usize, n: usize) -> Vec<ShapeGraph> {
        let template = synthetic::random_graph(n, template_seed);
        (0..count)
            .map(|i| {
                let p = Perturbation {
                    stretch: 0.2,
                    delete_nodes: 0,
                    delete_edges: 0,
                    reorder: true,
                };
                synthetic::perturb_graph(&template, p, template_seed * 1000 + i as u64).0
            })
            .collect()
    }

    #[test]
    fn pairwise_matrix_shape_and_duplicates() {
        let g = synthetic::random_graph(5, 1);
        let h = synthetic::random_graph(5, 2);
        let params = MatchParams::default();
        let d = pairwise_distances(&[g.clone(), h, g.clone()], &params).unwrap();
        assert_eq!(d.nrows(), 3);
        assert!(d[(0, 2)] < 1e-6, "duplicates should be ~0 apart: {}", d[(0, 2)]);
        for i in 0..3 {
            assert_eq!(d[(i, i)], 0.0);
            for j in 0..3 {
                assert!(d[(i, j)] >= 0.0);
                assert_eq!(d[(i, j)], d[(j, i)]);
            }
        }
        assert!(pairwise_distances(&[g], &params).is_err());
    }

    #[test]
    fn mean_of_identical_inputs_is_the_input() {
        let g = synthetic::random_graph(6, 9);
        let params = MatchParams::default();
        let inputs = vec![g.clone(), g.clone(), g.clone()];
        let res = karcher_mean_graphs(&inputs, 1e-6, 10, MeanInit::Largest, &params).unwrap();
        assert!(res.objective_trace[0] < 1e-9);
        assert!(*res.objective_trace.last().unwrap() < 1e-9);
        assert_eq!(res.mean.node_count(), g.node_count());
        let reg = crate::matching::register_pair(&res.mean, &g, &params).unwrap();
        assert!(reg.d_graph < 1e-6);
    }

    #[test]
    fn mean_of_single_graph_is_that_graph() {
        let g = synthetic::random_graph(5, 4);
        let params = MatchParams::default();
        let res = karcher_mean_graphs(
            std::slice::from_ref(&g),
            1e-6,
            5,
            MeanInit::Largest,
            &params,
        )
        .unwrap();
        let reg = crate::matching::register_pair(&res.mean, &g, &params).unwrap();
        assert!(reg.d_graph < 1e-6);
    }

    #[test]
    fn mean_objective_trace_is_non_increasing_and_improves() {
        let graphs = population(3, 5, 6);
        let params = MatchParams::default();
        let res = karcher_mean_graphs(&graphs, 1e-4, 8, MeanInit::Largest, &params).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-12, "trace increased: {w:?}");
        }
        assert!(
            *res.objective_trace.last().unwrap() < res.objective_trace[0],
            "no improvement over initialization: {:?}",
            res.objective_trace
        );
    }

    #[test]
    fn tpca_identical_inputs_all_zero() {
        let g = synthetic::random_graph(5, 11);
        let params = MatchParams::default();
        let res = karcher_mean_graphs(
            &[g.clone(), g.clone(), g.clone()],
            1e-6,
            5,
            MeanInit::Largest,
            &params,
        )
        .unwrap();
        let model = tangent_pca(&res).unwrap();
        assert!(model.singular_values.iter().all(|&s| s < 1e-9));
        assert_eq!(model.rank, 0);
    }

    #[test]
    fn tpca_two_inputs_one_component_and_exact_reconstruction() {
        let graphs = population(17, 2, 5);
        let params = MatchParams::default();
        let res = karcher_mean_graphs(&graphs, 1e-8, 12, MeanInit::Largest, &params).unwrap();
        let model = tangent_pca(&res).unwrap();
        assert_eq!(model.rank, 1, "singular values: {:?}", model.singular_values);
        let scale = model.singular_values[0].max(1.0);
        // reconstruction of each input from all components
        for i in 0..2 {
            let rec = model.reconstruct_input(i).unwrap();
            let truth: Vec<f64> = model
                .mean_flat
                .iter()
                .zip(&model.vectors[i])
                .map(|(&m, &v)| m + v)
                .collect();
            let err = rec
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-9 * scale, "reconstruction error {err}");
        }
        // variance identity
        let var: f64 = model
            .vectors
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&model.center)
                    .map(|(&a, &c)| (a - c) * (a - c))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / 2.0;
        let ssq: f64 = model.singular_values.iter().map(|s| s * s).sum();
        assert!(
            (var - ssq).abs() <= 1e-9 * var.max(1.0),
            "var {var} vs sum of squared singular values {ssq}; values {:?}",
            model.singular_values
        );
    }

    #[test]
    fn deformation_at_zero_is_the_mean_exactly() {
        let graphs = population(23, 3, 5);
        let params = MatchParams::default();
        let res = karcher_mean_graphs(&graphs, 1e-6, 6, MeanInit::Largest, &params).unwrap();
        let model = tangent_pca(&res).unwrap();
        assert!(model.rank >= 1);
        let v0 = model.deformation_vector(0, 0.0).unwrap();
        assert_eq!(v0, model.mean_flat);
        // +t and -t are symmetric about the mean
        let plus = model.deformation_vector(0, 1.0).unwrap();
        let minus = model.deformation_vector(0, -1.0).unwrap();
        for ((p, m), c) in plus.iter().zip(&minus).zip(&model.mean_flat) {
            assert!((0.5 * (p + m) - c).abs() < 1e-12);
        }
        // out-of-range directions are rejected
        assert!(pc_deformation(&model, model.rank, 1.0).is_err());
        // materialization works
        let g = pc_deformation(&model, 0, 1.0).unwrap();
        assert_eq!(g.node_count(), res.mean.node_count());
    }

    #[test]
    fn clustering_two_duplicate_groups() {
        // two well-separated duplicate groups: zero within-group distances
        let mut mat = DMatrix::zeros(6, 6);
        for i in 0..3 {
            for j in 3..6 {
                mat[(i, j)] = 5.0;
                mat[(j, i)] = 5.0;
            }
        }
        let rep = cluster_distances(&mat, 0.0).unwrap();
        assert_eq!(rep.k, 2);
        let first = rep.labels[0].unwrap();
        for i in 0..3 {
            assert_eq!(rep.labels[i], Some(first));
        }
        for i in 3..6 {
            assert!(rep.labels[i].is_some() && rep.labels[i] != Some(first));
        }
        assert!(rep.modes.len() == 2);
    }

    #[test]
    fn clustering_all_equal_is_deterministic() {
        let m = 5;
        let mat = DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 2.0 });
        let a = cluster_distances(&mat, 0.0).unwrap();
        let b = cluster_distances(&mat, 0.0).unwrap();
        assert_eq!(a.k, 2);
        assert_eq!(a.labels, b.labels);
        assert!(a.silhouette.abs() < 0.5, "silhouette ~ 0, got {}", a.silhouette);
    }

    #[test]
    fn clustering_is_scale_invariant() {
        let mut mat = DMatrix::zeros(7, 7);
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    let d = if (i < 4) == (j < 4) { 1.0 } else { 9.0 };
                    mat[(i, j)] = d + 0.01 * (i + j) as f64;
                }
            }
        }
        // symmetrize the perturbation
        let mat = DMatrix::from_fn(7, 7, |i, j| 0.5 * (mat[(i, j)] + mat[(j, i)]));
        let base = cluster_distances(&mat, 0.1).unwrap();
        let scaled = cluster_distances(&(mat * 37.0), 0.1).unwrap();
        assert_eq!(base.labels, scaled.labels);
        assert_eq!(base.modes, scaled.modes);
        assert_eq!(base.k, scaled.k);
    }

    #[test]
    fn clustering_rejects_small_or_invalid_input() {
        let mat = DMatrix::zeros(2, 2);
        assert!(cluster_distances(&mat, 0.0).is_err());
        let mut bad = DMatrix::zeros(4, 4);
        bad[(0, 1)] = 1.0; // asymmetric
        assert!(cluster_distances(&bad, 0.0).is_err());
        let ok = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 });
        assert!(cluster_distances(&ok, 0.6).is_err());
    }
}
