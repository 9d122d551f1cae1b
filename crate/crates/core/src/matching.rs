//! Shape-graph registration: affinity matrix construction, the graph
//! distance at a fixed node matching, and the end-to-end registration
//! pipeline (weights, padding, affinity, QAP solve, distance).

use crate::curve::{d_srv, resample, to_srvf, SrvCurve};
use crate::error::{Error, Result};
use crate::graph::{assign_weights, pad_nulls, ShapeGraph, WeightPolicy};
use crate::qap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Parameters shared by every matching-related operation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatchParams {
    /// Balance between edge (lambda) and node (1-lambda) terms.
    pub lambda: f64,
    /// Weight-difference scale in the edge metric.
    pub eta: f64,
    /// Real-to-null node dissimilarity factor (the cost is e times the mean
    /// inter-node distance).
    pub e: f64,
    /// Common per-curve sample count.
    pub samples: usize,
    /// Seed for every stochastic element (node-pair sampling, solver
    /// restarts).
    pub seed: u64,
    /// Edge weight policy applied before matching.
    pub weight_policy: WeightPolicy,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            lambda: 0.5,
            eta: 1.0,
            e: 0.7,
            samples: 30,
            seed: 0,
            weight_policy: WeightPolicy::Length,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Argument(format!(
                "lambda must lie in [0,1], got {}",
                self.lambda
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Argument(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.e > 0.0) {
            return Err(Error::Argument(format!("e must be positive, got {}", self.e)));
        }
        if self.samples < 2 {
            return Err(Error::Argument("samples must be >= 2".into()));
        }
        Ok(())
    }
}

/// A real edge prepared for matching: canonical (low index -> high index)
/// orientation plus the SRV transforms of both orientations.
#[derive(Debug, Clone)]
pub(crate) struct EdgeHandle {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub fwd: SrvCurve,
    pub rev: SrvCurve,
}

/// Everything derived from a padded graph pair that registration needs:
/// resampled edge SRVFs, the edge-pair distance tables (both relative
/// orientations), the node divergence table and its normalizers.
pub(crate) struct MatchContext {
    pub g0: ShapeGraph,
    pub g1: ShapeGraph,
    pub params: MatchParams,
    pub n: usize,
    pub edges0: Vec<EdgeHandle>,
    pub edges1: Vec<EdgeHandle>,
    pub lookup1: BTreeMap<(usize, usize), usize>,
    /// d_eta for (edge0 fwd, edge1 fwd), row-major m0 x m1.
    pub d_par: Vec<f64>,
    /// d_eta for (edge0 fwd, edge1 reversed).
    pub d_cross: Vec<f64>,
    pub max_edge_d: f64,
    /// Estimated mean distance between real nodes of the two graphs.
    pub mean_node_dist: f64,
    /// Extended node divergence D, row-major n x n.
    pub node_div: Vec<f64>,
    pub max_node_div: f64,
}

fn edge_handles(g: &ShapeGraph, samples: usize) -> Result<Vec<EdgeHandle>> {
    let mut out = Vec::new();
    for (&(u, v), e) in g.edges() {
        if u == v {
            return Err(Error::Data(format!(
                "self-loop at `{}`; matching requires simple graphs",
                g.nodes()[u].id
            )));
        }
        if e.weight <= 0.0 {
            continue; // quotient-null, same as no edge
        }
        let rc = resample(&e.curve, samples)?;
        out.push(EdgeHandle {
            u,
            v,
            weight: e.weight,
            fwd: to_srvf(&rc),
            rev: to_srvf(&rc.reversed()),
        });
    }
    Ok(out)
}

fn d_eta_raw(ds: f64, w0: f64, w1: f64, eta: f64) -> f64 {
    (ds + eta * (w0 - w1).abs()).min(eta * (w0 + w1))
}

impl MatchContext {
    /// Build from graphs that are already padded to a common node count and
    /// carry their final weights.
    pub fn from_padded(g0: &ShapeGraph, g1: &ShapeGraph, params: MatchParams) -> Result<Self> {
        params.validate()?;
        if g0.node_count() != g1.node_count() {
            return Err(Error::Argument(format!(
                "padded node counts differ: {} vs {}",
                g0.node_count(),
                g1.node_count()
            )));
        }
        let n = g0.node_count();
        let edges0 = edge_handles(g0, params.samples)?;
        let edges1 = edge_handles(g1, params.samples)?;
        let lookup1: BTreeMap<(usize, usize), usize> = edges1
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.u, e.v), i))
            .collect();

        let eta = params.eta;
        let m1 = edges1.len();
        let pairs: Vec<(usize, usize)> = (0..edges0.len())
            .flat_map(|i| (0..m1).map(move |j| (i, j)))
            .collect();
        let tables: Vec<(f64, f64)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let a = &edges0[i];
                let b = &edges1[j];
                let par = d_eta_raw(d_srv(&a.fwd, &b.fwd), a.weight, b.weight, eta);
                let cross = d_eta_raw(d_srv(&a.fwd, &b.rev), a.weight, b.weight, eta);
                (par, cross)
            })
            .collect();
        let mut d_par = vec![0.0; pairs.len()];
        let mut d_cross = vec![0.0; pairs.len()];
        for (k, &(p, c)) in tables.iter().enumerate() {
            d_par[k] = p;
            d_cross[k] = c;
        }
        let max_edge_d = d_par
            .iter()
            .chain(d_cross.iter())
            .fold(0.0f64, |m, &v| m.max(v));

        let real0: Vec<usize> = (0..n).filter(|&i| !g0.nodes()[i].is_null()).collect();
        let real1: Vec<usize> = (0..n).filter(|&i| !g1.nodes()[i].is_null()).collect();
        let mean_node_dist = estimate_mean_node_dist(g0, g1, &real0, &real1, params.seed);

        let e_cost = params.e * mean_node_dist;
        let mut node_div = vec![0.0; n * n];
        let mut max_node_div = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = match (g0.nodes()[i].position, g1.nodes()[j].position) {
                    (Some(p), Some(q)) => p.distance(q),
                    (None, None) => 0.0,
                    _ => e_cost,
                };
                node_div[i * n + j] = d;
                max_node_div = max_node_div.max(d);
            }
        }

        Ok(MatchContext {
            g0: g0.clone(),
            g1: g1.clone(),
            params,
            n,
            edges0,
            edges1,
            lookup1,
            d_par,
            d_cross,
            max_edge_d,
            mean_node_dist,
            node_div,
            max_node_div,
        })
    }

    fn pair_d(&self, e0: usize, e1: usize, parallel: bool) -> f64 {
        let k = e0 * self.edges1.len() + e1;
        if parallel {
            self.d_par[k]
        } else {
            self.d_cross[k]
        }
    }

    /// Graph distance at a fixed matching sigma (g0 index -> g1 index):
    /// sqrt(lambda * edge term + (1-lambda) * node term), summing edge
    /// contributions over ordered node pairs (each unordered pair twice).
    pub fn d_graph(&self, sigma: &[usize]) -> Result<f64> {
        let n = self.n;
        if sigma.len() != n {
            return Err(Error::Argument("sigma length must equal node count".into()));
        }
        let mut seen = vec![false; n];
        for &s in sigma {
            if s >= n || seen[s] {
                return Err(Error::Argument("sigma must be a bijection".into()));
            }
            seen[s] = true;
        }

        let eta = self.params.eta;
        let mut edge_sq = 0.0;
        let mut matched1 = vec![false; self.edges1.len()];
        for (i0, e0) in self.edges0.iter().enumerate() {
            let (ju, jv) = (sigma[e0.u], sigma[e0.v]);
            let key = if ju <= jv { (ju, jv) } else { (jv, ju) };
            if let Some(&i1) = self.lookup1.get(&key) {
                matched1[i1] = true;
                let parallel = ju < jv;
                let d = self.pair_d(i0, i1, parallel);
                edge_sq += 2.0 * d * d;
            } else {
                let d = eta * e0.weight;
                edge_sq += 2.0 * d * d;
            }
        }
        for (i1, e1) in self.edges1.iter().enumerate() {
            if !matched1[i1] {
                let d = eta * e1.weight;
                edge_sq += 2.0 * d * d;
            }
        }

        let mut node_sq = 0.0;
        for (i, &j) in sigma.iter().enumerate() {
            let d = self.node_div[i * n + j];
            node_sq += d * d;
        }

        let lambda = self.params.lambda;
        Ok((lambda * edge_sq + (1.0 - lambda) * node_sq).max(0.0).sqrt())
    }

    /// Normalized affinity matrix for the QAP formulation.
    pub fn affinity(&self) -> AffinityMatrix {
        let n = self.n;
        let lambda = self.params.lambda;
        let e_cost = self.params.e * self.mean_node_dist;
        let max_d = self.max_node_div;
        let mut node_aff = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let aff = match (self.g0.nodes()[i].position, self.g1.nodes()[j].position) {
                    (None, None) => 1.0 - lambda,
                    (Some(_), Some(_)) => {
                        let d = self.node_div[i * n + j];
                        if max_d > 0.0 {
                            (1.0 - lambda) * (1.0 - d / max_d)
                        } else {
                            1.0 - lambda
                        }
                    }
                    _ => {
                        if max_d > 0.0 {
                            (1.0 - lambda) * (1.0 - e_cost / max_d)
                        } else {
                            1.0 - lambda
                        }
                    }
                };
                node_aff[i * n + j] = aff;
            }
        }
        let norm = |d: f64| {
            if self.max_edge_d > 0.0 {
                lambda * (1.0 - d / self.max_edge_d)
            } else {
                lambda
            }
        };
        AffinityMatrix {
            n,
            lambda,
            eta: self.params.eta,
            node_aff,
            edges0: self.edges0.iter().map(|e| (e.u, e.v)).collect(),
            edges1: self.edges1.iter().map(|e| (e.u, e.v)).collect(),
            lookup1: self.lookup1.clone(),
            pair_par: self.d_par.iter().map(|&d| norm(d)).collect(),
            pair_cross: self.d_cross.iter().map(|&d| norm(d)).collect(),
            max_edge_d: self.max_edge_d,
        }
    }
}

fn estimate_mean_node_dist(
    g0: &ShapeGraph,
    g1: &ShapeGraph,
    real0: &[usize],
    real1: &[usize],
    seed: u64,
) -> f64 {
    if real0.is_empty() || real1.is_empty() {
        return 0.0;
    }
    let n_pairs = real0.len() * real1.len();
    const EXACT_LIMIT: usize = 10_000;
    if n_pairs <= EXACT_LIMIT {
        let mut acc = 0.0;
        for &i in real0 {
            let p = g0.nodes()[i].position.unwrap();
            for &j in real1 {
                acc += p.distance(g1.nodes()[j].position.unwrap());
            }
        }
        acc / n_pairs as f64
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = 0.0;
        for _ in 0..EXACT_LIMIT {
            let i = real0[rng.gen_range(0..real0.len())];
            let j = real1[rng.gen_range(0..real1.len())];
            acc += g0.nodes()[i]
                .position
                .unwrap()
                .distance(g1.nodes()[j].position.unwrap());
        }
        acc / EXACT_LIMIT as f64
    }
}

/// Sparse n^2 x n^2 affinity matrix. Diagonal entries hold node affinities
/// for every node pair; off-diagonal entries exist only where both graphs
/// carry a real edge and encode the normalized edge-shape affinity, once per
/// relative orientation of the matched edge pair.
pub struct AffinityMatrix {
    pub(crate) n: usize,
    pub(crate) lambda: f64,
    pub(crate) eta: f64,
    pub(crate) node_aff: Vec<f64>,
    pub(crate) edges0: Vec<(usize, usize)>,
    pub(crate) edges1: Vec<(usize, usize)>,
    pub(crate) lookup1: BTreeMap<(usize, usize), usize>,
    pub(crate) pair_par: Vec<f64>,
    pub(crate) pair_cross: Vec<f64>,
    pub(crate) max_edge_d: f64,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn max_edge_distance(&self) -> f64 {
        self.max_edge_d
    }

    /// Diagonal entry k_{aj,aj}: affinity of matching node a to node j.
    pub fn node_affinity(&self, a: usize, j: usize) -> f64 {
        self.node_aff[a * self.n + j]
    }

    /// Off-diagonal entry k_{aj,bk}. Zero unless (a,b) is a real edge of the
    /// first graph and (j,k) a real edge of the second.
    pub fn edge_affinity(&self, a: usize, j: usize, b: usize, k: usize) -> f64 {
        if a == b || j == k {
            return 0.0;
        }
        let key0 = if a < b { (a, b) } else { (b, a) };
        let key1 = if j < k { (j, k) } else { (k, j) };
        let e0 = match self.edges0.iter().position(|&e| e == key0) {
            Some(i) => i,
            None => return 0.0,
        };
        let e1 = match self.lookup1.get(&key1) {
            Some(&i) => i,
            None => return 0.0,
        };
        // parallel when the low ends match up
        let parallel = (a < b) == (j < k);
        let idx = e0 * self.edges1.len() + e1;
        if parallel {
            self.pair_par[idx]
        } else {
            self.pair_cross[idx]
        }
    }

    /// Quadratic-form value vec(P)^T K vec(P) of a permutation.
    pub fn objective(&self, sigma: &[usize]) -> f64 {
        let n = self.n;
        debug_assert_eq!(sigma.len(), n);
        let mut total = 0.0;
        for (a, &j) in sigma.iter().enumerate() {
            total += self.node_aff[a * n + j];
        }
        for (e0, &(u, v)) in self.edges0.iter().enumerate() {
            let (ju, jv) = (sigma[u], sigma[v]);
            let key = if ju <= jv { (ju, jv) } else { (jv, ju) };
            if let Some(&e1) = self.lookup1.get(&key) {
                let parallel = ju < jv;
                let idx = e0 * self.edges1.len() + e1;
                let k = if parallel {
                    self.pair_par[idx]
                } else {
                    self.pair_cross[idx]
                };
                total += 2.0 * k;
            }
        }
        total
    }

    /// Sparse symmetric representation (row, col, value) including the
    /// diagonal, for power iteration and gradient evaluation.
    pub(crate) fn csr(&self) -> SparseSym {
        let n = self.n;
        let m1 = self.edges1.len();
        let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(4 * self.edges0.len() * m1);
        for (e0, &(u, v)) in self.edges0.iter().enumerate() {
            for (e1, &(j, k)) in self.edges1.iter().enumerate() {
                let par = self.pair_par[e0 * m1 + e1];
                let cross = self.pair_cross[e0 * m1 + e1];
                // (u->j, v->k) and (v->k, u->j): parallel orientation
                triplets.push(((u * n + j) as u32, (v * n + k) as u32, par));
                triplets.push(((v * n + k) as u32, (u * n + j) as u32, par));
                // (u->k, v->j) and (v->j, u->k): crossed orientation
                triplets.push(((u * n + k) as u32, (v * n + j) as u32, cross));
                triplets.push(((v * n + j) as u32, (u * n + k) as u32, cross));
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let dim = n * n;
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        for &(r, c, v) in &triplets {
            row_ptr[r as usize + 1] += 1;
            cols.push(c as usize);
            vals.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym {
            dim,
            row_ptr,
            cols,
            vals,
            diag: self.node_aff.clone(),
        }
    }
}

/// Symmetric sparse matrix with an explicit dense diagonal.
pub(crate) struct SparseSym {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub diag: Vec<f64>,
}

impl SparseSym {
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.dim {
            let mut acc = self.diag[r] * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[r] = acc;
        }
    }

    /// Gershgorin upper bound on the largest eigenvalue magnitude.
    pub fn gershgorin(&self) -> f64 {
        let mut best = 0.0f64;
        for r in 0..self.dim {
            let mut acc = self.diag[r].abs();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k].abs();
            }
            best = best.max(acc);
        }
        best.max(1e-12)
    }
}

/// Build the affinity matrix for a padded, weighted graph pair.
pub fn build_affinity(
    g0: &ShapeGraph,
    g1: &ShapeGraph,
    params: &MatchParams,
) -> Result<AffinityMatrix> {
    Ok(MatchContext::from_padded(g0, g1, *params)?.affinity())
}

/// Graph distance between padded graphs at a fixed node matching.
pub fn d_graph(
    g0: &ShapeGraph,
    g1: &ShapeGraph,
    sigma: &[usize],
    params: &MatchParams,
) -> Result<f64> {
    MatchContext::from_padded(g0, g1, *params)?.d_graph(sigma)
}

/// The result of registering one shape graph against another.
#[derive(Debug, Clone)]
pub struct Registration {
    /// Node matching: padded index of the first graph -> padded index of the
    /// second.
    pub permutation: Vec<usize>,
    /// Value of the affinity quadratic form at the matching.
    pub affinity_objective: f64,
    /// Graph distance evaluated at the matching (an upper bound for the true
    /// minimum over matchings).
    pub d_graph: f64,
}

/// Registration plus the padded inputs it refers to.
pub struct PairRegistration {
    pub registration: Registration,
    pub padded0: ShapeGraph,
    pub padded1: ShapeGraph,
    pub params: MatchParams,
}

/// Pad and register a pair whose weights are already final (used where the
/// stored weights are data, e.g. the fractional weights of an iterated mean).
pub(crate) fn register_padded_pair(
    g0: &ShapeGraph,
    g1: &ShapeGraph,
    params: &MatchParams,
) -> Result<PairRegistration> {
    params.validate()?;
    let (p0, p1) = pad_nulls(g0, g1);
    let ctx = MatchContext::from_padded(&p0, &p1, *params)?;
    let k = ctx.affinity();
    let assignment = qap::qap_solve(&k, params.seed);
    let d = ctx.d_graph(&assignment.permutation)?;
    Ok(PairRegistration {
        registration: Registration {
            permutation: assignment.permutation,
            affinity_objective: assignment.objective,
            d_graph: d,
        },
        padded0: p0,
        padded1: p1,
        params: *params,
    })
}

/// End-to-end registration: weight assignment, null padding, affinity
/// construction, approximate QAP solve, distance evaluation.
pub fn register_pair_detailed(
    g0: &ShapeGraph,
    g1: &ShapeGraph,
    params: &MatchParams,
) -> Result<PairRegistration> {
    params.validate()?;
    let w0 = assign_weights(g0, params.weight_policy);
    let w1 = assign_weights(g1, params.weight_policy);
    register_padded_pair(&w0, &w1, params)
}

/// See [`register_pair_detailed`]; this keeps only the registration.
pub fn register_pair(g0: &ShapeGraph, g1: &ShapeGraph, params: &MatchParams) -> Result<Registration> {
    Ok(register_pair_detailed(g0, g1, params)?.registration)
}

/// Serializable record of a registration run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationRecord {
    pub permutation: BTreeMap<String, String>,
    pub d_graph: f64,
    pub objective: f64,
    pub lambda: f64,
    pub eta: f64,
    pub e: f64,
    pub samples: usize,
    pub seed: u64,
    pub weight_policy: WeightPolicy,
}

impl RegistrationRecord {
    pub fn new(pair: &PairRegistration) -> Self {
        let permutation = pair
            .registration
            .permutation
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                (
                    pair.padded0.nodes()[i].id.clone(),
                    pair.padded1.nodes()[j].id.clone(),
                )
            })
            .collect();
        RegistrationRecord {
            permutation,
            d_graph: pair.registration.d_graph,
            objective: pair.registration.affinity_objective,
            lambda: pair.params.lambda,
            eta: pair.params.eta,
            e: pair.params.e,
            samples: pair.params.samples,
            seed: pair.params.seed,
            weight_policy: pair.params.weight_policy,
        }
    }
}

#[cfg(test)]
pub(crate) fn seg_graph(points: &[(f64, f64)], links: &[(usize, usize)]) -> ShapeGraph {
    use crate::curve::PlanarCurve;
    use crate::geom::Point;
    use crate::graph::{Edge, Node};
    let nodes: Vec<Node> = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Node::real(format!("n{i}"), Point::new(x, y)))
        .collect();
    let edges = links
        .iter()
        .map(|&(u, v)| {
            let a = nodes[u].position.unwrap();
            let b = nodes[v].position.unwrap();
            (
                (u, v),
                Edge {
                    curve: PlanarCurve::new(vec![a, a.lerp(b, 0.5), b]).unwrap(),
                    weight: 1.0,
                },
            )
        })
        .collect();
    ShapeGraph::new(nodes, edges).unwrap()
}
