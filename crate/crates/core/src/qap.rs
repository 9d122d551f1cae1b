//! Quadratic assignment over the affinity matrix: an exact enumeration
//! oracle for small instances and a two-stage approximate solver (spectral
//! relaxation rounded by linear assignment, then doubly-stochastic
//! conditional-gradient ascent along a concave-to-convex path, rounding every
//! step and keeping the best feasible objective, finished with a pairwise
//! swap polish).

use crate::error::{Error, Result};
use crate::matching::AffinityMatrix;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A feasible QAP solution: a permutation and its quadratic-form value.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub objective: f64,
}

const QAP_EXACT_LIMIT: usize = 8;

/// Globally optimal assignment by lexicographic enumeration of all n!
/// permutations. Ties keep the lexicographically first optimum.
pub fn qap_exact(k: &AffinityMatrix) -> Result<Assignment> {
    let n = k.n();
    if n > QAP_EXACT_LIMIT {
        return Err(Error::Size(format!(
            "exact QAP enumerates n! permutations; n = {n} > {QAP_EXACT_LIMIT} (use qap_solve)"
        )));
    }
    if n == 0 {
        return Ok(Assignment { permutation: vec![], objective: 0.0 });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = Assignment {
        permutation: perm.clone(),
        objective: k.objective(&perm),
    };
    while next_permutation(&mut perm) {
        let obj = k.objective(&perm);
        if obj > best.objective {
            best = Assignment {
                permutation: perm.clone(),
                objective: obj,
            };
        }
    }
    Ok(best)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Maximum-score linear assignment (row -> column) on an n x n score matrix,
/// by the Jonker-Volgenant shortest augmenting path scheme in O(n^3).
pub fn assignment_max(score: &[f64], n: usize) -> Vec<usize> {
    // convert to min-cost
    let top = score.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cost: Vec<f64> = score.iter().map(|&s| top - s).collect();
    assignment_min(&cost, n)
}

fn assignment_min(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row assigned to column j (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            sigma[p[j] - 1] = j - 1;
        }
    }
    sigma
}

fn power_iteration(k: &AffinityMatrix) -> Vec<f64> {
    let csr = k.csr();
    let dim = csr.dim;
    let mut x = vec![1.0 / dim as f64; dim];
    let mut y = vec![0.0; dim];
    for _ in 0..150 {
        csr.mul(&x, &mut y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-300 {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    x
}

/// Approximate QAP solver. Deterministic for a fixed seed; the returned
/// objective is always at least the spectral-relaxation-with-rounding
/// baseline because that candidate is kept in the pool.
pub fn qap_solve(k: &AffinityMatrix, seed: u64) -> Assignment {
    let n = k.n();
    if n == 0 {
        return Assignment { permutation: vec![], objective: 0.0 };
    }
    if n == 1 {
        return Assignment { permutation: vec![0], objective: k.objective(&[0]) };
    }

    let mut best: Option<Assignment> = None;
    let consider = |sigma: Vec<usize>, k: &AffinityMatrix, best: &mut Option<Assignment>| {
        let obj = k.objective(&sigma);
        if best.as_ref().map_or(true, |b| obj > b.objective) {
            *best = Some(Assignment { permutation: sigma, objective: obj });
        }
    };

    // stage 1: spectral relaxation, rounded by linear assignment
    let spectral = power_iteration(k);
    let sigma_spec = assignment_max(&spectral, n);
    consider(sigma_spec.clone(), k, &mut best);

    // stage 2: conditional-gradient ascent on the doubly-stochastic
    // relaxation, with a path parameter taking the surrogate from concave
    // (interior optimum) to the raw quadratic (vertex optimum)
    let csr = k.csr();
    let mu = csr.gershgorin();
    let restarts = if n <= 12 {
        6
    } else if n <= 40 {
        4
    } else {
        2
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = n * n;
    let path: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();

    for restart in 0..restarts {
        let mut x = vec![1.0 / n as f64; dim];
        match restart {
            0 => {}
            1 => {
                for (a, &j) in sigma_spec.iter().enumerate() {
                    x[a * n + j] = 0.5 + 0.5 / n as f64;
                }
                for (i, xv) in x.iter_mut().enumerate() {
                    if *xv < 0.5 {
                        *xv = 0.5 / n as f64;
                        let _ = i;
                    }
                }
            }
            _ => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                for xv in x.iter_mut() {
                    *xv = 0.5 / n as f64;
                }
                for (a, &j) in perm.iter().enumerate() {
                    x[a * n + j] += 0.5;
                }
            }
        }

        let mut kx = vec![0.0; dim];
        for &alpha in &path {
            let shift = (alpha - 1.0) * mu;
            for _ in 0..25 {
                csr.mul(&x, &mut kx);
                // gradient of x'Kx + shift*x'x
                let grad: Vec<f64> = kx
                    .iter()
                    .zip(&x)
                    .map(|(&kxi, &xi)| 2.0 * (kxi + shift * xi))
                    .collect();
                let sigma = assignment_max(&grad, n);
                let mut s = vec![0.0; dim];
                for (a, &j) in sigma.iter().enumerate() {
                    s[a * n + j] = 1.0;
                }
                consider(sigma, k, &mut best);

                // line search on x + g*(s - x) for the surrogate objective
                let d: Vec<f64> = s.iter().zip(&x).map(|(&si, &xi)| si - xi).collect();
                let grad_dot_d: f64 = grad.iter().zip(&d).map(|(&g, &di)| g * di).sum();
                if grad_dot_d <= 1e-12 {
                    break;
                }
                let mut kd = vec![0.0; dim];
                csr.mul(&d, &mut kd);
                let quad: f64 = d.iter().zip(&kd).map(|(&di, &kdi)| di * kdi).sum::<f64>()
                    + shift * d.iter().map(|&di| di * di).sum::<f64>();
                let step = if quad < 0.0 {
                    (-0.5 * grad_dot_d / quad).min(1.0)
                } else {
                    1.0
                };
                for (xi, &di) in x.iter_mut().zip(&d) {
                    *xi += step * di;
                }
                if step >= 1.0 - 1e-12 && quad >= 0.0 {
                    // landed on a vertex and the surrogate is convex along
                    // the segment: further iterations cannot move
                    break;
                }
            }
            // round the current interior point as well
            let sigma = assignment_max(&x, n);
            consider(sigma, k, &mut best);
        }
    }

    let mut best = best.expect("at least one candidate");

    // pairwise-swap polish on the best candidate
    let mut improved = true;
    let mut passes = 0;
    while improved && passes < 8 {
        improved = false;
        passes += 1;
        for a in 0..n {
            for b in a + 1..n {
                best.permutation.swap(a, b);
                let obj = k.objective(&best.permutation);
                if obj > best.objective + 1e-15 {
                    best.objective = obj;
                    improved = true;
                } else {
                    best.permutation.swap(a, b);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assign_weights, pad_nulls, WeightPolicy};
    use crate::matching::{build_affinity, seg_graph, MatchParams};
    use crate::synthetic;

    #[test]
    fn assignment_max_picks_best_matching() {
        // rows x cols score
        let score = [1.0, 9.0, 3.0, 2.0, 5.0, 8.0, 7.0, 4.0, 6.0];
        let sigma = assignment_max(&score, 3);
        // optimal: r0->c1 (9), r1->c2 (8), r2->c0 (7)
        assert_eq!(sigma, vec![1, 2, 0]);
    }

    #[test]
    fn exact_identity_on_identical_graphs() {
        let g = seg_graph(&[(0.0, 0.0), (1.0, 0.0), (0.4, 1.0)], &[(0, 1), (1, 2)]);
        let params = MatchParams::default();
        let w = assign_weights(&g, params.weight_policy);
        let (p0, p1) = pad_nulls(&w, &w);
        let k = build_affinity(&p0, &p1, &params).unwrap();
        let best = qap_exact(&k).unwrap();
        let n = p0.node_count();
        // identity on the real block (padding nulls are interchangeable)
        for i in 0..3 {
            assert_eq!(best.permutation[i], i);
        }
        let identity: Vec<usize> = (0..n).collect();
        assert!((best.objective - k.objective(&identity)).abs() < 1e-12);
    }

    #[test]
    fn exact_trace_on_edgeless_graphs() {
        let g = seg_graph(&[(0.0, 0.0), (2.0, 0.0)], &[]);
        let params = MatchParams::default();
        let (p0, p1) = pad_nulls(&g, &g);
        let k = build_affinity(&p0, &p1, &params).unwrap();
        let best = qap_exact(&k).unwrap();
        let trace: f64 = (0..p0.node_count())
            .map(|i| k.node_affinity(i, best.permutation[i]))
            .sum();
        assert!((best.objective - trace).abs() < 1e-12);
    }

    #[test]
    fn exact_recovers_relabeling() {
        let g = seg_graph(
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.2, 0.8)],
            &[(0, 1), (1, 2), (2, 3)],
        );
        // relabel: reverse node order
        let relabeled = {
            let n = g.node_count();
            let nodes: Vec<_> = (0..n).rev().map(|i| g.nodes()[i].clone()).collect();
            let edges = g
                .edges()
                .map(|(&(u, v), e)| ((n - 1 - u, n - 1 - v), e.clone()))
                .collect();
            crate::graph::ShapeGraph::new(nodes, edges).unwrap()
        };
        let params = MatchParams::default();
        let w0 = assign_weights(&g, params.weight_policy);
        let w1 = assign_weights(&relabeled, params.weight_policy);
        let (p0, p1) = pad_nulls(&w0, &w1);
        let k = build_affinity(&p0, &p1, &params).unwrap();
        let best = qap_exact(&k).unwrap();
        for i in 0..4 {
            assert_eq!(best.permutation[i], 3 - i, "node {i} mismatched");
        }
    }

    #[test]
    fn exact_single_node() {
        let g = seg_graph(&[(0.0, 0.0)], &[]);
        let params = MatchParams::default();
        let k = build_affinity(&g, &g, &params).unwrap();
        let best = qap_exact(&k).unwrap();
        assert_eq!(best.permutation, vec![0]);
    }

    #[test]
    fn exact_rejects_large_instances() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64, 0.0)).collect();
        let g = seg_graph(&pts, &[]);
        let k = build_affinity(&g, &g, &MatchParams::default()).unwrap();
        assert!(matches!(qap_exact(&k), Err(Error::Size(_))));
    }

    #[test]
    fn solver_matches_exact_on_small_random_instances() {
        let mut mismatches = 0;
        for trial in 0..12 {
            let g0 = synthetic::random_graph(3, 1000 + trial);
            let g1 = synthetic::random_graph(2, 2000 + trial);
            let params = MatchParams::default();
            let w0 = assign_weights(&g0, WeightPolicy::Length);
            let w1 = assign_weights(&g1, WeightPolicy::Length);
            let (p0, p1) = pad_nulls(&w0, &w1);
            let k = build_affinity(&p0, &p1, &params).unwrap();
            let exact = qap_exact(&k).unwrap();
            let approx = qap_solve(&k, 0);
            if (exact.objective - approx.objective).abs() > 1e-9 {
                mismatches += 1;
            }
            assert!(approx.objective <= exact.objective + 1e-9);
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn solver_is_deterministic_for_a_seed() {
        let g0 = synthetic::random_graph(6, 5);
        let g1 = synthetic::random_graph(5, 6);
        let params = MatchParams::default();
        let w0 = assign_weights(&g0, WeightPolicy::Length);
        let w1 = assign_weights(&g1, WeightPolicy::Length);
        let (p0, p1) = pad_nulls(&w0, &w1);
        let k = build_affinity(&p0, &p1, &params).unwrap();
        let a = qap_solve(&k, 42);
        let b = qap_solve(&k, 42);
        assert_eq!(a.permutation, b.permutation);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}
