//! Spectral bipartition of a shape graph by the sign pattern of the Fiedler
//! vector of its binary-adjacency Laplacian.

use crate::error::{Error, Result};
use crate::graph::ShapeGraph;
use nalgebra::{DMatrix, DVector};

/// Split a connected graph into two induced subgraphs by the sign of the
/// Fiedler vector (zero entries join the nonnegative side). Cross-partition
/// edges are dropped. Returns (negative side, nonnegative side).
///
/// Degenerate Fiedler eigenspaces (repeated second eigenvalue, e.g. complete
/// graphs) are resolved deterministically by projecting a fixed index-ramp
/// probe onto the eigenspace; orientation is normalized to the
/// lexicographically smaller sign pattern in node-id order.
pub fn fiedler_bipartition(g: &ShapeGraph) -> Result<(ShapeGraph, ShapeGraph)> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::Precondition(
            "fiedler bipartition needs at least 2 nodes".into(),
        ));
    }
    if g.connected_components().len() != 1 {
        return Err(Error::Precondition(
            "fiedler bipartition needs a connected graph".into(),
        ));
    }

    // binary adjacency: edge present iff weight > 0
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for (&(u, v), e) in g.edges() {
        if e.weight > 0.0 && u != v {
            lap[(u, v)] -= 1.0;
            lap[(v, u)] -= 1.0;
            lap[(u, u)] += 1.0;
            lap[(v, v)] += 1.0;
        }
    }

    let eig = lap.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda2 = eig.eigenvalues[order[1]];
    let tol = 1e-8 * lambda2.abs().max(1.0);
    let space: Vec<usize> = order[1..]
        .iter()
        .copied()
        .take_while(|&i| (eig.eigenvalues[i] - lambda2).abs() <= tol)
        .collect();

    let mut fiedler: DVector<f64> = eig.eigenvectors.column(space[0]).into_owned();
    if space.len() > 1 {
        // repeated eigenvalue: project an index ramp (and higher powers as
        // fallbacks) onto the eigenspace
        for power in 1..=3u32 {
            let mean = (0..n).map(|i| (i as f64).powi(power as i32)).sum::<f64>() / n as f64;
            let probe = DVector::from_fn(n, |i, _| (i as f64).powi(power as i32) - mean);
            let mut proj = DVector::zeros(n);
            for &col in &space {
                let basis = eig.eigenvectors.column(col);
                proj += basis.into_owned() * basis.dot(&probe);
            }
            if proj.norm() > 1e-9 {
                fiedler = proj;
                break;
            }
        }
    }

    // orientation: pick v or -v with the lexicographically smaller sign
    // pattern when nodes are listed in id order
    let mut id_order: Vec<usize> = (0..n).collect();
    id_order.sort_by(|&a, &b| g.nodes()[a].id.cmp(&g.nodes()[b].id));
    let pattern = |v: &DVector<f64>| -> Vec<u8> {
        id_order
            .iter()
            .map(|&i| if v[i] < -1e-12 { 0u8 } else { 1u8 })
            .collect()
    };
    let flipped = -fiedler.clone();
    if pattern(&flipped) < pattern(&fiedler) {
        fiedler = flipped;
    }

    let negative: Vec<usize> = (0..n).filter(|&i| fiedler[i] < -1e-12).collect();
    let nonneg: Vec<usize> = (0..n).filter(|&i| !(fiedler[i] < -1e-12)).collect();
    Ok((g.induced(&negative), g.induced(&nonneg)))
}
