//! Geodesic interpolation between registered shape graphs, producing frame
//! sequences ready for rendering: matched edges follow the elastic geodesic,
//! vanishing edges fade (and shrink when leaf-incident), appearing edges fade
//! in.

use crate::curve::{fit_to_endpoints, from_srvf, register, resample};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::matching::{MatchContext, PairRegistration};
use crate::weighted::{weighted_geodesic, WeightedShape};

/// One edge of a rendered frame.
#[derive(Debug, Clone)]
pub struct FrameEdge {
    pub samples: Vec<Point>,
    /// Interpolated weight; doubles as the opacity driver when rendering.
    pub weight: f64,
}

/// A snapshot of the geodesic at one interpolation parameter.
#[derive(Debug, Clone)]
pub struct Frame {
    pub u: f64,
    /// Position of every padded template node (None for nodes that are null
    /// on both sides).
    pub nodes: Vec<Option<Point>>,
    pub edges: Vec<FrameEdge>,
}

/// A discretized geodesic between two registered shape graphs.
#[derive(Debug, Clone)]
pub struct GraphGeodesic {
    pub frames: Vec<Frame>,
}

enum EdgePlan {
    /// Real edge matched to a real edge: elastic interpolation between the
    /// endpoints' interpolated positions.
    Matched {
        a: WeightedShape,
        b: WeightedShape,
        ends0: (usize, usize),
        ends1: (usize, usize),
    },
    /// Real edge of one side with no counterpart: shape held, weight fading
    /// (in or out); leaf-incident edges additionally shrink to the surviving
    /// endpoint.
    Fading {
        curve: crate::curve::PlanarCurve,
        weight: f64,
        ends: (usize, usize),
        appearing: bool,
        shrink_toward: Option<usize>,
    },
}

/// Interpolate two registered graphs over `n_frames` uniformly spaced
/// parameters. Node positions interpolate linearly for real-real matches and
/// stay fixed otherwise; frame 0 reproduces the first graph and the last
/// frame the second (as quotient objects).
pub fn graph_geodesic(pair: &PairRegistration, n_frames: usize) -> Result<GraphGeodesic> {
    if n_frames < 2 {
        return Err(Error::Argument("need at least 2 frames".into()));
    }
    let ctx = MatchContext::from_padded(&pair.padded0, &pair.padded1, pair.params)?;
    let sigma = &pair.registration.permutation;
    let n = ctx.n;
    let eta = ctx.params.eta;
    let samples = ctx.params.samples;

    let pos0: Vec<Option<Point>> = ctx.g0.nodes().iter().map(|x| x.position).collect();
    let pos1: Vec<Option<Point>> = ctx.g1.nodes().iter().map(|x| x.position).collect();

    // node trajectory: g0-indexed template
    let node_at = |i: usize, u: f64| -> Option<Point> {
        let j = sigma[i];
        match (pos0[i], pos1[j]) {
            (Some(p), Some(q)) => Some(p.lerp(q, u)),
            (Some(p), None) => Some(p),
            (None, Some(q)) => Some(q),
            (None, None) => None,
        }
    };

    let mut plans = Vec::new();
    let mut matched1 = vec![false; ctx.edges1.len()];
    for e0 in &ctx.edges0 {
        let (ju, jv) = (sigma[e0.u], sigma[e0.v]);
        let key = if ju <= jv { (ju, jv) } else { (jv, ju) };
        if let Some(&i1) = ctx.lookup1.get(&key) {
            matched1[i1] = true;
            let e1 = &ctx.edges1[i1];
            let parallel = ju < jv;
            let q1 = if parallel { e1.fwd.clone() } else { e1.rev.clone() };
            let (_, q1reg) = register(&e0.fwd, &q1);
            let ends1 = if parallel { (e1.u, e1.v) } else { (e1.v, e1.u) };
            plans.push(EdgePlan::Matched {
                a: WeightedShape::new(e0.fwd.clone(), e0.weight)?,
                b: WeightedShape::new(q1reg, e1.weight)?,
                ends0: (e0.u, e0.v),
                ends1,
            });
        } else {
            let leaf_u = ctx.g0.is_leaf(e0.u);
            let leaf_v = ctx.g0.is_leaf(e0.v);
            let shrink_toward = match (leaf_u, leaf_v) {
                (true, false) => Some(e0.v),
                (false, true) => Some(e0.u),
                (true, true) => Some(e0.u.min(e0.v)),
                (false, false) => None,
            };
            let curve = resample(&ctx.g0.edge(e0.u, e0.v).unwrap().curve, samples)?;
            plans.push(EdgePlan::Fading {
                curve,
                weight: e0.weight,
                ends: (e0.u, e0.v),
                appearing: false,
                shrink_toward,
            });
        }
    }
    // appearing edges: real in g1 with no matched counterpart; endpoints are
    // tracked through the inverse matching
    let mut inv = vec![0usize; n];
    for (i, &j) in sigma.iter().enumerate() {
        inv[j] = i;
    }
    for (i1, e1) in ctx.edges1.iter().enumerate() {
        if matched1[i1] {
            continue;
        }
        let leaf_u = ctx.g1.is_leaf(e1.u);
        let leaf_v = ctx.g1.is_leaf(e1.v);
        let shrink_toward = match (leaf_u, leaf_v) {
            (true, false) => Some(inv[e1.v]),
            (false, true) => Some(inv[e1.u]),
            (true, true) => Some(inv[e1.u.min(e1.v)]),
            (false, false) => None,
        };
        let curve = resample(&ctx.g1.edge(e1.u, e1.v).unwrap().curve, samples)?;
        plans.push(EdgePlan::Fading {
            curve,
            weight: e1.weight,
            ends: (inv[e1.u], inv[e1.v]),
            appearing: true,
            shrink_toward,
        });
    }

    let mut frames = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let u = f as f64 / (n_frames - 1) as f64;
        let nodes: Vec<Option<Point>> = (0..n).map(|i| node_at(i, u)).collect();
        let mut edges = Vec::with_capacity(plans.len());
        for plan in &plans {
            match plan {
                EdgePlan::Matched { a, b, ends0, ends1 } => {
                    let ws = weighted_geodesic(a, b, eta, u)?;
                    let start = pos0[ends0.0]
                        .unwrap()
                        .lerp(pos1[ends1.0].unwrap(), u);
                    let end = pos0[ends0.1]
                        .unwrap()
                        .lerp(pos1[ends1.1].unwrap(), u);
                    let raw = from_srvf(&ws.shape, start);
                    let samples = match fit_to_endpoints(&raw, start, end) {
                        Ok(c) => c.samples().to_vec(),
                        // degenerate span: draw the chord
                        Err(_) => vec![start, end],
                    };
                    edges.push(FrameEdge {
                        samples,
                        weight: ws.weight,
                    });
                }
                EdgePlan::Fading {
                    curve,
                    weight,
                    ends,
                    appearing,
                    shrink_toward,
                } => {
                    let fade = if *appearing { u } else { 1.0 - u };
                    let start = node_at(ends.0, u);
                    let end = node_at(ends.1, u);
                    let mut pts: Vec<Point> = match (start, end) {
                        (Some(s), Some(t)) => match fit_to_endpoints(curve, s, t) {
                            Ok(c) => c.samples().to_vec(),
                            Err(_) => curve.samples().to_vec(),
                        },
                        _ => curve.samples().to_vec(),
                    };
                    if let Some(surv) = shrink_toward {
                        if let Some(center) = node_at(*surv, u) {
                            let scale = fade;
                            for p in pts.iter_mut() {
                                *p = center + (*p - center) * scale;
                            }
                        }
                    }
                    edges.push(FrameEdge {
                        samples: pts,
                        weight: weight * fade,
                    });
                }
            }
        }
        frames.push(Frame { u, nodes, edges });
    }
    Ok(GraphGeodesic { frames })
}
