//! Elastic statistical shape analysis of planar shape graphs.
//!
//! A shape graph is a set of labelled nodes in the plane joined by sampled
//! curves. This crate provides the full analysis pipeline on such data:
//!
//! - elastic shape analysis of the edge curves (square-root velocity
//!   transform, dynamic-programming registration, geodesics, Karcher means);
//! - a quotient metric on weighted shapes that treats vanishing edges and
//!   missing edges as the same point;
//! - graph registration as a quadratic assignment over a sparse affinity
//!   matrix, with an exact enumeration oracle for small instances;
//! - multiscale coarsening driven by internal node metrics (Euclidean,
//!   geodesic, effective resistance) and complete-linkage clustering;
//! - population statistics: Karcher means of graph collections, tangent PCA
//!   with shooting vectors, distance-matrix clustering;
//! - preprocessing (component pruning, spectral bipartition) and a JSON file
//!   format for graph exchange.

pub mod curve;
pub mod error;
pub mod geodesic;
pub mod geom;
pub mod graph;
pub mod io;
pub mod matching;
pub mod multiscale;
pub mod qap;
pub mod spectral;
pub mod stats;
pub mod synthetic;
pub mod weighted;

pub use curve::{
    d_srv, fit_to_endpoints, from_srvf, karcher_mean_curves, register, register_exhaustive,
    resample, srv_geodesic, to_srvf, PlanarCurve, Reparameterization, SrvCurve,
};
pub use error::{Error, Result};
pub use geodesic::{graph_geodesic, Frame, FrameEdge, GraphGeodesic};
pub use geom::Point;
pub use graph::{
    assign_weights, pad_nulls, remove_small_components, simplify_multiedges, validate, Edge, Node,
    RawEdge, ShapeGraph, Violation, WeightPolicy,
};
pub use matching::{
    build_affinity, d_graph, register_pair, register_pair_detailed, AffinityMatrix, MatchParams,
    PairRegistration, Registration, RegistrationRecord,
};
pub use multiscale::{
    build_dendrogram, coarsen, internal_metric, select_resolution, CoarseGraph, Dendrogram,
    InternalMetric, MetricKind, ResolutionSelection,
};
pub use qap::{qap_exact, qap_solve, Assignment};
pub use spectral::fiedler_bipartition;
pub use stats::{
    cluster_distances, karcher_mean_graphs, pairwise_distances, pc_deformation, tangent_pca,
    ClusterReport, MeanInit, MeanResult, TangentModel,
};
