//! Shape-graph analysis from the command line: distances, geodesic frame
//! sequences, multiscale coarsening, means, tangent PCA, clustering,
//! spectral partitioning, benchmarks, and file validation.

mod config;
mod render;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use shapegraph::{
    cluster_distances, fiedler_bipartition, graph_geodesic, io, karcher_mean_graphs,
    multiscale, pairwise_distances, pc_deformation, register_pair_detailed, synthetic,
    tangent_pca, validate, Error, MeanInit, RegistrationRecord, ShapeGraph, WeightPolicy,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "shapegraph", version, about = "Elastic shape analysis of planar shape graphs")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Weight-difference scale of the edge metric
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Edge/node balance in [0,1]
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Real-to-null node dissimilarity factor
    #[arg(long = "e", global = true)]
    e: Option<f64>,
    /// Per-curve sample count
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Seed for all stochastic elements
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Edge weight policy: binary | length
    #[arg(long, global = true)]
    weights: Option<String>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Read defaults from an emitted run_config.json
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Registered distance between two graphs
    Distance { input0: PathBuf, input1: PathBuf },
    /// Geodesic frame sequence between two graphs
    Geodesic {
        input0: PathBuf,
        input1: PathBuf,
        /// Number of frames (>= 2)
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Coarsened representations across resolution levels
    Multiscale {
        input: PathBuf,
        /// Comma-separated levels in (0,1]
        #[arg(long)]
        levels: Option<String>,
        /// Select the level closest to this target graph
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Karcher mean of a graph collection
    Mean {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Mean + tangent PCA with deformation grids
    Pca {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Pairwise distances + medoid clustering
    Cluster {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        outlier_fraction: Option<f64>,
    },
    /// Fiedler-vector bipartition into two graphs
    Partition { input: PathBuf },
    /// Registration timing over synthetic graphs
    Bench {
        /// Comma-separated node counts
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Report invariant violations of a graph file
    Validate { input: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) | Error::Data(_) | Error::Io(_) => 2,
                _ => 1,
            }
        }
    });
}

fn parse_levels(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Argument(format!("bad level `{s}`: {e}")))
        })
        .collect()
}

fn parse_grid(text: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::Argument(format!("bad node count `{s}`: {e}")))
        })
        .collect()
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if let Some(v) = g.eta {
        cfg.eta = v;
    }
    if let Some(v) = g.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = g.e {
        cfg.e = v;
    }
    if let Some(v) = g.samples {
        cfg.samples = v;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = &g.weights {
        cfg.weights = v.parse::<WeightPolicy>()?;
    }
    match &cli.command {
        Command::Distance { input0, input1 } => {
            cfg.command = "distance".into();
            cfg.inputs = vec![display(input0), display(input1)];
        }
        Command::Geodesic { input0, input1, frames } => {
            cfg.command = "geodesic".into();
            cfg.inputs = vec![display(input0), display(input1)];
            if let Some(v) = frames {
                cfg.frames = *v;
            }
        }
        Command::Multiscale { input, levels, target } => {
            cfg.command = "multiscale".into();
            cfg.inputs = vec![display(input)];
            if let Some(t) = target {
                cfg.inputs.push(display(t));
            }
            if let Some(text) = levels {
                cfg.levels = parse_levels(text)?;
            }
        }
        Command::Mean { inputs, tol, max_iter } => {
            cfg.command = "mean".into();
            cfg.inputs = inputs.iter().map(display).collect();
            if let Some(v) = tol {
                cfg.mean_tol = *v;
            }
            if let Some(v) = max_iter {
                cfg.mean_max_iter = *v;
            }
        }
        Command::Pca { inputs, tol, max_iter } => {
            cfg.command = "pca".into();
            cfg.inputs = inputs.iter().map(display).collect();
            if let Some(v) = tol {
                cfg.mean_tol = *v;
            }
            if let Some(v) = max_iter {
                cfg.mean_max_iter = *v;
            }
        }
        Command::Cluster { inputs, outlier_fraction } => {
            cfg.command = "cluster".into();
            cfg.inputs = inputs.iter().map(display).collect();
            if let Some(v) = outlier_fraction {
                cfg.outlier_fraction = *v;
            }
        }
        Command::Partition { input } => {
            cfg.command = "partition".into();
            cfg.inputs = vec![display(input)];
        }
        Command::Bench { grid, runs } => {
            cfg.command = "bench".into();
            cfg.inputs = Vec::new();
            if let Some(text) = grid {
                cfg.bench_grid = parse_grid(text)?;
            }
            if let Some(v) = runs {
                cfg.bench_runs = *v;
            }
        }
        Command::Validate { input } => {
            cfg.command = "validate".into();
            cfg.inputs = vec![display(input)];
        }
    }
    Ok(cfg)
}

fn display(p: impl AsRef<Path>) -> String {
    p.as_ref().display().to_string()
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Nine-or-more significant digits for CSV output.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

fn run(cli: Cli) -> Result<i32, Error> {
    let cfg = resolve_config(&cli)?;
    let out = cli.global.out.clone();
    std::fs::create_dir_all(&out)?;
    cfg.save(&out.join("run_config.json"))?;
    let params = cfg.match_params();

    match &cli.command {
        Command::Distance { input0, input1 } => {
            let g0 = io::load(input0)?;
            let g1 = io::load(input1)?;
            let pair = register_pair_detailed(&g0, &g1, &params)?;
            let record = RegistrationRecord::new(&pair);
            let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
            text.push('\n');
            write_text(&out.join("registration.json"), &text)?;
            println!("{:.9}", pair.registration.d_graph);
        }
        Command::Geodesic { input0, input1, .. } => {
            let g0 = io::load(input0)?;
            let g1 = io::load(input1)?;
            let pair = register_pair_detailed(&g0, &g1, &params)?;
            let geo = graph_geodesic(&pair, cfg.frames)?;
            let vp = render::Viewport::for_frames(&geo.frames);
            let max_w = geo
                .frames
                .iter()
                .flat_map(|f| f.edges.iter().map(|e| e.weight))
                .fold(0.0f64, f64::max);
            for (i, frame) in geo.frames.iter().enumerate() {
                let svg = render::render_frame(frame, &vp, max_w);
                write_text(&out.join(format!("frame_{i:03}.svg")), &svg)?;
            }
        }
        Command::Multiscale { input, target, .. } => {
            let g = io::load(input)?;
            let metric =
                multiscale::internal_metric(&g, multiscale::MetricKind::EffectiveResistance)?;
            let dend = multiscale::build_dendrogram(&metric);
            for &h in &cfg.levels {
                let coarse = multiscale::coarsen(&g, &dend, h, cfg.samples)?;
                let mut graph = coarse.graph.clone();
                let assignment: serde_json::Map<String, serde_json::Value> = g
                    .nodes()
                    .iter()
                    .zip(&coarse.assignment)
                    .map(|(n, &c)| (n.id.clone(), serde_json::json!(c)))
                    .collect();
                graph
                    .metadata
                    .insert("clusters".into(), serde_json::Value::Object(assignment));
                io::save(&graph, out.join(format!("coarse_h{h:.4}.json")))?;
                let vp = render::Viewport::for_graphs(&[&graph]);
                write_text(
                    &out.join(format!("coarse_h{h:.4}.svg")),
                    &render::render_graph(&graph, &vp),
                )?;
            }
            if let Some(target) = target {
                let t = io::load(target)?;
                let sel = multiscale::select_resolution(&t, &g, &cfg.levels, &params)?;
                let mut csv = String::from("h,d_graph\n");
                for &(h, d) in &sel.profile {
                    let _ = writeln!(csv, "{h},{}", sig9(d));
                }
                write_text(&out.join("profile.csv"), &csv)?;
                let selection = serde_json::json!({ "h_star": sel.h_star });
                write_text(
                    &out.join("selection.json"),
                    &format!("{}\n", serde_json::to_string_pretty(&selection).unwrap()),
                )?;
                println!("{}", sel.h_star);
            }
        }
        Command::Mean { inputs, .. } => {
            let graphs = load_all(inputs)?;
            let res = karcher_mean_graphs(
                &graphs,
                cfg.mean_tol,
                cfg.mean_max_iter,
                MeanInit::Largest,
                &params,
            )?;
            save_mean_outputs(&out, &res)?;
        }
        Command::Pca { inputs, .. } => {
            let graphs = load_all(inputs)?;
            let res = karcher_mean_graphs(
                &graphs,
                cfg.mean_tol,
                cfg.mean_max_iter,
                MeanInit::Largest,
                &params,
            )?;
            save_mean_outputs(&out, &res)?;
            let model = tangent_pca(&res)?;
            let mut csv = String::from("component,singular_value\n");
            for (i, s) in model.singular_values.iter().enumerate() {
                let _ = writeln!(csv, "{i},{}", sig9(*s));
            }
            write_text(&out.join("singular_values.csv"), &csv)?;
            // deformation grids along up to three dominant directions at
            // t in {-2,-1,0,1,2} standard deviations
            for d in 0..model.rank.min(3) {
                let mut graphs = Vec::new();
                for k in -2i32..=2 {
                    graphs.push((k, pc_deformation(&model, d, k as f64)?));
                }
                let refs: Vec<&ShapeGraph> = graphs.iter().map(|(_, g)| g).collect();
                let vp = render::Viewport::for_graphs(&refs);
                for (k, g) in &graphs {
                    write_text(
                        &out.join(format!("pca_dir{d}_t{k}.svg")),
                        &render::render_graph(g, &vp),
                    )?;
                }
            }
        }
        Command::Cluster { inputs, .. } => {
            let graphs = load_all(inputs)?;
            let matrix = pairwise_distances(&graphs, &params)?;
            let ids: Vec<String> = inputs
                .iter()
                .map(|p| {
                    p.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| display(p))
                })
                .collect();
            let mut csv = format!("{}\n", ids.join(","));
            for i in 0..matrix.nrows() {
                let row: Vec<String> = (0..matrix.ncols()).map(|j| sig9(matrix[(i, j)])).collect();
                let _ = writeln!(csv, "{}", row.join(","));
            }
            write_text(&out.join("distances.csv"), &csv)?;

            let report = cluster_distances(&matrix, cfg.outlier_fraction)?;
            let labels: Vec<serde_json::Value> = report
                .labels
                .iter()
                .map(|l| match l {
                    Some(c) => serde_json::json!(c),
                    None => serde_json::json!("outlier"),
                })
                .collect();
            let json = serde_json::json!({
                "k": report.k,
                "silhouette": report.silhouette,
                "labels": labels,
                "modes": report.modes,
                "ids": ids,
            });
            write_text(
                &out.join("cluster_report.json"),
                &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()),
            )?;

            // heatmap rows rearranged by cluster membership, outliers last
            let mut order: Vec<usize> = (0..report.labels.len()).collect();
            order.sort_by_key(|&i| (report.labels[i].unwrap_or(usize::MAX), i));
            write_text(&out.join("heatmap.svg"), &render::render_heatmap(&matrix, &order))?;
            println!("k={}", report.k);
        }
        Command::Partition { input } => {
            let g = io::load(input)?;
            let (a, b) = fiedler_bipartition(&g)?;
            for (name, part) in [("part_0", &a), ("part_1", &b)] {
                io::save(part, out.join(format!("{name}.json")))?;
                let vp = render::Viewport::for_graphs(&[part]);
                write_text(
                    &out.join(format!("{name}.svg")),
                    &render::render_graph(part, &vp),
                )?;
            }
        }
        Command::Bench { .. } => {
            let mut csv = String::from("n,seconds\n");
            for &n in &cfg.bench_grid {
                let g0 = synthetic::random_graph(n, cfg.seed.wrapping_mul(2).wrapping_add(n as u64));
                let g1 = synthetic::random_graph(
                    n,
                    cfg.seed.wrapping_mul(2).wrapping_add(n as u64).wrapping_add(1),
                );
                let mut times = Vec::with_capacity(cfg.bench_runs);
                for _ in 0..cfg.bench_runs.max(1) {
                    let start = Instant::now();
                    let _ = register_pair_detailed(&g0, &g1, &params)?;
                    times.push(start.elapsed().as_secs_f64());
                }
                times.sort_by(f64::total_cmp);
                let median = times[times.len() / 2];
                let _ = writeln!(csv, "{n},{}", sig9(median));
            }
            write_text(&out.join("bench.csv"), &csv)?;
        }
        Command::Validate { input } => {
            let g = io::load(input)?;
            let violations = validate(&g);
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                return Ok(1);
            }
            println!("valid: {} nodes, {} edges", g.node_count(), g.edge_count());
        }
    }
    Ok(0)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<ShapeGraph>, Error> {
    paths.iter().map(io::load).collect()
}

fn save_mean_outputs(out: &Path, res: &shapegraph::MeanResult) -> Result<(), Error> {
    io::save(&res.mean, out.join("mean.json"))?;
    let vp = render::Viewport::for_graphs(&[&res.mean]);
    write_text(&out.join("mean.svg"), &render::render_graph(&res.mean, &vp))?;
    let mut csv = String::from("iteration,objective\n");
    for (i, obj) in res.objective_trace.iter().enumerate() {
        let _ = writeln!(csv, "{i},{}", sig9(*obj));
    }
    write_text(&out.join("mean_trace.csv"), &csv)?;
    Ok(())
}
