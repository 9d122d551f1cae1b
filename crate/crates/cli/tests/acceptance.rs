//! CLI acceptance: every subcommand reruns byte-identically from its emitted
//! config record (criterion 11), plus the command-level behavior checks.

use shapegraph::synthetic::{self, Perturbation};
use shapegraph::{io, register_pair, MatchParams, ShapeGraph};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shapegraph"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn shapegraph");
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_fixture(dir: &Path, name: &str, g: &ShapeGraph) -> PathBuf {
    let path = dir.join(name);
    io::save(g, &path).unwrap();
    path
}

fn fixtures(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let template = synthetic::random_graph(5, 11);
    let a = write_fixture(dir, "a.json", &template);
    let perturbed = synthetic::perturb_graph(
        &template,
        Perturbation { stretch: 0.2, delete_nodes: 0, delete_edges: 0, reorder: true },
        3,
    )
    .0;
    let b = write_fixture(dir, "b.json", &perturbed);
    let third = synthetic::perturb_graph(
        &template,
        Perturbation { stretch: 0.2, delete_nodes: 0, delete_edges: 0, reorder: true },
        5,
    )
    .0;
    let c = write_fixture(dir, "c.json", &third);
    (a, b, c)
}

fn dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(entry.path()).unwrap(),
            );
        }
    }
    out
}

/// Compare two output directories byte for byte. Wall-clock columns in
/// bench.csv are the documented exception: only the node counts are stable.
fn assert_reproduced(first: &Path, second: &Path) {
    let a = dir_files(first);
    let b = dir_files(second);
    let names_a: Vec<&String> = a.keys().collect();
    let names_b: Vec<&String> = b.keys().collect();
    assert_eq!(names_a, names_b, "file sets differ");
    for (name, bytes) in &a {
        let other = &b[name];
        if name == "bench.csv" {
            let col = |data: &[u8]| -> Vec<String> {
                String::from_utf8_lossy(data)
                    .lines()
                    .map(|l| l.split(',').next().unwrap_or("").to_string())
                    .collect()
            };
            assert_eq!(col(bytes), col(other), "bench.csv node column differs");
        } else {
            assert_eq!(bytes, other, "{name} differs between runs");
        }
    }
}

/// Criterion 11: rerunning each subcommand from its emitted config record
/// reproduces the outputs byte for byte.
#[test]
fn c11_cli_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (a, b, c) = fixtures(dir);
    let (a, b, c) = (
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        c.to_str().unwrap(),
    );

    let cases: Vec<(&str, Vec<String>)> = vec![
        ("distance", vec!["distance".into(), a.into(), b.into(), "--samples".into(), "12".into()]),
        ("geodesic", vec!["geodesic".into(), a.into(), b.into(), "--frames".into(), "3".into(), "--samples".into(), "12".into()]),
        (
            "multiscale",
            vec!["multiscale".into(), b.into(), "--levels".into(), "0.5,1.0".into(), "--target".into(), a.into(), "--samples".into(), "12".into()],
        ),
        (
            "mean",
            vec!["mean".into(), a.into(), b.into(), c.into(), "--max-iter".into(), "2".into(), "--samples".into(), "12".into()],
        ),
        (
            "pca",
            vec!["pca".into(), a.into(), b.into(), c.into(), "--max-iter".into(), "2".into(), "--samples".into(), "12".into()],
        ),
        (
            "cluster",
            vec!["cluster".into(), a.into(), b.into(), c.into(), "--samples".into(), "12".into()],
        ),
        ("partition", vec!["partition".into(), a.into()]),
        ("bench", vec!["bench".into(), "--grid".into(), "6".into(), "--runs".into(), "1".into(), "--samples".into(), "12".into()]),
        ("validate", vec!["validate".into(), a.into()]),
    ];

    for (name, args) in cases {
        let out1 = dir.join(format!("{name}_run1"));
        let out2 = dir.join(format!("{name}_run2"));
        let mut full: Vec<String> = args.clone();
        full.push("--out".into());
        full.push(out1.to_string_lossy().into_owned());
        let refs: Vec<&str> = full.iter().map(|s| s.as_str()).collect();
        run_ok(&refs);

        // rerun with the same invocation (subcommand + input paths) but all
        // parameters restored from the emitted config record
        let mut replay: Vec<String> = args
            .iter()
            .take_while(|s| !s.starts_with("--"))
            .cloned()
            .collect();
        if let Some(pos) = args.iter().position(|s| s == "--target") {
            replay.push("--target".into());
            replay.push(args[pos + 1].clone());
        }
        replay.push("--config".into());
        replay.push(out1.join("run_config.json").to_string_lossy().into_owned());
        replay.push("--out".into());
        replay.push(out2.to_string_lossy().into_owned());
        let refs: Vec<&str> = replay.iter().map(|s| s.as_str()).collect();
        run_ok(&refs);

        assert_reproduced(&out1, &out2);
        println!("criterion 11 PASS [{name}]: byte-identical rerun from config");
    }
}

#[test]
fn distance_zero_for_identical_and_flag_plumbing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (a, _, _) = fixtures(dir);
    let a = a.to_str().unwrap();

    let out = run_ok(&["distance", a, a, "--out", dir.join("o1").to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    let printed = text.trim();
    let value: f64 = printed.parse().unwrap();
    assert!(value.abs() < 1e-6, "distance {printed}");
    assert_eq!(printed.split('.').nth(1).map(|s| s.len()), Some(9), "nine decimals: {printed}");

    // a lambda override must match the direct library call
    let g = io::load(dir.join("a.json")).unwrap();
    let h = io::load(dir.join("b.json")).unwrap();
    let params = MatchParams { lambda: 0.8, samples: 12, ..Default::default() };
    let expect = register_pair(&g, &h, &params).unwrap().d_graph;
    let out = run_ok(&[
        "distance",
        a,
        dir.join("b.json").to_str().unwrap(),
        "--lambda",
        "0.8",
        "--samples",
        "12",
        "--out",
        dir.join("o2").to_str().unwrap(),
    ]);
    let got: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((got - expect).abs() < 1e-9, "cli {got} vs library {expect}");
}

#[test]
fn missing_input_exits_2_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = bin()
        .args([
            "distance",
            missing.to_str().unwrap(),
            missing.to_str().unwrap(),
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.json"), "stderr: {err}");
}

#[test]
fn geodesic_identical_inputs_and_frame_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (a, _, _) = fixtures(dir);
    let a = a.to_str().unwrap();

    let out1 = dir.join("g1");
    run_ok(&["geodesic", a, a, "--frames", "4", "--out", out1.to_str().unwrap()]);
    let frames: Vec<Vec<u8>> = (0..4)
        .map(|i| std::fs::read(out1.join(format!("frame_{i:03}.svg"))).unwrap())
        .collect();
    for f in &frames[1..] {
        assert_eq!(&frames[0], f, "identical inputs must give identical frames");
    }

    let out2 = dir.join("g2");
    run_ok(&["geodesic", a, a, "--frames", "2", "--out", out2.to_str().unwrap()]);
    assert!(out2.join("frame_000.svg").exists());
    assert!(out2.join("frame_001.svg").exists());
    assert!(!out2.join("frame_002.svg").exists());
}

#[test]
fn geodesic_vanishing_edge_opacity_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // triangle vs the same triangle missing one edge
    let tri_full = r#"{
        "nodes": [
            {"id": "a", "x": 0.0, "y": 0.0},
            {"id": "b", "x": 1.0, "y": 0.0},
            {"id": "c", "x": 0.5, "y": 0.9}
        ],
        "edges": [
            {"u": "a", "v": "b", "points": [[0.0,0.0],[0.5,0.05],[1.0,0.0]]},
            {"u": "b", "v": "c", "points": [[1.0,0.0],[0.8,0.5],[0.5,0.9]]},
            {"u": "a", "v": "c", "points": [[0.0,0.0],[0.2,0.5],[0.5,0.9]]}
        ]
    }"#;
    let tri_open = r#"{
        "nodes": [
            {"id": "a", "x": 0.0, "y": 0.0},
            {"id": "b", "x": 1.0, "y": 0.0},
            {"id": "c", "x": 0.5, "y": 0.9}
        ],
        "edges": [
            {"u": "a", "v": "b", "points": [[0.0,0.0],[0.5,0.05],[1.0,0.0]]},
            {"u": "b", "v": "c", "points": [[1.0,0.0],[0.8,0.5],[0.5,0.9]]}
        ]
    }"#;
    std::fs::write(dir.join("full.json"), tri_full).unwrap();
    std::fs::write(dir.join("open.json"), tri_open).unwrap();
    let out = dir.join("gv");
    run_ok(&[
        "geodesic",
        dir.join("full.json").to_str().unwrap(),
        dir.join("open.json").to_str().unwrap(),
        "--frames",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);

    let opacities = |path: &Path| -> Vec<f64> {
        let text = std::fs::read_to_string(path).unwrap();
        text.match_indices("stroke-opacity=\"")
            .map(|(i, pat)| {
                let rest = &text[i + pat.len()..];
                let end = rest.find('"').unwrap();
                rest[..end].parse::<f64>().unwrap()
            })
            .collect()
    };
    let per_frame: Vec<Vec<f64>> = (0..5)
        .map(|i| opacities(&out.join(format!("frame_{i:03}.svg"))))
        .collect();
    // the vanishing edge is the one that reaches ~0 opacity in the last frame
    let fading = per_frame
        .last()
        .unwrap()
        .iter()
        .position(|&o| o < 1e-6)
        .expect("an edge must fade out");
    let series: Vec<f64> = per_frame.iter().map(|f| f[fading]).collect();
    assert!(
        series.windows(2).all(|w| w[1] <= w[0] + 1e-9),
        "opacity not monotone: {series:?}"
    );
    assert!(series[0] > 0.5);
}

#[test]
fn multiscale_levels_counts_and_self_target() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (a, _, _) = fixtures(dir);
    let a_str = a.to_str().unwrap();
    let out = dir.join("ms");
    run_ok(&[
        "multiscale",
        a_str,
        "--target",
        a_str,
        "--samples",
        "30",
        "--out",
        out.to_str().unwrap(),
    ]);
    // default grid: 8 uniform levels; node counts follow max(1, round(h*n))
    let n = io::load(&a).unwrap().node_count();
    for i in 1..=8 {
        let h = i as f64 / 8.0;
        let path = out.join(format!("coarse_h{h:.4}.json"));
        let coarse = io::load(&path).unwrap();
        assert_eq!(
            coarse.node_count(),
            ((h * n as f64).round() as usize).max(1),
            "level {h}"
        );
    }
    let selection: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("selection.json")).unwrap())
            .unwrap();
    assert_eq!(selection["h_star"].as_f64(), Some(1.0));

    // levels {1.0}: structurally equal to the input up to resampling
    let out2 = dir.join("ms2");
    run_ok(&[
        "multiscale",
        a_str,
        "--levels",
        "1.0",
        "--samples",
        "30",
        "--out",
        out2.to_str().unwrap(),
    ]);
    let coarse = io::load(out2.join("coarse_h1.0000.json")).unwrap();
    let orig = io::load(&a).unwrap();
    assert_eq!(coarse.node_count(), orig.node_count());
    assert_eq!(coarse.edge_count(), orig.edge_count());
    let params = MatchParams { samples: 30, ..Default::default() };
    let reg = register_pair(&orig, &coarse, &params).unwrap();
    assert!(reg.d_graph < 1e-3 * orig.total_edge_length());
}

#[test]
fn mean_of_single_input_is_a_copy() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (a, _, _) = fixtures(dir);
    let out = dir.join("mean1");
    run_ok(&[
        "mean",
        a.to_str().unwrap(),
        "--samples",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    let mean = io::load(out.join("mean.json")).unwrap();
    let orig = io::load(&a).unwrap();
    assert_eq!(mean.node_count(), orig.node_count());
    assert_eq!(mean.edge_count(), orig.edge_count());
    let params = MatchParams { samples: 12, ..Default::default() };
    let reg = register_pair(&mean, &orig, &params).unwrap();
    assert!(reg.d_graph < 1e-6, "mean deviates: {}", reg.d_graph);
}

#[test]
fn pca_of_identical_inputs_reports_zeros_and_no_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (a, _, _) = fixtures(dir);
    let a = a.to_str().unwrap();
    let out = dir.join("pca0");
    run_ok(&[
        "pca", a, a, a,
        "--samples", "12",
        "--max-iter", "2",
        "--out", out.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(out.join("singular_values.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(value < 1e-9, "nonzero singular value: {line}");
    }
    let grids: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().to_string_lossy().into_owned();
            name.starts_with("pca_dir").then_some(name)
        })
        .collect();
    assert!(grids.is_empty(), "unexpected deformation grids {grids:?}");
}

#[test]
fn partition_splits_a_four_path_in_half() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let path4 = r#"{
        "nodes": [
            {"id": "a", "x": 0.0, "y": 0.0},
            {"id": "b", "x": 1.0, "y": 0.0},
            {"id": "c", "x": 2.0, "y": 0.0},
            {"id": "d", "x": 3.0, "y": 0.0}
        ],
        "edges": [
            {"u": "a", "v": "b", "points": [[0.0,0.0],[1.0,0.0]]},
            {"u": "b", "v": "c", "points": [[1.0,0.0],[2.0,0.0]]},
            {"u": "c", "v": "d", "points": [[2.0,0.0],[3.0,0.0]]}
        ]
    }"#;
    std::fs::write(dir.join("path4.json"), path4).unwrap();
    let out = dir.join("part");
    run_ok(&[
        "partition",
        dir.join("path4.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let p0 = io::load(out.join("part_0.json")).unwrap();
    let p1 = io::load(out.join("part_1.json")).unwrap();
    assert_eq!(p0.node_count(), 2);
    assert_eq!(p1.node_count(), 2);
    let mut ids: Vec<String> = p0.nodes().iter().chain(p1.nodes()).map(|n| n.id.clone()).collect();
    ids.sort();
    assert_eq!(ids, vec!["a", "b", "c", "d"]);
}

#[test]
fn bench_single_grid_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    run_ok(&[
        "bench",
        "--grid",
        "10",
        "--runs",
        "1",
        "--samples",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "n,seconds");
    assert!(lines[1].starts_with("10,"));
}

#[test]
fn validate_flags_self_loops() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let selfloop = r#"{
        "nodes": [{"id": "a", "x": 0.0, "y": 0.0}],
        "edges": [{"u": "a", "v": "a", "points": [[0.0,0.0],[0.5,0.5],[0.0,0.0]]}]
    }"#;
    std::fs::write(dir.join("loop.json"), selfloop).unwrap();
    let out = bin()
        .args([
            "validate",
            dir.join("loop.json").to_str().unwrap(),
            "--out",
            dir.join("v").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("self-loop"));

    let (a, _, _) = fixtures(dir);
    let ok = run_ok(&[
        "validate",
        a.to_str().unwrap(),
        "--out",
        dir.join("v2").to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&ok.stdout).contains("valid"));
}
