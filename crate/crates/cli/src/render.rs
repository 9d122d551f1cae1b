//! Deterministic SVG rendering of shape graphs, geodesic frames, and
//! distance-matrix heatmaps. A fixed transform (y-axis flipped, 10% padding)
//! and fixed-precision coordinate formatting keep output byte-stable.

use shapegraph::geodesic::Frame;
use shapegraph::{Point, ShapeGraph};
use std::fmt::Write as _;

const CANVAS_WIDTH: f64 = 1000.0;

/// World-to-viewport transform shared by all frames of one rendering.
#[derive(Debug, Clone, Copy)]
pub struct Viewport {
    min: Point,
    scale: f64,
    height: f64,
    radius: f64,
}

fn expand(bb: &mut Option<(Point, Point)>, p: Point) {
    match bb {
        None => *bb = Some((p, p)),
        Some((lo, hi)) => {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
    }
}

impl Viewport {
    pub fn for_graphs(graphs: &[&ShapeGraph]) -> Viewport {
        let mut bb = None;
        for g in graphs {
            for n in g.nodes() {
                if let Some(p) = n.position {
                    expand(&mut bb, p);
                }
            }
            for (_, e) in g.edges() {
                for &p in e.curve.samples() {
                    expand(&mut bb, p);
                }
            }
        }
        Viewport::from_bbox(bb)
    }

    pub fn for_frames(frames: &[Frame]) -> Viewport {
        let mut bb = None;
        for f in frames {
            for p in f.nodes.iter().flatten() {
                expand(&mut bb, *p);
            }
            for e in &f.edges {
                for &p in &e.samples {
                    expand(&mut bb, p);
                }
            }
        }
        Viewport::from_bbox(bb)
    }

    fn from_bbox(bb: Option<(Point, Point)>) -> Viewport {
        let (lo, hi) = bb.unwrap_or((Point::ZERO, Point::new(1.0, 1.0)));
        let mut w = hi.x - lo.x;
        let mut h = hi.y - lo.y;
        if w <= 0.0 {
            w = 1.0;
        }
        if h <= 0.0 {
            h = 1.0;
        }
        // 10% padding on each side
        let min = Point::new(lo.x - 0.1 * w, lo.y - 0.1 * h);
        let w_pad = 1.2 * w;
        let h_pad = 1.2 * h;
        let scale = CANVAS_WIDTH / w_pad;
        let height = h_pad * scale;
        let radius = 0.01 * (CANVAS_WIDTH.hypot(height));
        Viewport {
            min,
            scale,
            height,
            radius,
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        // y grows downward in SVG
        (
            (p.x - self.min.x) * self.scale,
            self.height - (p.y - self.min.y) * self.scale,
        )
    }
}

fn polyline(out: &mut String, vp: &Viewport, pts: &[Point], opacity: f64, width: f64) {
    let mut points = String::new();
    for &p in pts {
        let (x, y) = vp.map(p);
        let _ = write!(points, "{x:.3},{y:.3} ");
    }
    let _ = writeln!(
        out,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"{:.3}\" stroke-opacity=\"{:.4}\" stroke-linecap=\"round\"/>",
        points.trim_end(),
        width,
        opacity.clamp(0.0, 1.0)
    );
}

fn circle(out: &mut String, vp: &Viewport, p: Point) {
    let (x, y) = vp.map(p);
    let _ = writeln!(
        out,
        "  <circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"{:.3}\" fill=\"#b22222\"/>",
        vp.radius
    );
}

fn svg_open(out: &mut String, vp: &Viewport) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.3} {:.3}\">",
        CANVAS_WIDTH, vp.height
    );
    let _ = writeln!(
        out,
        "  <rect width=\"{:.3}\" height=\"{:.3}\" fill=\"white\"/>",
        CANVAS_WIDTH, vp.height
    );
}

/// Render a graph; edge opacity is the weight relative to the graph's
/// maximum weight.
pub fn render_graph(g: &ShapeGraph, vp: &Viewport) -> String {
    let max_w = g
        .edges()
        .map(|(_, e)| e.weight)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut out = String::new();
    svg_open(&mut out, vp);
    for (_, e) in g.edges() {
        polyline(&mut out, vp, e.curve.samples(), e.weight / max_w, vp.radius * 0.6);
    }
    for n in g.nodes() {
        if let Some(p) = n.position {
            circle(&mut out, vp, p);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Render one geodesic frame; opacity is relative to `max_weight` (the
/// largest weight across the whole pair).
pub fn render_frame(frame: &Frame, vp: &Viewport, max_weight: f64) -> String {
    let max_w = max_weight.max(1e-300);
    let mut out = String::new();
    svg_open(&mut out, vp);
    for e in &frame.edges {
        polyline(&mut out, vp, &e.samples, e.weight / max_w, vp.radius * 0.6);
    }
    for p in frame.nodes.iter().flatten() {
        circle(&mut out, vp, *p);
    }
    out.push_str("</svg>\n");
    out
}

/// Distance-matrix heatmap with rows/columns rearranged by `order`.
/// Darker cells are closer pairs.
pub fn render_heatmap(matrix: &nalgebra::DMatrix<f64>, order: &[usize]) -> String {
    let m = order.len();
    let cell = 24.0;
    let size = cell * m as f64;
    let max = matrix.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size:.1} {size:.1}\">"
    );
    for (r, &i) in order.iter().enumerate() {
        for (c, &j) in order.iter().enumerate() {
            let v = matrix[(i, j)] / max;
            let shade = (255.0 * v).round() as u8;
            let _ = writeln!(
                out,
                "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"rgb({shade},{shade},{shade})\"/>",
                c as f64 * cell,
                r as f64 * cell
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
