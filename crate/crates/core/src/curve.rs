//! Elastic shape analysis of open planar curves.
//!
//! Curves are compared through their square-root velocity (SRV) transform,
//! where the elastic metric becomes the flat L2 metric and optimal
//! reparameterization reduces to a dynamic program over a monotone lattice.

use crate::error::{Error, Result};
use crate::geom::{polyline_length, Point};

/// A sampled open curve in the plane.
///
/// The all-coincident curve (every sample equal) plays the role of the null
/// curve; every other curve must have positive arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    samples: Vec<Point>,
}

impl PlanarCurve {
    pub fn new(samples: Vec<Point>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Argument(format!(
                "curve needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|p| !p.is_finite()) {
            return Err(Error::Argument("curve samples must be finite".into()));
        }
        Ok(PlanarCurve { samples })
    }

    /// The degenerate curve sitting at a single point (the null curve).
    pub fn degenerate(at: Point, count: usize) -> Self {
        PlanarCurve {
            samples: vec![at; count.max(2)],
        }
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> Point {
        self.samples[0]
    }

    pub fn last(&self) -> Point {
        *self.samples.last().unwrap()
    }

    pub fn arc_length(&self) -> f64 {
        polyline_length(&self.samples)
    }

    /// True when every sample coincides (zero arc length).
    pub fn is_degenerate(&self) -> bool {
        let p0 = self.samples[0];
        self.samples.iter().all(|&p| p == p0)
    }

    pub fn reversed(&self) -> PlanarCurve {
        let mut s = self.samples.clone();
        s.reverse();
        PlanarCurve { samples: s }
    }

    pub fn translated(&self, z: Point) -> PlanarCurve {
        PlanarCurve {
            samples: self.samples.iter().map(|&p| p + z).collect(),
        }
    }
}

/// Resample a curve at `count` points, uniformly spaced in arc length.
/// Endpoints are preserved exactly. A degenerate (null) curve resamples to
/// `count` copies of its point.
pub fn resample(curve: &PlanarCurve, count: usize) -> Result<PlanarCurve> {
    if count < 2 {
        return Err(Error::Argument("resample count must be >= 2".into()));
    }
    if curve.is_degenerate() {
        return Ok(PlanarCurve::degenerate(curve.first(), count));
    }
    let pts = curve.samples();
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + w[0].distance(w[1]));
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::Degenerate("curve has zero arc length".into()));
    }

    let mut out = Vec::with_capacity(count);
    out.push(pts[0]);
    let mut seg = 0usize;
    for k in 1..count - 1 {
        let target = total * k as f64 / (count - 1) as f64;
        while seg < cum.len() - 2 && cum[seg + 1] < target {
            seg += 1;
        }
        // advance past zero-length segments
        while seg < cum.len() - 2 && cum[seg + 1] <= cum[seg] {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let f = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
        out.push(pts[seg].lerp(pts[seg + 1], f.clamp(0.0, 1.0)));
    }
    out.push(*pts.last().unwrap());
    Ok(PlanarCurve { samples: out })
}

/// Discretized square-root velocity function of a curve.
///
/// The all-zeros value is the null curve. The squared norm (left-rule
/// quadrature, see [`SrvCurve::norm_sq`]) of an SRV curve approximates the
/// arc length of its source.
#[derive(Debug, Clone, PartialEq)]
pub struct SrvCurve {
    values: Vec<Point>,
}

impl SrvCurve {
    pub fn new(values: Vec<Point>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Argument("SRV curve needs at least 2 samples".into()));
        }
        if values.iter().any(|p| !p.is_finite()) {
            return Err(Error::Argument("SRV values must be finite".into()));
        }
        Ok(SrvCurve { values })
    }

    pub fn null(count: usize) -> Self {
        SrvCurve {
            values: vec![Point::ZERO; count.max(2)],
        }
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_null(&self) -> bool {
        self.values.iter().all(|p| p.x == 0.0 && p.y == 0.0)
    }

    /// Squared L2 norm with the left-endpoint quadrature rule used throughout
    /// the dynamic program: sum_{i<l-1} |q_i|^2 / (l-1).
    pub fn norm_sq(&self) -> f64 {
        let dt = 1.0 / (self.values.len() - 1) as f64;
        self.values[..self.values.len() - 1]
            .iter()
            .map(|p| p.norm_sq() * dt)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Squared L2 distance (same quadrature as `norm_sq`).
    pub fn distance_sq(&self, other: &SrvCurve) -> f64 {
        assert_eq!(self.len(), other.len(), "SRV sample counts must match");
        let dt = 1.0 / (self.values.len() - 1) as f64;
        self.values[..self.values.len() - 1]
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).norm_sq() * dt)
            .sum()
    }

    pub fn distance(&self, other: &SrvCurve) -> f64 {
        self.distance_sq(other).sqrt()
    }

    /// Pointwise linear interpolation (1-u)*self + u*other.
    pub fn lerp(&self, other: &SrvCurve, u: f64) -> SrvCurve {
        assert_eq!(self.len(), other.len(), "SRV sample counts must match");
        SrvCurve {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.lerp(*b, u))
                .collect(),
        }
    }
}

/// SRV transform: q_i = v_i / sqrt(|v_i|) with v the finite-difference
/// derivative (central differences, one-sided at the endpoints). Translation
/// information is discarded.
pub fn to_srvf(curve: &PlanarCurve) -> SrvCurve {
    let pts = curve.samples();
    let l = pts.len();
    let dt = 1.0 / (l - 1) as f64;
    let mut values = Vec::with_capacity(l);
    for i in 0..l {
        let v = if i == 0 {
            (pts[1] - pts[0]) / dt
        } else if i == l - 1 {
            (pts[l - 1] - pts[l - 2]) / dt
        } else {
            (pts[i + 1] - pts[i - 1]) / (2.0 * dt)
        };
        let speed = v.norm();
        if speed > 0.0 {
            values.push(v / speed.sqrt());
        } else {
            values.push(Point::ZERO);
        }
    }
    SrvCurve { values }
}

/// Inverse SRV transform up to translation: beta(t) = origin + int q|q|,
/// integrated with the trapezoid rule.
pub fn from_srvf(q: &SrvCurve, origin: Point) -> PlanarCurve {
    let vals = q.values();
    let l = vals.len();
    let dt = 1.0 / (l - 1) as f64;
    let f: Vec<Point> = vals.iter().map(|&v| v * v.norm()).collect();
    let mut pts = Vec::with_capacity(l);
    let mut acc = origin;
    pts.push(acc);
    for i in 0..l - 1 {
        acc = acc + (f[i] + f[i + 1]) * (0.5 * dt);
        pts.push(acc);
    }
    PlanarCurve { samples: pts }
}

/// A monotone reparameterization of [0,1], stored as breakpoints on the
/// uniform grid: gamma(i/(l-1)) = breakpoints[i].
#[derive(Debug, Clone)]
pub struct Reparameterization {
    breakpoints: Vec<f64>,
}

impl Reparameterization {
    pub fn identity(count: usize) -> Self {
        let n = (count - 1) as f64;
        Reparameterization {
            breakpoints: (0..count).map(|i| i as f64 / n).collect(),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let n = (self.breakpoints.len() - 1) as f64;
        self.breakpoints
            .iter()
            .enumerate()
            .all(|(i, &g)| (g - i as f64 / n).abs() <= tol)
    }

    /// Group action (q o gamma) sqrt(gamma'), discretized with the same
    /// per-column slope convention as the dynamic program.
    pub fn apply(&self, q: &SrvCurve) -> SrvCurve {
        let l = self.breakpoints.len();
        assert_eq!(l, q.len(), "sample counts must match");
        let scale = (l - 1) as f64;
        let mut values = Vec::with_capacity(l);
        for i in 0..l {
            let slope = if i + 1 < l {
                (self.breakpoints[i + 1] - self.breakpoints[i]) * scale
            } else {
                (self.breakpoints[i] - self.breakpoints[i - 1]) * scale
            };
            let x = self.breakpoints[i] * scale;
            values.push(interp(q.values(), x) * slope.max(0.0).sqrt());
        }
        SrvCurve { values }
    }
}

fn interp(values: &[Point], x: f64) -> Point {
    let n = values.len() - 1;
    if x <= 0.0 {
        return values[0];
    }
    if x >= n as f64 {
        return values[n];
    }
    let i = x.floor() as usize;
    values[i].lerp(values[i + 1], x - i as f64)
}

/// Predecessor steps (columns, rows) of the registration lattice: coprime
/// pairs up to 6 with slopes confined to [1/3, 3]. The unit step comes first
/// so that near-ties resolve to the identity-like path.
const DP_STEPS: [(usize, usize); 17] = [
    (1, 1),
    (1, 2),
    (2, 1),
    (1, 3),
    (3, 1),
    (2, 3),
    (3, 2),
    (2, 5),
    (5, 2),
    (3, 4),
    (4, 3),
    (3, 5),
    (5, 3),
    (4, 5),
    (5, 4),
    (5, 6),
    (6, 5),
];

/// Near-tie bias: a candidate must beat the incumbent by more than this to
/// replace it, so floating-point noise cannot select a zigzag path when many
/// paths cost the same (e.g. between constant SRV curves).
fn dp_tie_eps(value: f64) -> f64 {
    1e-13 * (1.0 + value.abs())
}

const DP_MAX_SPAN: usize = 6;

/// Precomputed geometry of one lattice step: sqrt-slope plus, per covered
/// column, the integer offset and interpolation fraction of the warped
/// sample position (these depend only on the step, not on the cell).
#[derive(Clone, Copy)]
struct StepPattern {
    di: usize,
    dj: usize,
    rs: f64,
    off: [usize; DP_MAX_SPAN],
    frac: [f64; DP_MAX_SPAN],
}

fn step_patterns() -> [StepPattern; DP_STEPS.len()] {
    let mut out = [StepPattern {
        di: 0,
        dj: 0,
        rs: 0.0,
        off: [0; DP_MAX_SPAN],
        frac: [0.0; DP_MAX_SPAN],
    }; DP_STEPS.len()];
    for (n, &(di, dj)) in DP_STEPS.iter().enumerate() {
        let mut p = StepPattern {
            di,
            dj,
            rs: (dj as f64 / di as f64).sqrt(),
            off: [0; DP_MAX_SPAN],
            frac: [0.0; DP_MAX_SPAN],
        };
        for k in 0..di {
            p.off[k] = (dj * k) / di;
            p.frac[k] = (dj * k) as f64 / di as f64 - p.off[k] as f64;
        }
        out[n] = p;
    }
    out
}

/// Cost of a lattice step starting at (i0,j0): left-rule quadrature of
/// |q0 - (q1 o gamma) sqrt(gamma')|^2 over the covered columns (the trailing
/// 1/(l-1) factor is applied by the caller).
#[inline]
fn dp_step_cost(q0: &[Point], q1: &[Point], i0: usize, j0: usize, p: &StepPattern) -> f64 {
    let rs = p.rs;
    let mut acc = 0.0;
    for k in 0..p.di {
        let j = j0 + p.off[k];
        let f = p.frac[k];
        let (vx, vy) = if f == 0.0 {
            (q1[j].x, q1[j].y)
        } else {
            let a = q1[j];
            let b = q1[j + 1];
            (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
        };
        let dx = q0[i0 + k].x - rs * vx;
        let dy = q0[i0 + k].y - rs * vy;
        acc += dx * dx + dy * dy;
    }
    acc
}

struct DpResult {
    gamma: Reparameterization,
    registered: SrvCurve,
    objective: f64,
}

fn dp_register(q0: &SrvCurve, q1: &SrvCurve) -> DpResult {
    assert_eq!(q0.len(), q1.len(), "SRV sample counts must match");
    let l = q0.len();
    let n = l - 1;
    let a0 = q0.values();
    let a1 = q1.values();
    let dt = 1.0 / n as f64;
    let patterns = step_patterns();

    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut dist = vec![f64::INFINITY; (n + 1) * (n + 1)];
    let mut prev = vec![usize::MAX; (n + 1) * (n + 1)];
    dist[0] = 0.0;

    for i in 0..=n {
        for j in 0..=n {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_prev = usize::MAX;
            for p in &patterns {
                if i < p.di || j < p.dj {
                    continue;
                }
                let (i0, j0) = (i - p.di, j - p.dj);
                let base = dist[idx(i0, j0)];
                if !base.is_finite() {
                    continue;
                }
                let cand = base + dp_step_cost(a0, a1, i0, j0, p) * dt;
                if !best.is_finite() || cand < best - dp_tie_eps(best) {
                    best = cand;
                    best_prev = idx(i0, j0);
                }
            }
            dist[idx(i, j)] = best;
            prev[idx(i, j)] = best_prev;
        }
    }

    // Unreachable corners cannot happen: (1,1) steps always connect (0,0) to (n,n).
    let objective = dist[idx(n, n)];

    // Recover the lattice path, then fill gamma on every column by linear
    // interpolation between path vertices.
    let mut path = vec![(n, n)];
    let mut cur = idx(n, n);
    while cur != 0 {
        cur = prev[cur];
        path.push((cur / (n + 1), cur % (n + 1)));
    }
    path.reverse();

    let mut gamma_idx = vec![0.0f64; l];
    for w in path.windows(2) {
        let (i0, j0) = w[0];
        let (i1, j1) = w[1];
        let s = (j1 - j0) as f64 / (i1 - i0) as f64;
        for i in i0..i1 {
            gamma_idx[i] = j0 as f64 + s * (i - i0) as f64;
        }
    }
    gamma_idx[n] = n as f64;

    let scale = 1.0 / n as f64;
    let gamma = Reparameterization {
        breakpoints: gamma_idx.iter().map(|&g| g * scale).collect(),
    };
    let registered = gamma.apply(q1);
    DpResult {
        gamma,
        registered,
        objective,
    }
}

/// Optimal reparameterization of `q1` onto `q0` by dynamic programming over
/// the slope-constrained lattice (O(l^2) cells). Returns the
/// reparameterization and the registered copy of `q1`.
pub fn register(q0: &SrvCurve, q1: &SrvCurve) -> (Reparameterization, SrvCurve) {
    let r = dp_register(q0, q1);
    (r.gamma, r.registered)
}

/// Brute-force registration objective: exhaustive search over every monotone
/// lattice path built from the same step set as the dynamic program. Only
/// feasible for small sample counts; serves as an independent check on
/// [`register`].
pub fn register_exhaustive(q0: &SrvCurve, q1: &SrvCurve) -> f64 {
    assert_eq!(q0.len(), q1.len(), "SRV sample counts must match");
    let n = q0.len() - 1;
    let a0 = q0.values();
    let a1 = q1.values();
    let dt = 1.0 / n as f64;
    let patterns = step_patterns();
    let mut best = f64::INFINITY;
    #[allow(clippy::too_many_arguments)]
    fn go(
        a0: &[Point],
        a1: &[Point],
        patterns: &[StepPattern],
        dt: f64,
        n: usize,
        i: usize,
        j: usize,
        acc: f64,
        best: &mut f64,
    ) {
        if acc >= *best {
            return;
        }
        if i == n && j == n {
            *best = acc;
            return;
        }
        for p in patterns {
            let (i1, j1) = (i + p.di, j + p.dj);
            if i1 > n || j1 > n {
                continue;
            }
            let c = dp_step_cost(a0, a1, i, j, p) * dt;
            go(a0, a1, patterns, dt, n, i1, j1, acc + c, best);
        }
    }
    go(a0, a1, &patterns, dt, n, 0, 0, 0.0, &mut best);
    best
}

/// Elastic distance between SRV curves. The dynamic program is directionally
/// asymmetric, so both directions are evaluated and the minimum returned,
/// which keeps the distance symmetric in its arguments.
pub fn d_srv(q0: &SrvCurve, q1: &SrvCurve) -> f64 {
    let fwd = dp_register(q0, q1).objective;
    let bwd = dp_register(q1, q0).objective;
    fwd.min(bwd).max(0.0).sqrt()
}

/// Point on the SRV geodesic between two registered curves: straight-line
/// interpolation in SRV space.
pub fn srv_geodesic(q0: &SrvCurve, q1: &SrvCurve, u: f64) -> SrvCurve {
    if u == 0.0 {
        return q0.clone();
    }
    if u == 1.0 {
        return q1.clone();
    }
    q0.lerp(q1, u)
}

/// Karcher mean of SRV curves under repeated register-and-average sweeps.
/// The Frechet objective is tracked and an iteration that increases it beyond
/// a 1e-6 relative tolerance is rejected, terminating the loop.
pub fn karcher_mean_curves(curves: &[SrvCurve], tol: f64, max_iter: usize) -> Result<SrvCurve> {
    if curves.is_empty() {
        return Err(Error::Argument("karcher mean of zero curves".into()));
    }
    let l = curves[0].len();
    if curves.iter().any(|c| c.len() != l) {
        return Err(Error::Argument("curves must share a sample count".into()));
    }
    let mut mean = curves[0].clone();
    if curves.len() == 1 {
        return Ok(mean);
    }
    let mut prev_obj = f64::INFINITY;
    for _ in 0..max_iter {
        let registered: Vec<SrvCurve> = curves.iter().map(|c| register(&mean, c).1).collect();
        let inv = 1.0 / registered.len() as f64;
        let mut vals = vec![Point::ZERO; l];
        for r in &registered {
            for (acc, v) in vals.iter_mut().zip(r.values()) {
                *acc = *acc + *v;
            }
        }
        for v in vals.iter_mut() {
            *v = *v * inv;
        }
        let next = SrvCurve { values: vals };
        let obj: f64 = curves.iter().map(|c| d_srv(&next, c).powi(2)).sum();
        if obj > prev_obj * (1.0 + 1e-6) + 1e-12 {
            break;
        }
        let change = next.distance(&mean);
        mean = next;
        prev_obj = obj;
        if change < tol {
            break;
        }
    }
    Ok(mean)
}

/// Apply the unique rotation + uniform scale + translation taking the curve's
/// endpoints to (p, q).
pub fn fit_to_endpoints(curve: &PlanarCurve, p: Point, q: Point) -> Result<PlanarCurve> {
    let a = curve.first();
    let b = curve.last();
    if b.distance(a) < 1e-12 {
        return Err(Error::Degenerate(
            "curve endpoints coincide; cannot fit".into(),
        ));
    }
    if q.distance(p) < 1e-12 {
        return Err(Error::Degenerate("target endpoints coincide".into()));
    }
    let z = (q - p).complex_div(b - a);
    let samples = curve
        .samples()
        .iter()
        .map(|&s| p + z.complex_mul(s - a))
        .collect();
    Ok(PlanarCurve { samples })
}
