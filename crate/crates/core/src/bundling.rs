//! Force-directed edge bundling over a live layout.
//!
//! Each edge is subdivided into control points. Interior points are pulled
//! by springs toward their neighbors on the same edge and toward the
//! matching points of compatible edges. Endpoints follow the nodes.

use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;

/// Bundling is refused above this many edges.
pub const MAX_BUNDLED_EDGES: usize = 500;
/// Edge pairs less compatible than this do not attract.
pub const COMPATIBILITY_THRESHOLD: f64 = 0.05;
/// Iterations per cycle; each cycle doubles the subdivision.
pub const CYCLE_ITERATIONS: [usize; 6] = [50, 33, 22, 15, 10, 7];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BundlingError {
    #[error("edge bundling disabled: {edges} edges exceeds the limit of {MAX_BUNDLED_EDGES}")]
    Disabled { edges: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleMode {
    On,
    Off,
    /// On exactly when the graph has at most [`MAX_BUNDLED_EDGES`] edges.
    Auto,
}

impl FromStr for BundleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "on" => Ok(BundleMode::On),
            "off" => Ok(BundleMode::Off),
            "auto" => Ok(BundleMode::Auto),
            other => Err(format!("unknown bundle mode `{other}` (expected on|off|auto)")),
        }
    }
}

type Point = [f64; 2];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn midpoint(a: Point, b: Point) -> Point {
    lerp(a, b, 0.5)
}

/// Visibility of segment `q` from segment `p`: how much of `p`'s extent the
/// projection of `q` onto `p`'s line covers, around `p`'s midpoint.
fn visibility(p: (Point, Point), q: (Point, Point)) -> f64 {
    let dir = sub(p.1, p.0);
    let len2 = dir[0] * dir[0] + dir[1] * dir[1];
    let project = |x: Point| {
        let t = ((x[0] - p.0[0]) * dir[0] + (x[1] - p.0[1]) * dir[1]) / len2;
        lerp(p.0, p.1, t)
    };
    let (i0, i1) = (project(q.0), project(q.1));
    let span = norm(sub(i1, i0));
    if span == 0.0 {
        return 0.0;
    }
    let offset = norm(sub(midpoint(p.0, p.1), midpoint(i0, i1)));
    (1.0 - 2.0 * offset / span).max(0.0)
}

/// Product of the angle, scale, position and visibility compatibilities of
/// two segments; 0 when either is degenerate.
pub fn compatibility(p: (Point, Point), q: (Point, Point)) -> f64 {
    let (dp, dq) = (sub(p.1, p.0), sub(q.1, q.0));
    let (lp, lq) = (norm(dp), norm(dq));
    if lp == 0.0 || lq == 0.0 {
        return 0.0;
    }
    let angle = ((dp[0] * dq[0] + dp[1] * dq[1]) / (lp * lq)).abs().min(1.0);
    let avg = (lp + lq) / 2.0;
    let scale = 2.0 / (avg / lp.min(lq) + lp.max(lq) / avg);
    let gap = norm(sub(midpoint(p.0, p.1), midpoint(q.0, q.1)));
    let position = avg / (avg + gap);
    let vis = visibility(p, q).min(visibility(q, p));
    angle * scale * position * vis
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BundledEdge {
    pub edge: usize,
    /// Endpoints included: `2^level + 1` points in all.
    pub control_points: Vec<Point>,
    pub subdivision_level: u32,
}

impl BundledEdge {
    fn new(edge: usize, a: Point, b: Point, level: u32) -> Self {
        let segments = 1usize << level;
        let control_points = (0..=segments)
            .map(|i| lerp(a, b, i as f64 / segments as f64))
            .collect();
        BundledEdge {
            edge,
            control_points,
            subdivision_level: level,
        }
    }

    pub fn interior_count(&self) -> usize {
        self.control_points.len() - 2
    }

    fn endpoints(&self) -> (Point, Point) {
        (self.control_points[0], *self.control_points.last().unwrap())
    }

    /// Inserts a midpoint into every segment.
    fn subdivide(&mut self) {
        let mut next = Vec::with_capacity(2 * self.control_points.len() - 1);
        for pair in self.control_points.windows(2) {
            next.push(pair[0]);
            next.push(midpoint(pair[0], pair[1]));
        }
        next.push(*self.control_points.last().unwrap());
        self.control_points = next;
        self.subdivision_level += 1;
    }
}

/// Subdivided edges of one graph, all at the same level.
pub fn init_bundles(graph: &Graph, positions: &[Point], level: u32) -> Result<Vec<BundledEdge>, BundlingError> {
    if graph.edge_count() > MAX_BUNDLED_EDGES {
        return Err(BundlingError::Disabled {
            edges: graph.edge_count(),
        });
    }
    Ok(graph
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| BundledEdge::new(i, positions[e.source], positions[e.target], level))
        .collect())
}

/// One relaxation pass. Endpoints are first re-pinned to the current node
/// positions; interior points then move by `step_size` times the sum of the
/// spring pull `stiffness * (prev + next - 2 p)` and the compatibility-weighted
/// mean offset toward matching points on compatible edges.
pub fn bundle_step(bundles: &mut [BundledEdge], graph: &Graph, positions: &[Point], stiffness: f64, step_size: f64) {
    for b in bundles.iter_mut() {
        let e = &graph.edges()[b.edge];
        let last = b.control_points.len() - 1;
        b.control_points[0] = positions[e.source];
        b.control_points[last] = positions[e.target];
    }
    let segments: Vec<(Point, Point)> = bundles.iter().map(BundledEdge::endpoints).collect();
    let mut partners: Vec<Vec<(usize, f64)>> = vec![Vec::new(); bundles.len()];
    for i in 0..bundles.len() {
        for j in (i + 1)..bundles.len() {
            let c = compatibility(segments[i], segments[j]);
            if c >= COMPATIBILITY_THRESHOLD {
                partners[i].push((j, c));
                partners[j].push((i, c));
            }
        }
    }

    let snapshot: Vec<Vec<Point>> = bundles.iter().map(|b| b.control_points.clone()).collect();
    for (i, b) in bundles.iter_mut().enumerate() {
        let pts = &snapshot[i];
        let (s, t) = segments[i];
        let flipped: Vec<bool> = partners[i]
            .iter()
            .map(|&(j, _)| {
                // Match points by direction so opposite-oriented edges pair up.
                let (qs, qt) = segments[j];
                norm(sub(s, qs)) + norm(sub(t, qt)) > norm(sub(s, qt)) + norm(sub(t, qs))
            })
            .collect();
        let total: f64 = partners[i].iter().map(|&(_, c)| c).sum();
        for k in 1..pts.len() - 1 {
            let p = pts[k];
            let mut force = [
                stiffness * (pts[k - 1][0] + pts[k + 1][0] - 2.0 * p[0]),
                stiffness * (pts[k - 1][1] + pts[k + 1][1] - 2.0 * p[1]),
            ];
            if total > 0.0 {
                let mut pull = [0.0, 0.0];
                for (&(j, c), &flip) in partners[i].iter().zip(&flipped) {
                    let other = &snapshot[j];
                    if other.len() != pts.len() {
                        continue;
                    }
                    let q = if flip { other[other.len() - 1 - k] } else { other[k] };
                    pull[0] += c * (q[0] - p[0]);
                    pull[1] += c * (q[1] - p[1]);
                }
                let norm_by = total.max(1.0);
                force[0] += pull[0] / norm_by;
                force[1] += pull[1] / norm_by;
            }
            b.control_points[k] = [p[0] + step_size * force[0], p[1] + step_size * force[1]];
        }
    }
}

/// Cycle schedule driver: runs the per-cycle iteration counts, halving the
/// step size and doubling the subdivision between cycles.
#[derive(Clone, Debug)]
pub struct Bundler {
    pub bundles: Vec<BundledEdge>,
    pub stiffness: f64,
    pub step_size: f64,
    cycle: usize,
    iteration: usize,
}

impl Bundler {
    pub fn new(graph: &Graph, positions: &[Point]) -> Result<Self, BundlingError> {
        Ok(Bundler {
            bundles: init_bundles(graph, positions, 1)?,
            stiffness: 0.1,
            step_size: 0.5,
            cycle: 0,
            iteration: 0,
        })
    }

    /// Whether `mode` asks for bundling on this graph. An explicit `On` still
    /// goes through [`Bundler::new`], which refuses oversized graphs.
    pub fn requested(mode: BundleMode, graph: &Graph) -> bool {
        match mode {
            BundleMode::On => true,
            BundleMode::Off => false,
            BundleMode::Auto => graph.edge_count() <= MAX_BUNDLED_EDGES,
        }
    }

    /// Advances one iteration of the schedule. Once the schedule is finished,
    /// each call still relaxes at the final level so bundles keep tracking
    /// the moving layout.
    pub fn tick(&mut self, graph: &Graph, positions: &[Point]) {
        let step = self.step_size / (1u32 << self.cycle.min(CYCLE_ITERATIONS.len() - 1)) as f64;
        bundle_step(&mut self.bundles, graph, positions, self.stiffness, step);
        if self.cycle >= CYCLE_ITERATIONS.len() {
            return;
        }
        self.iteration += 1;
        if self.iteration == CYCLE_ITERATIONS[self.cycle] {
            self.iteration = 0;
            self.cycle += 1;
            if self.cycle < CYCLE_ITERATIONS.len() {
                self.bundles.iter_mut().for_each(BundledEdge::subdivide);
            }
        }
    }

    /// Runs the whole schedule against fixed positions.
    pub fn run_schedule(&mut self, graph: &Graph, positions: &[Point]) {
        let remaining: usize = CYCLE_ITERATIONS.iter().sum();
        for _ in 0..remaining {
            self.tick(graph, positions);
        }
    }
}
