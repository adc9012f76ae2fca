//! Quadtree approximation of the all-pairs repulsion
//! `strength * (p_i - p_j) / |p_i - p_j|^2`.
//!
//! Far cells are summarized by a complex multipole expansion about their
//! center of mass: writing points as complex numbers, the repulsion on `z` is
//! the conjugate of `sum_j 1 / (z - w_j)`, which expands into
//! `sum_k M_k / (z - c)^(k+1)` with moments `M_k = sum_j (w_j - c)^k`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Highest moment kept per cell. `M_1` vanishes about the center of mass.
const ORDER: usize = 6;
const LEAF_CAPACITY: usize = 4;
const MAX_DEPTH: usize = 48;
/// Offset scale applied to exactly coincident points.
pub const JITTER: f64 = 1e-6;
/// Below this many queries the evaluation stays on the calling thread.
const PARALLEL_THRESHOLD: usize = 512;

#[derive(Clone, Debug)]
struct Cell {
    center: Complex64,
    mass: f64,
    width: f64,
    radius: f64,
    moments: [Complex64; ORDER + 1],
    children: [u32; 4],
    start: u32,
    end: u32,
}

impl Cell {
    fn is_leaf(&self) -> bool {
        self.children.iter().all(|&c| c == 0)
    }
}

/// Spatial tree over a fixed point set.
#[derive(Clone, Debug)]
pub struct QuadTree {
    cells: Vec<Cell>,
    order: Vec<u32>,
    points: Vec<Complex64>,
}

impl QuadTree {
    pub fn new(points: &[[f64; 2]]) -> Self {
        let points: Vec<Complex64> = points.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut cells = Vec::new();
        if !points.is_empty() {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in &points {
                lo = [lo[0].min(p.re), lo[1].min(p.im)];
                hi = [hi[0].max(p.re), hi[1].max(p.im)];
            }
            let width = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
            let origin = Complex64::new(lo[0], lo[1]);
            build(&points, &mut order, &mut cells, 0, points.len(), origin, width, 0);
        }
        QuadTree {
            cells,
            order,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Repulsion on `query` from every tree point except index `skip`.
    /// Points at zero distance contribute nothing.
    pub fn force_on(&self, query: [f64; 2], skip: Option<usize>, theta: f64) -> [f64; 2] {
        if self.cells.is_empty() {
            return [0.0, 0.0];
        }
        let z = Complex64::new(query[0], query[1]);
        let mut direct = [0.0, 0.0];
        let mut far = Complex64::new(0.0, 0.0);
        let mut stack = vec![0u32];
        while let Some(c) = stack.pop() {
            let cell = &self.cells[c as usize];
            let offset = z - cell.center;
            let dist = offset.norm();
            // `radius < dist` keeps the expansion convergent and also rules
            // out the query being one of the cell's own points.
            if !cell.is_leaf() && cell.width < theta * dist && cell.radius < dist {
                let inv = offset.inv();
                let mut sum = Complex64::new(cell.mass, 0.0) * inv;
                // M_1 = 0, so the series continues at M_2 / u^3.
                let mut power = inv * inv;
                for k in 2..=ORDER {
                    power *= inv;
                    sum += cell.moments[k] * power;
                }
                far += sum;
                continue;
            }
            if cell.is_leaf() {
                for &j in &self.order[cell.start as usize..cell.end as usize] {
                    if Some(j as usize) == skip {
                        continue;
                    }
                    let d = z - self.points[j as usize];
                    let r2 = d.norm_sqr();
                    if r2 > 0.0 {
                        direct[0] += d.re / r2;
                        direct[1] += d.im / r2;
                    }
                }
            } else {
                stack.extend(cell.children.iter().copied().filter(|&ch| ch != 0));
            }
        }
        [direct[0] + far.re, direct[1] - far.im]
    }
}

#[allow(clippy::too_many_arguments)]
fn build(
    points: &[Complex64],
    order: &mut [u32],
    cells: &mut Vec<Cell>,
    start: usize,
    end: usize,
    origin: Complex64,
    width: f64,
    depth: usize,
) -> u32 {
    let members = &order[start..end];
    let mass = members.len() as f64;
    let center = members
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &i| acc + points[i as usize])
        / mass;
    let mut moments = [Complex64::new(0.0, 0.0); ORDER + 1];
    let mut radius = 0.0f64;
    for &i in members {
        let delta = points[i as usize] - center;
        radius = radius.max(delta.norm());
        let mut power = delta;
        for moment in moments.iter_mut().skip(2) {
            power *= delta;
            *moment += power;
        }
    }
    let id = cells.len() as u32;
    cells.push(Cell {
        center,
        mass,
        width,
        radius,
        moments,
        children: [0; 4],
        start: start as u32,
        end: end as u32,
    });
    if end - start <= LEAF_CAPACITY || depth >= MAX_DEPTH || radius == 0.0 {
        return id;
    }

    let half = width / 2.0;
    let mid = origin + Complex64::new(half, half);
    let quadrant = |p: Complex64| (usize::from(p.re >= mid.re)) | (usize::from(p.im >= mid.im) << 1);
    order[start..end].sort_by_key(|&i| quadrant(points[i as usize]));
    let mut children = [0u32; 4];
    let mut lo = start;
    for (q, child) in children.iter_mut().enumerate() {
        let hi = lo + order[lo..end]
            .iter()
            .take_while(|&&i| quadrant(points[i as usize]) == q)
            .count();
        if hi > lo {
            let child_origin = origin
                + Complex64::new(
                    if q & 1 == 1 { half } else { 0.0 },
                    if q & 2 == 2 { half } else { 0.0 },
                );
            *child = build(points, order, cells, lo, hi, child_origin, half, depth + 1);
        }
        lo = hi;
    }
    cells[id as usize].children = children;
    id
}

/// Nudges exactly coincident points apart by at most [`JITTER`] per axis.
/// The first point of each coincident group stays put. Returns whether
/// anything moved.
pub fn jitter_coincident(points: &mut [[f64; 2]], seed: u64) -> bool {
    let original = points.to_vec();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        original[a][0]
            .total_cmp(&original[b][0])
            .then(original[a][1].total_cmp(&original[b][1]))
            .then(a.cmp(&b))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moved = false;
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if original[a] == original[b] {
            points[b][0] += rng.gen_range(-JITTER..=JITTER);
            points[b][1] += rng.gen_range(-JITTER..=JITTER);
            moved = true;
        }
    }
    moved
}

/// Repulsion on each point from all others. `theta = 0` evaluates the exact
/// sum. Coincident points are first separated with seeded jitter.
pub fn pairwise_repulsion(points: &[[f64; 2]], theta: f64, strength: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut jittered = points.to_vec();
    jitter_coincident(&mut jittered, seed);
    let tree = QuadTree::new(&jittered);
    repulsion_from_tree(&tree, &jittered, true, theta, strength)
}

/// Evaluates `tree` on each query point. With `self_tree` the queries are the
/// tree's own points in order, and each skips itself.
pub fn repulsion_from_tree(
    tree: &QuadTree,
    queries: &[[f64; 2]],
    self_tree: bool,
    theta: f64,
    strength: f64,
) -> Vec<[f64; 2]> {
    let eval = |(i, q): (usize, &[f64; 2])| {
        let f = tree.force_on(*q, self_tree.then_some(i), theta);
        [strength * f[0], strength * f[1]]
    };
    if queries.len() >= PARALLEL_THRESHOLD {
        queries.par_iter().enumerate().map(eval).collect()
    } else {
        queries.iter().enumerate().map(eval).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(points: &[[f64; 2]], strength: f64) -> Vec<[f64; 2]> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut f = [0.0, 0.0];
                for (j, q) in points.iter().enumerate() {
                    if i != j {
                        let d = [p[0] - q[0], p[1] - q[1]];
                        let r2 = d[0] * d[0] + d[1] * d[1];
                        f[0] += strength * d[0] / r2;
                        f[1] += strength * d[1] / r2;
                    }
                }
                f
            })
            .collect()
    }

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)])
            .collect()
    }

    fn rel_err(a: [f64; 2], b: [f64; 2]) -> f64 {
        let diff = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        diff / (b[0].powi(2) + b[1].powi(2)).sqrt()
    }

    #[test]
    fn two_points_opposite() {
        let f = pairwise_repulsion(&[[0.0, 0.0], [2.0, 0.0]], 0.7, 3.0, 1);
        assert_eq!(f[0], [-1.5, 0.0]);
        assert_eq!(f[1], [1.5, 0.0]);
    }

    #[test]
    fn exact_at_zero_theta() {
        let pts = random_points(50, 3);
        let exact = naive(&pts, 2.0);
        let tree = pairwise_repulsion(&pts, 0.0, 2.0, 0);
        for (a, b) in tree.iter().zip(&exact) {
            assert!(rel_err(*a, *b) < 1e-9);
        }
    }

    #[test]
    fn approximate_within_tolerance() {
        let pts = random_points(1000, 5);
        let exact = naive(&pts, 1.0);
        let approx = pairwise_repulsion(&pts, 0.7, 1.0, 0);
        let worst = approx
            .iter()
            .zip(&exact)
            .map(|(a, b)| rel_err(*a, *b))
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "worst relative error {worst}");
    }

    #[test]
    fn coincident_points_are_separated() {
        let mut pts = vec![[1.0, 1.0]; 5];
        assert!(jitter_coincident(&mut pts, 9));
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert_ne!(pts[i], pts[j]);
            }
        }
        assert_eq!(pts[0], [1.0, 1.0]);
        let f = pairwise_repulsion(&[[1.0, 1.0]; 5], 0.5, 1.0, 9);
        assert!(f.iter().all(|v| v[0].is_finite() && v[1].is_finite()));
    }

    #[test]
    fn cross_tree_has_no_self_term() {
        let sources = [[0.0, 0.0], [0.0, 1.0]];
        let tree = QuadTree::new(&sources);
        let f = repulsion_from_tree(&tree, &[[3.0, 0.5]], false, 0.0, 1.0);
        let expected = naive(&[[3.0, 0.5], [0.0, 0.0], [0.0, 1.0]], 1.0)[0];
        assert!(rel_err(f[0], expected) < 1e-12);
    }
}
