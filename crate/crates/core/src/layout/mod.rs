//! Force simulation: Fruchterman-Reingold style repulsion and edge springs,
//! a centering pull, plus the two persistence-driven forces: contraction
//! springs between the cause-of-death nodes of low-persistence bars and
//! extra repulsion between the two node subsets of selected bars.

pub mod barnes_hut;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::persistence::Barcode;
use barnes_hut::{jitter_coincident, repulsion_from_tree, QuadTree};

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("non-finite position or force at node `{node}` (iteration {iteration})")]
    NonFinite { node: String, iteration: u64 },
    #[error("invalid force config: {0}")]
    InvalidConfig(String),
    #[error("unknown bar id {0} in selection")]
    UnknownBar(usize),
    #[error("layout has {found} nodes, graph has {expected}")]
    SizeMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, LayoutError>;

/// Tunable force constants. Distances are in display units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForceConfig {
    pub repulsion_strength: f64,
    pub spring_stiffness: f64,
    pub spring_rest_length: f64,
    pub centering_strength: f64,
    /// Contraction spring stiffness as a multiple of `spring_stiffness`.
    pub contraction_stiffness_multiplier: f64,
    pub ph_repulsion_strength: f64,
    pub barnes_hut_theta: f64,
    pub time_step: f64,
    pub velocity_damping: f64,
    /// Largest distance a node may move in one iteration.
    pub max_displacement: f64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        let repulsion_strength = 2000.0;
        ForceConfig {
            repulsion_strength,
            spring_stiffness: 0.05,
            spring_rest_length: 30.0,
            centering_strength: 0.005,
            contraction_stiffness_multiplier: 20.0,
            ph_repulsion_strength: 10.0 * repulsion_strength,
            barnes_hut_theta: 0.7,
            time_step: 1.0,
            velocity_damping: 0.85,
            max_displacement: 10.0,
        }
    }
}

impl ForceConfig {
    pub const KEYS: [&'static str; 10] = [
        "repulsion_strength",
        "spring_stiffness",
        "spring_rest_length",
        "centering_strength",
        "contraction_stiffness_multiplier",
        "ph_repulsion_strength",
        "barnes_hut_theta",
        "time_step",
        "velocity_damping",
        "max_displacement",
    ];

    fn field_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "repulsion_strength" => &mut self.repulsion_strength,
            "spring_stiffness" => &mut self.spring_stiffness,
            "spring_rest_length" => &mut self.spring_rest_length,
            "centering_strength" => &mut self.centering_strength,
            "contraction_stiffness_multiplier" => &mut self.contraction_stiffness_multiplier,
            "ph_repulsion_strength" => &mut self.ph_repulsion_strength,
            "barnes_hut_theta" => &mut self.barnes_hut_theta,
            "time_step" => &mut self.time_step,
            "velocity_damping" => &mut self.velocity_damping,
            "max_displacement" => &mut self.max_displacement,
            _ => return None,
        })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.clone().field_mut(key).map(|v| *v)
    }

    /// Sets one field by name and re-validates.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let mut next = self.clone();
        *next
            .field_mut(key)
            .ok_or_else(|| LayoutError::InvalidConfig(format!("unknown key `{key}`")))? = value;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for key in Self::KEYS {
            let value = self.get(key).expect("known key");
            let ok = match key {
                "velocity_damping" => value > 0.0 && value < 1.0,
                "barnes_hut_theta" => (0.0..=1.0).contains(&value),
                _ => value > 0.0 && value.is_finite(),
            };
            if !ok {
                return Err(LayoutError::InvalidConfig(format!("{key} = {value} out of range")));
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` file; `#` starts a comment. Missing keys
    /// keep their defaults.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut config = ForceConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LayoutError::InvalidConfig(format!("line {}: expected key=value", i + 1))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                LayoutError::InvalidConfig(format!("line {}: `{}` is not a number", i + 1, value.trim()))
            })?;
            let key = key.trim();
            *config.field_mut(key).ok_or_else(|| {
                LayoutError::InvalidConfig(format!("line {}: unknown key `{key}`", i + 1))
            })? = value;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_key_values(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("known key")))
            .collect()
    }
}

/// The user's persistence-feature choices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Bars with persistence measure strictly below this get contraction
    /// springs.
    pub contraction_threshold: f64,
    pub repulsed_bars: BTreeSet<usize>,
}

impl Selection {
    /// Flips repulsion for one bar; returns whether it is now repulsed.
    pub fn toggle_repulsion(&mut self, bar: usize) -> bool {
        if !self.repulsed_bars.remove(&bar) {
            self.repulsed_bars.insert(bar);
            true
        } else {
            false
        }
    }

    pub fn contracted<'a>(&self, barcode: &'a Barcode) -> impl Iterator<Item = &'a crate::persistence::Bar> + 'a {
        let threshold = self.contraction_threshold;
        barcode
            .bars()
            .iter()
            .filter(move |b| b.persistence_measure < threshold)
    }

    pub fn validate(&self, barcode: &Barcode) -> Result<()> {
        match self.repulsed_bars.iter().find(|&&b| b >= barcode.len()) {
            Some(&bad) => Err(LayoutError::UnknownBar(bad)),
            None if self.contraction_threshold >= 0.0 => Ok(()),
            None => Err(LayoutError::InvalidConfig("negative contraction threshold".into())),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.repulsed_bars.is_empty() && self.contraction_threshold <= 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub iteration: u64,
    pub rng_seed: u64,
}

impl LayoutState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum()
    }

    pub fn snapshot(&self, graph: &Graph) -> LayoutSnapshot {
        LayoutSnapshot {
            iteration: self.iteration,
            positions: self
                .positions
                .iter()
                .enumerate()
                .map(|(i, p)| (graph.node_id(i).to_string(), *p))
                .collect(),
        }
    }
}

/// Layout snapshot export: `{"iteration":..,"positions":{id:[x,y]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutSnapshot {
    pub iteration: u64,
    pub positions: BTreeMap<String, [f64; 2]>,
}

/// Seeded uniform placement inside a disc of radius `sqrt(|V|)`.
pub fn init_layout(graph: &Graph, seed: u64) -> LayoutState {
    let n = graph.node_count();
    let scale = (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| {
            let r = scale * rng.gen::<f64>().sqrt();
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            [r * angle.cos(), r * angle.sin()]
        })
        .collect();
    LayoutState {
        positions,
        velocities: vec![[0.0, 0.0]; n],
        iteration: 0,
        rng_seed: seed,
    }
}

/// Everything a step reads besides the state itself.
#[derive(Clone, Copy)]
pub struct ForceContext<'a> {
    pub graph: &'a Graph,
    pub barcode: &'a Barcode,
    pub selection: &'a Selection,
    pub config: &'a ForceConfig,
    /// Per-edge spring rest lengths; `None` uses `spring_rest_length`.
    pub rest_lengths: Option<&'a [f64]>,
}

/// Which force terms to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForceTerms {
    pub repulsion: bool,
    pub springs: bool,
    pub centering: bool,
    pub contraction: bool,
    pub ph_repulsion: bool,
}

impl Default for ForceTerms {
    fn default() -> Self {
        ForceTerms {
            repulsion: true,
            springs: true,
            centering: true,
            contraction: true,
            ph_repulsion: true,
        }
    }
}

/// Tally of the work done while evaluating forces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForceTally {
    pub tree_passes: usize,
    pub edge_springs: usize,
    pub contraction_springs: usize,
    pub jittered: bool,
}

fn add(a: &mut [f64; 2], f: [f64; 2]) {
    a[0] += f[0];
    a[1] += f[1];
}

/// Net force on every node for the given positions.
pub fn compute_forces(
    positions: &[[f64; 2]],
    ctx: &ForceContext<'_>,
    terms: ForceTerms,
    jitter_seed: u64,
) -> (Vec<[f64; 2]>, ForceTally) {
    let cfg = ctx.config;
    let mut tally = ForceTally::default();
    let mut points = positions.to_vec();
    tally.jittered = jitter_coincident(&mut points, jitter_seed);
    let mut forces = vec![[0.0, 0.0]; points.len()];

    if terms.repulsion {
        let tree = QuadTree::new(&points);
        let rep = repulsion_from_tree(&tree, &points, true, cfg.barnes_hut_theta, cfg.repulsion_strength);
        for (f, r) in forces.iter_mut().zip(rep) {
            add(f, r);
        }
        tally.tree_passes += 1;
    }

    if terms.springs {
        for (e, edge) in ctx.graph.edges().iter().enumerate() {
            let rest = ctx.rest_lengths.map_or(cfg.spring_rest_length, |r| r[e]);
            let f = spring(points[edge.source], points[edge.target], cfg.spring_stiffness, rest);
            add(&mut forces[edge.source], f);
            add(&mut forces[edge.target], [-f[0], -f[1]]);
            tally.edge_springs += 1;
        }
    }

    if terms.centering {
        for (f, p) in forces.iter_mut().zip(&points) {
            add(f, [-cfg.centering_strength * p[0], -cfg.centering_strength * p[1]]);
        }
    }

    if terms.contraction {
        let stiffness = cfg.contraction_stiffness_multiplier * cfg.spring_stiffness;
        for bar in ctx.selection.contracted(ctx.barcode) {
            let f = spring(points[bar.cause_u], points[bar.cause_v], stiffness, 0.0);
            add(&mut forces[bar.cause_u], f);
            add(&mut forces[bar.cause_v], [-f[0], -f[1]]);
            tally.contraction_springs += 1;
        }
    }

    if terms.ph_repulsion {
        for &id in &ctx.selection.repulsed_bars {
            let Ok(subsets) = ctx.barcode.subsets(id) else {
                continue;
            };
            for (sources, targets) in [
                (&subsets.subset_u, &subsets.subset_v),
                (&subsets.subset_v, &subsets.subset_u),
            ] {
                let source_pts: Vec<[f64; 2]> = sources.iter().map(|&i| points[i]).collect();
                let target_pts: Vec<[f64; 2]> = targets.iter().map(|&i| points[i]).collect();
                let tree = QuadTree::new(&source_pts);
                let rep = repulsion_from_tree(
                    &tree,
                    &target_pts,
                    false,
                    cfg.barnes_hut_theta,
                    cfg.ph_repulsion_strength,
                );
                for (&i, r) in targets.iter().zip(rep) {
                    add(&mut forces[i], r);
                }
                tally.tree_passes += 1;
            }
        }
    }

    (forces, tally)
}

/// Hooke force on the point at `from`, pulling it toward `rest` distance
/// from `to`.
fn spring(from: [f64; 2], to: [f64; 2], stiffness: f64, rest: f64) -> [f64; 2] {
    let d = [to[0] - from[0], to[1] - from[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if rest == 0.0 {
        return [stiffness * d[0], stiffness * d[1]];
    }
    if len == 0.0 {
        return [0.0, 0.0];
    }
    let scale = stiffness * (len - rest) / len;
    [scale * d[0], scale * d[1]]
}

/// Per-step diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub tally: ForceTally,
    pub kinetic_energy: f64,
}

/// One damped explicit-Euler iteration. Forces are computed from the
/// current positions before any node moves.
pub fn step(state: &mut LayoutState, ctx: &ForceContext<'_>) -> Result<StepReport> {
    let n = ctx.graph.node_count();
    if state.len() != n {
        return Err(LayoutError::SizeMismatch {
            expected: n,
            found: state.len(),
        });
    }
    let cfg = ctx.config;
    let jitter_seed = state.rng_seed ^ state.iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let (forces, tally) = compute_forces(&state.positions, ctx, ForceTerms::default(), jitter_seed);

    let dt = cfg.time_step;
    for i in 0..n {
        let f = forces[i];
        if !(f[0].is_finite() && f[1].is_finite()) {
            return Err(LayoutError::NonFinite {
                node: ctx.graph.node_id(i).to_string(),
                iteration: state.iteration,
            });
        }
        let v = &mut state.velocities[i];
        v[0] = cfg.velocity_damping * (v[0] + f[0] * dt);
        v[1] = cfg.velocity_damping * (v[1] + f[1] * dt);
        let mut disp = [v[0] * dt, v[1] * dt];
        let len = (disp[0] * disp[0] + disp[1] * disp[1]).sqrt();
        if len > cfg.max_displacement {
            let s = cfg.max_displacement / len;
            disp = [disp[0] * s, disp[1] * s];
            *v = [disp[0] / dt, disp[1] / dt];
        }
        let p = &mut state.positions[i];
        p[0] += disp[0];
        p[1] += disp[1];
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(LayoutError::NonFinite {
                node: ctx.graph.node_id(i).to_string(),
                iteration: state.iteration,
            });
        }
    }
    state.iteration += 1;
    Ok(StepReport {
        tally,
        kinetic_energy: state.kinetic_energy(),
    })
}

/// Applies [`step`] `iterations` times.
pub fn run(state: &mut LayoutState, ctx: &ForceContext<'_>, iterations: usize) -> Result<()> {
    for _ in 0..iterations {
        step(state, ctx)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphFormat;
    use crate::persistence::compute_barcode;
    use crate::weighting::lengths_from_weights;

    fn setup(text: &str) -> (Graph, Barcode) {
        let g = Graph::parse(text, GraphFormat::EdgeList).unwrap().graph;
        let bc = compute_barcode(&lengths_from_weights(&g).unwrap());
        (g, bc)
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let edges: Vec<(usize, usize)> = (1..1000).map(|i| (i - 1, i)).collect();
        let g = Graph::from_index_edges(1000, &edges);
        let a = init_layout(&g, 7);
        assert_eq!(a, init_layout(&g, 7));
        let bound = 1000f64.sqrt();
        assert!(a.positions.iter().all(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() <= bound));
        assert!(a.velocities.iter().all(|v| *v == [0.0, 0.0]));
        assert!(init_layout(&Graph::from_index_edges(0, &[]), 1).is_empty());
    }

    #[test]
    fn symmetric_pair_stays_mirrored() {
        let (g, bc) = setup("a b 1");
        let selection = Selection::default();
        let config = ForceConfig::default();
        let ctx = ForceContext {
            graph: &g,
            barcode: &bc,
            selection: &selection,
            config: &config,
            rest_lengths: None,
        };
        let mut state = init_layout(&g, 1);
        state.positions = vec![[-3.0, 1.0], [3.0, -1.0]];
        for _ in 0..200 {
            step(&mut state, &ctx).unwrap();
            let [a, b] = [state.positions[0], state.positions[1]];
            assert!((a[0] + b[0]).abs() < 1e-9 && (a[1] + b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_iterations_is_identity_and_runs_compose() {
        let (g, bc) = setup("a b 1\nb c 2\nc d 3\nd a 1");
        let selection = Selection {
            contraction_threshold: 2.5,
            repulsed_bars: BTreeSet::from([0]),
        };
        let config = ForceConfig::default();
        let ctx = ForceContext {
            graph: &g,
            barcode: &bc,
            selection: &selection,
            config: &config,
            rest_lengths: None,
        };
        let start = init_layout(&g, 3);
        let mut same = start.clone();
        run(&mut same, &ctx, 0).unwrap();
        assert_eq!(same, start);

        let mut ten = start.clone();
        run(&mut ten, &ctx, 10).unwrap();
        let mut split = start.clone();
        run(&mut split, &ctx, 4).unwrap();
        run(&mut split, &ctx, 6).unwrap();
        assert_eq!(ten, split);
    }

    #[test]
    fn each_repulsed_bar_adds_two_tree_passes() {
        let (g, bc) = setup("a b 1\nb c 2\nc d 3");
        let config = ForceConfig::default();
        let state = init_layout(&g, 5);
        let mut selection = Selection::default();
        let mut passes = Vec::new();
        let mut forces = Vec::new();
        for bar in [None, Some(0), Some(2)] {
            if let Some(b) = bar {
                selection.toggle_repulsion(b);
            }
            let ctx = ForceContext {
                graph: &g,
                barcode: &bc,
                selection: &selection,
                config: &config,
                rest_lengths: None,
            };
            let (f, tally) = compute_forces(&state.positions, &ctx, ForceTerms::default(), 0);
            let other_terms = ForceTerms {
                ph_repulsion: false,
                ..ForceTerms::default()
            };
            forces.push(compute_forces(&state.positions, &ctx, other_terms, 0).0);
            passes.push(tally.tree_passes);
            assert_eq!(tally.edge_springs, 3);
            assert_eq!(f.len(), 4);
        }
        assert_eq!(passes, [1, 3, 5]);
        assert_eq!(forces[0], forces[1]);
        assert_eq!(forces[1], forces[2]);
    }

    #[test]
    fn config_key_values() {
        let cfg = ForceConfig::from_key_values("# tuned\nspring_stiffness = 0.1\nbarnes_hut_theta=0").unwrap();
        assert_eq!(cfg.spring_stiffness, 0.1);
        assert_eq!(cfg.barnes_hut_theta, 0.0);
        assert_eq!(ForceConfig::from_key_values(&cfg.to_key_values()).unwrap(), cfg);
        assert!(ForceConfig::from_key_values("velocity_damping = 1").is_err());
        assert!(ForceConfig::from_key_values("mass = 3").is_err());
        let mut c = ForceConfig::default();
        assert!(c.set("time_step", -1.0).is_err());
        assert_eq!(c, ForceConfig::default());
        assert_eq!(ForceConfig::default().ph_repulsion_strength, 20000.0);
    }

    #[test]
    fn non_finite_names_node() {
        let (g, bc) = setup("a b 1");
        let selection = Selection::default();
        let config = ForceConfig::default();
        let ctx = ForceContext {
            graph: &g,
            barcode: &bc,
            selection: &selection,
            config: &config,
            rest_lengths: None,
        };
        let mut state = init_layout(&g, 1);
        state.positions[1] = [f64::NAN, 0.0];
        match step(&mut state, &ctx) {
            Err(LayoutError::NonFinite { node, .. }) => assert!(node == "a" || node == "b"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn selection_toggle_is_involution() {
        let mut s = Selection::default();
        assert!(s.toggle_repulsion(7));
        assert!(!s.toggle_repulsion(7));
        assert_eq!(s, Selection::default());
    }
}
