//! Scripted runs from a TOML config, producing a layout, an SVG, an effect
//! metrics report and a timing log.
//!
//! ```toml
//! graph = "barbell.edges"      # relative to the config file
//! weighting = "jaccard"        # or "given"
//! iterations = 3000
//! threshold = 0.3              # contract bars below this persistence
//! repulse_ranks = [0]          # 0 is the top (highest persistence) bar
//! output_dir = "out"
//!
//! [forces]
//! ph_repulsion_strength = 40000
//! ```
//!
//! Two runs share the seed: a baseline with no selection, whose final
//! layout is the source for the metrics, and the selected run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use super::{read_graph, Result, SessionError};
use crate::analysis::{cluster_rest_lengths, effect_metrics, greedy_modularity, MetricsExport};
use crate::bundling::{BundleMode, Bundler};
use crate::layout::{self, init_layout, ForceConfig, ForceContext, LayoutState, Selection};
use crate::persistence::{compute_barcode, Barcode};
use crate::render::{render_svg, StyleSpec};
use crate::weighting::{weigh, WeightedGraph, WeightingMode};

fn default_weighting() -> String {
    "jaccard".into()
}

fn default_iterations() -> usize {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_cluster_multiplier() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub graph: PathBuf,
    /// `edge_list` or `graph_json`; guessed from the extension when absent.
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default = "default_weighting")]
    pub weighting: String,
    #[serde(default)]
    pub hops: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub threshold: f64,
    /// Bars to repulse, by display rank counted from the top.
    #[serde(default)]
    pub repulse_ranks: Vec<usize>,
    /// Bar whose subsets get halos in the SVG, by display rank from the top.
    #[serde(default)]
    pub halo_rank: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub bundle: Option<String>,
    #[serde(default)]
    pub style: Option<PathBuf>,
    /// Cluster count for modularity-aware spring rest lengths.
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default = "default_cluster_multiplier")]
    pub cluster_multiplier: f64,
    #[serde(default)]
    pub forces: BTreeMap<String, f64>,
}

impl BatchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SessionError::Batch(format!("config: {e}")))
    }

    /// Reads a config and resolves its relative paths against the config's
    /// directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SessionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.graph = base.join(&config.graph);
        config.output_dir = base.join(&config.output_dir);
        config.style = config.style.map(|s| base.join(s));
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    pub output_dir: PathBuf,
    pub metrics: MetricsExport,
    pub barcode_ms: f64,
    pub mean_step_ms: f64,
}

/// Bar id at display rank `rank`, counted from the top.
pub fn bar_at_rank(barcode: &Barcode, rank: usize) -> Result<usize> {
    let ids = barcode.sorted_ids();
    ids.len()
        .checked_sub(rank + 1)
        .map(|i| ids[i])
        .ok_or_else(|| SessionError::Batch(format!("bar rank {rank} out of range: the barcode has {} bars", ids.len())))
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    std::fs::write(&path, contents).map_err(|source| SessionError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("exports serialize");
    text.push('\n');
    text
}

fn simulate(
    wg: &WeightedGraph,
    barcode: &Barcode,
    selection: &Selection,
    config: &ForceConfig,
    rest_lengths: Option<&[f64]>,
    seed: u64,
    iterations: usize,
) -> Result<(LayoutState, f64)> {
    let mut state = init_layout(wg.graph(), seed);
    let ctx = ForceContext {
        graph: wg.graph(),
        barcode,
        selection,
        config,
        rest_lengths,
    };
    let start = Instant::now();
    layout::run(&mut state, &ctx, iterations)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok((state, elapsed / iterations.max(1) as f64))
}

pub fn run_batch(config: &BatchConfig, default_seed: u64) -> Result<BatchOutcome> {
    let graph = read_graph(&config.graph, config.format.as_deref())?;
    let mode: WeightingMode = config.weighting.parse().map_err(SessionError::Batch)?;
    let bundle: BundleMode = config
        .bundle
        .as_deref()
        .unwrap_or("auto")
        .parse()
        .map_err(SessionError::Batch)?;
    let mut forces = ForceConfig::default();
    for (key, value) in &config.forces {
        forces.set(key, *value)?;
    }
    let style = match &config.style {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| SessionError::Io {
                path: path.display().to_string(),
                source,
            })?;
            StyleSpec::from_json(&text).map_err(|e| SessionError::Batch(e.to_string()))?
        }
        None => StyleSpec::default(),
    };
    if !config.threshold.is_finite() || config.threshold < 0.0 {
        return Err(SessionError::Batch(format!("threshold {} must be non-negative", config.threshold)));
    }
    let seed = config.seed.unwrap_or(default_seed);

    let wg = weigh(&graph, mode, config.hops)?;
    let start = Instant::now();
    let barcode = compute_barcode(&wg);
    let barcode_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut selection = Selection {
        contraction_threshold: config.threshold,
        ..Selection::default()
    };
    for &rank in &config.repulse_ranks {
        selection.repulsed_bars.insert(bar_at_rank(&barcode, rank)?);
    }
    let halo = match config.halo_rank {
        Some(rank) => Some(barcode.membership(bar_at_rank(&barcode, rank)?, wg.graph().node_count())?),
        None => None,
    };
    let rest_lengths = match config.clusters {
        Some(k) => Some(
            cluster_rest_lengths(
                wg.graph(),
                &greedy_modularity(&wg),
                k,
                forces.spring_rest_length,
                config.cluster_multiplier,
            )
            .map_err(|e| SessionError::Batch(e.to_string()))?,
        ),
        None => None,
    };

    let (source, _) = simulate(
        &wg,
        &barcode,
        &Selection::default(),
        &forces,
        rest_lengths.as_deref(),
        seed,
        config.iterations,
    )?;
    let (target, mean_step_ms) = simulate(
        &wg,
        &barcode,
        &selection,
        &forces,
        rest_lengths.as_deref(),
        seed,
        config.iterations,
    )?;
    let metrics = effect_metrics(&source.positions, &target.positions, &selection, &barcode)?.to_export();

    let bundles = if Bundler::requested(bundle, wg.graph()) {
        match Bundler::new(wg.graph(), &target.positions) {
            Ok(mut bundler) => {
                bundler.run_schedule(wg.graph(), &target.positions);
                Some(bundler.bundles)
            }
            Err(e) => {
                log::warn!("{e}");
                None
            }
        }
    } else {
        None
    };
    let svg = render_svg(wg.graph(), &target.positions, &style, bundles.as_deref(), halo.as_deref())
        .map_err(|e| SessionError::Batch(e.to_string()))?;

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| SessionError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write(dir.join("layout.json"), &pretty(&target.snapshot(wg.graph())))?;
    write(dir.join("metrics.json"), &pretty(&metrics))?;
    write(dir.join("render.svg"), &svg)?;
    write(
        dir.join("timing.log"),
        &format!(
            "nodes={}\nedges={}\niterations={}\nbarcode_ms={barcode_ms:.3}\nmean_step_ms={mean_step_ms:.3}\n",
            wg.graph().node_count(),
            wg.graph().edge_count(),
            config.iterations
        ),
    )?;
    Ok(BatchOutcome {
        output_dir: dir.clone(),
        metrics,
        barcode_ms,
        mean_step_ms,
    })
}
