//! The live session: one graph, its barcode, a layout in motion and the
//! user's selection, driven by [`Message`]s.
//!
//! [`Session::handle`] is the in-process entry point; [`server`] puts the
//! same messages on a TCP socket and [`batch`] scripts a whole run.

pub mod batch;
pub mod protocol;
pub mod server;

use std::path::Path;

use thiserror::Error;

use crate::analysis::{effect_metrics, AnalysisError, MetricsExport};
use crate::bundling::{BundleMode, Bundler, MAX_BUNDLED_EDGES};
use crate::graph::{Graph, GraphError, GraphFormat};
use crate::layout::{self, init_layout, ForceConfig, ForceContext, LayoutError, LayoutState, Selection};
use crate::persistence::{compute_barcode, Barcode, PersistenceError};
use crate::weighting::{weigh, WeightedGraph, WeightingError, WeightingMode};

pub use protocol::{AckData, BundledEdgeView, FeatureFlags, Frame, LoadGraph, Message, Reply, SelectionView};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "PHLAYOUT_SEED";
/// Graphs with more nodes than this preview bars with halos, not hulls.
pub const HULL_PREVIEW_MAX_NODES: usize = 100;
/// Upper bound on a single `step_n` request.
pub const MAX_STEP_N: usize = 100_000;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no graph loaded")]
    NotLoaded,
    #[error("unknown bar id {0}")]
    UnknownBar(usize),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Weighting(#[from] WeightingError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Batch(String),
}

impl From<PersistenceError> for SessionError {
    fn from(e: PersistenceError) -> Self {
        match e {
            PersistenceError::UnknownBar(id) => SessionError::UnknownBar(id),
        }
    }
}

pub type Result<T> = std::result::Result<T, SessionError>;

/// Seed from `PHLAYOUT_SEED`, or [`DEFAULT_SEED`] when unset or unparsable.
pub fn seed_from_env() -> u64 {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            log::warn!("ignoring {SEED_ENV}={v:?}: not an unsigned integer");
            DEFAULT_SEED
        }),
        Err(_) => DEFAULT_SEED,
    }
}

pub fn feature_gate(graph: &Graph) -> FeatureFlags {
    FeatureFlags {
        bundling_enabled: graph.edge_count() <= MAX_BUNDLED_EDGES,
        halo_mode: graph.node_count() > HULL_PREVIEW_MAX_NODES,
    }
}

pub fn read_graph(path: &Path, format: Option<&str>) -> Result<Graph> {
    let text = std::fs::read_to_string(path).map_err(|source| SessionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let format = match format {
        Some(f) => f.parse::<GraphFormat>().map_err(SessionError::Malformed)?,
        None => GraphFormat::from_path(path),
    };
    let parsed = Graph::parse(&text, format)?;
    for w in &parsed.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(parsed.graph)
}

/// Graph artifacts plus the running layout.
pub struct Loaded {
    pub weighted: WeightedGraph,
    pub barcode: Barcode,
    pub state: LayoutState,
    pub selection: Selection,
    pub features: FeatureFlags,
    pub bundler: Option<Bundler>,
    /// Positions when the selection last went from empty to non-empty; the
    /// source layout for effect metrics.
    pub source: Option<Vec<[f64; 2]>>,
}

impl Loaded {
    pub fn graph(&self) -> &Graph {
        self.weighted.graph()
    }

    fn selection_active(&self) -> bool {
        !self.selection.repulsed_bars.is_empty() || self.selection.contracted(&self.barcode).next().is_some()
    }

    fn selection_view(&self) -> SelectionView {
        SelectionView {
            threshold: self.selection.contraction_threshold,
            repulsed: self.selection.repulsed_bars.iter().copied().collect(),
        }
    }

    /// Applies a selection change, capturing the source layout when the
    /// selection first becomes active.
    fn mutate_selection(&mut self, change: impl FnOnce(&mut Selection)) {
        let was_active = self.selection_active();
        change(&mut self.selection);
        if !was_active && self.selection_active() {
            self.source = Some(self.state.positions.clone());
        }
    }
}

pub struct Session {
    default_seed: u64,
    config: ForceConfig,
    loaded: Option<Loaded>,
    playing: bool,
    frames_sent: u64,
}

impl Session {
    pub fn new(default_seed: u64) -> Self {
        Session {
            default_seed,
            config: ForceConfig::default(),
            loaded: None,
            playing: false,
            frames_sent: 0,
        }
    }

    pub fn config(&self) -> &ForceConfig {
        &self.config
    }

    pub fn loaded(&self) -> Option<&Loaded> {
        self.loaded.as_ref()
    }

    pub fn is_playing(&self) -> bool {
        self.playing
    }

    pub fn frames_sent(&self) -> u64 {
        self.frames_sent
    }

    /// Parses one wire line and handles it. A line that does not parse gets
    /// a single error reply.
    pub fn handle_line(&mut self, line: &str) -> Vec<Reply> {
        match serde_json::from_str::<Message>(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![Reply::Error {
                request: None,
                message: SessionError::Malformed(e.to_string()).to_string(),
            }],
        }
    }

    /// Applies one message. The last reply is always the message's single
    /// `ack` or `error`.
    pub fn handle(&mut self, msg: Message) -> Vec<Reply> {
        let kind = msg.kind();
        let mut replies = Vec::new();
        match self.apply(msg, &mut replies) {
            Ok(data) => replies.push(Reply::Ack {
                request: kind.to_string(),
                data,
            }),
            Err(e) => replies.push(Reply::Error {
                request: Some(kind.to_string()),
                message: e.to_string(),
            }),
        }
        replies
    }

    fn loaded_mut(&mut self) -> Result<&mut Loaded> {
        self.loaded.as_mut().ok_or(SessionError::NotLoaded)
    }

    fn apply(&mut self, msg: Message, out: &mut Vec<Reply>) -> Result<Option<AckData>> {
        match msg {
            Message::LoadGraph(request) => {
                let (loaded, notes) = self.load(&request)?;
                out.push(Reply::Barcode(loaded.barcode.export(loaded.graph())));
                let data = AckData::Loaded {
                    nodes: loaded.graph().node_count(),
                    edges: loaded.graph().edge_count(),
                    features: loaded.features.clone(),
                    notes,
                };
                self.loaded = Some(loaded);
                self.playing = false;
                out.push(Reply::Frame(self.frame()?));
                Ok(Some(data))
            }
            Message::SetConfig(values) => {
                let mut config = self.config.clone();
                for (key, value) in &values {
                    config.set(key, *value)?;
                }
                self.config = config;
                Ok(None)
            }
            Message::SetThreshold { threshold } => {
                if !threshold.is_finite() || threshold < 0.0 {
                    return Err(SessionError::Malformed(format!(
                        "threshold must be a finite non-negative number, got {threshold}"
                    )));
                }
                let loaded = self.loaded_mut()?;
                loaded.mutate_selection(|s| s.contraction_threshold = threshold);
                Ok(Some(AckData::Selection(loaded.selection_view())))
            }
            Message::ToggleRepulsion { bar } => {
                let loaded = self.loaded_mut()?;
                loaded.barcode.bar(bar)?;
                loaded.mutate_selection(|s| {
                    s.toggle_repulsion(bar);
                });
                Ok(Some(AckData::Selection(loaded.selection_view())))
            }
            Message::HoverBar { bar } => {
                let loaded = self.loaded_mut()?;
                let subsets = loaded.barcode.subsets(bar)?;
                let graph = loaded.graph();
                let ids = |v: &[usize]| v.iter().map(|&i| graph.node_id(i).to_string()).collect();
                Ok(Some(AckData::Membership {
                    bar,
                    subset_u: ids(&subsets.subset_u),
                    subset_v: ids(&subsets.subset_v),
                    preview: if loaded.features.halo_mode { "halo" } else { "hull" }.to_string(),
                }))
            }
            Message::Play => {
                self.loaded_mut()?;
                self.playing = true;
                Ok(Some(AckData::Playing { playing: true }))
            }
            Message::Pause => {
                self.loaded_mut()?;
                self.playing = false;
                Ok(Some(AckData::Playing { playing: false }))
            }
            Message::StepN { n } => {
                self.loaded_mut()?;
                if n > MAX_STEP_N {
                    return Err(SessionError::Malformed(format!("step_n is limited to {MAX_STEP_N}")));
                }
                for _ in 0..n {
                    out.push(self.advance()?);
                }
                Ok(None)
            }
            Message::SnapshotRequest => {
                out.push(Reply::Frame(self.frame()?));
                out.push(Reply::Metrics(self.metrics()?));
                Ok(None)
            }
        }
    }

    fn load(&self, request: &LoadGraph) -> Result<(Loaded, Vec<String>)> {
        let graph = match (&request.graph, &request.text, &request.path) {
            (Some(json), None, None) => json.clone().into_graph()?.graph,
            (None, Some(text), None) => {
                let format = match &request.format {
                    Some(f) => f.parse::<GraphFormat>().map_err(SessionError::Malformed)?,
                    None => GraphFormat::EdgeList,
                };
                Graph::parse(text, format)?.graph
            }
            (None, None, Some(path)) => read_graph(Path::new(path), request.format.as_deref())?,
            _ => {
                return Err(SessionError::Malformed(
                    "load_graph needs exactly one of `graph`, `text` or `path`".into(),
                ))
            }
        };
        let mode = match &request.weighting {
            Some(m) => m.parse::<WeightingMode>().map_err(SessionError::Malformed)?,
            None => WeightingMode::Jaccard,
        };
        let bundle = match &request.bundle {
            Some(b) => b.parse::<BundleMode>().map_err(SessionError::Malformed)?,
            None => BundleMode::Auto,
        };
        let seed = request.seed.unwrap_or(self.default_seed);
        let weighted = weigh(&graph, mode, request.hops)?;
        let barcode = compute_barcode(&weighted);
        let state = init_layout(weighted.graph(), seed);
        let features = feature_gate(weighted.graph());
        let mut notes = Vec::new();
        let bundler = if Bundler::requested(bundle, weighted.graph()) {
            match Bundler::new(weighted.graph(), &state.positions) {
                Ok(b) => Some(b),
                Err(e) => {
                    notes.push(e.to_string());
                    None
                }
            }
        } else {
            None
        };
        Ok((
            Loaded {
                weighted,
                barcode,
                state,
                selection: Selection::default(),
                features,
                bundler,
                source: None,
            },
            notes,
        ))
    }

    /// One layout step (plus one bundling step) and its frame. A failed
    /// step pauses the session.
    fn advance(&mut self) -> Result<Reply> {
        let config = &self.config;
        let loaded = self.loaded.as_mut().ok_or(SessionError::NotLoaded)?;
        let ctx = ForceContext {
            graph: loaded.weighted.graph(),
            barcode: &loaded.barcode,
            selection: &loaded.selection,
            config,
            rest_lengths: None,
        };
        if let Err(e) = layout::step(&mut loaded.state, &ctx) {
            self.playing = false;
            return Err(e.into());
        }
        if let Some(bundler) = loaded.bundler.as_mut() {
            bundler.tick(loaded.weighted.graph(), &loaded.state.positions);
        }
        Ok(Reply::Frame(self.frame()?))
    }

    /// While playing, advances one step and returns its frame.
    pub fn tick(&mut self) -> Option<Reply> {
        if !self.playing || self.loaded.is_none() {
            return None;
        }
        Some(self.advance().unwrap_or_else(|e| Reply::Error {
            request: None,
            message: e.to_string(),
        }))
    }

    fn frame(&mut self) -> Result<Frame> {
        let loaded = self.loaded.as_ref().ok_or(SessionError::NotLoaded)?;
        self.frames_sent += 1;
        let snapshot = loaded.state.snapshot(loaded.graph());
        Ok(Frame {
            counter: self.frames_sent,
            iteration: snapshot.iteration,
            positions: snapshot.positions,
            selection: loaded.selection_view(),
            bundles: loaded
                .bundler
                .as_ref()
                .map(|b| b.bundles.iter().map(BundledEdgeView::from).collect()),
        })
    }

    /// Effect metrics of the current layout against the captured source
    /// layout; empty before any selection was made.
    pub fn metrics(&self) -> Result<MetricsExport> {
        let loaded = self.loaded.as_ref().ok_or(SessionError::NotLoaded)?;
        match &loaded.source {
            Some(source) => Ok(effect_metrics(source, &loaded.state.positions, &loaded.selection, &loaded.barcode)?
                .to_export()),
            None => Ok(MetricsExport {
                e_c: None,
                e_r: None,
                bars: Vec::new(),
            }),
        }
    }
}

/// Runs a message script against a fresh session and collects every reply.
pub fn replay(seed: u64, script: &[Message]) -> Vec<Reply> {
    let mut session = Session::new(seed);
    script.iter().flat_map(|m| session.handle(m.clone())).collect()
}
