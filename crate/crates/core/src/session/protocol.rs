//! Line-delimited JSON messages between a client and a session.
//!
//! Client messages are `{"kind": ..., "payload": {...}}`; unit messages may
//! omit the payload. Every client message gets exactly one `ack` or `error`
//! reply, possibly preceded by `barcode`, `frame` or `metrics` replies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::MetricsExport;
use crate::bundling::BundledEdge;
use crate::graph::GraphJson;
use crate::persistence::BarcodeExport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Message {
    LoadGraph(LoadGraph),
    /// ForceConfig field names to new values.
    SetConfig(BTreeMap<String, f64>),
    SetThreshold { threshold: f64 },
    ToggleRepulsion { bar: usize },
    HoverBar { bar: usize },
    Play,
    Pause,
    StepN { n: usize },
    SnapshotRequest,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::LoadGraph(_) => "load_graph",
            Message::SetConfig(_) => "set_config",
            Message::SetThreshold { .. } => "set_threshold",
            Message::ToggleRepulsion { .. } => "toggle_repulsion",
            Message::HoverBar { .. } => "hover_bar",
            Message::Play => "play",
            Message::Pause => "pause",
            Message::StepN { .. } => "step_n",
            Message::SnapshotRequest => "snapshot_request",
        }
    }
}

/// Graph source for `load_graph`: inline JSON, inline text, or a file path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadGraph {
    pub graph: Option<GraphJson>,
    pub text: Option<String>,
    /// `edge_list` or `graph_json`, for `text` and `path`.
    pub format: Option<String>,
    pub path: Option<String>,
    /// `jaccard` (default) or `given`.
    pub weighting: Option<String>,
    pub hops: Option<usize>,
    pub seed: Option<u64>,
    /// `on`, `off` or `auto` (default).
    pub bundle: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFlags {
    pub bundling_enabled: bool,
    /// Halos instead of hull outlines for hover previews.
    pub halo_mode: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionView {
    pub threshold: f64,
    pub repulsed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Increases by one with every frame the session emits.
    pub counter: u64,
    pub iteration: u64,
    pub positions: BTreeMap<String, [f64; 2]>,
    pub selection: SelectionView,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundles: Option<Vec<BundledEdgeView>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundledEdgeView {
    pub edge: usize,
    pub points: Vec<[f64; 2]>,
}

impl From<&BundledEdge> for BundledEdgeView {
    fn from(b: &BundledEdge) -> Self {
        BundledEdgeView {
            edge: b.edge,
            points: b.control_points.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AckData {
    Loaded {
        nodes: usize,
        edges: usize,
        features: FeatureFlags,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        notes: Vec<String>,
    },
    Selection(SelectionView),
    Membership {
        bar: usize,
        subset_u: Vec<String>,
        subset_v: Vec<String>,
        /// `halo` or `hull`.
        preview: String,
    },
    Playing {
        playing: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reply {
    Barcode(BarcodeExport),
    Frame(Frame),
    Metrics(MetricsExport),
    Ack {
        request: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<AckData>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request: Option<String>,
        message: String,
    },
}

impl Reply {
    pub fn is_ack_or_error(&self) -> bool {
        matches!(self, Reply::Ack { .. } | Reply::Error { .. })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("replies serialize")
    }
}
