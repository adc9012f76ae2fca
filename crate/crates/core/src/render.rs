//! Static SVG rendering of a layout.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundling::BundledEdge;
use crate::graph::Graph;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("no position for node `{0}`")]
    MissingPosition(String),
    #[error("invalid style: {0}")]
    InvalidStyle(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleSpec {
    pub node_radius: f64,
    /// Colors for node categories, assigned in sorted category order.
    pub palette: Vec<String>,
    /// Colors for the lowest and highest node degree.
    pub degree_colors: [String; 2],
    /// Halo colors for the `subset_u` and `subset_v` sides.
    pub halo_colors: [String; 2],
    pub edge_opacity: f64,
    pub edge_color: String,
    /// Output width in pixels; height follows the layout's aspect ratio.
    pub width: f64,
}

impl Default for StyleSpec {
    fn default() -> Self {
        let palette = [
            "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
            "#9c755f", "#bab0ac",
        ];
        StyleSpec {
            node_radius: 5.0,
            palette: palette.iter().map(|c| c.to_string()).collect(),
            degree_colors: ["#c6dbef".into(), "#08306b".into()],
            halo_colors: ["#1f77b4".into(), "#9467bd".into()],
            edge_opacity: 0.4,
            edge_color: "#7f7f7f".into(),
            width: 800.0,
        }
    }
}

impl StyleSpec {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.palette.is_empty() {
            return Err(RenderError::InvalidStyle("palette is empty".into()));
        }
        if !(self.node_radius > 0.0) {
            return Err(RenderError::InvalidStyle("node_radius must be positive".into()));
        }
        if !(self.width > 0.0) {
            return Err(RenderError::InvalidStyle("width must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RenderError> {
        let style: StyleSpec =
            serde_json::from_str(text).map_err(|e| RenderError::InvalidStyle(e.to_string()))?;
        style.validate()?;
        Ok(style)
    }
}

fn parse_hex(color: &str) -> Option<[u8; 3]> {
    let hex = color.strip_prefix('#')?;
    if hex.len() != 6 {
        return None;
    }
    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
    Some([byte(0)?, byte(2)?, byte(4)?])
}

fn blend(low: &str, high: &str, t: f64) -> String {
    match (parse_hex(low), parse_hex(high)) {
        (Some(a), Some(b)) => {
            let mix = |i: usize| (a[i] as f64 + t * (b[i] as f64 - a[i] as f64)).round() as u8;
            format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
        }
        _ => if t < 0.5 { low } else { high }.to_string(),
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn node_colors(graph: &Graph, style: &StyleSpec) -> Vec<String> {
    let categories: BTreeMap<&str, usize> = {
        let mut names: Vec<&str> = graph
            .nodes()
            .iter()
            .filter_map(|n| n.category.as_deref())
            .collect();
        names.sort_unstable();
        names.dedup();
        names.into_iter().enumerate().map(|(i, c)| (c, i)).collect()
    };
    if categories.is_empty() {
        let scale = graph
            .degree_color_scale()
            .unwrap_or_else(|_| vec![0.0; graph.node_count()]);
        return scale
            .into_iter()
            .map(|t| blend(&style.degree_colors[0], &style.degree_colors[1], t))
            .collect();
    }
    graph
        .nodes()
        .iter()
        .map(|n| match n.category.as_deref() {
            Some(c) => style.palette[categories[c] % style.palette.len()].clone(),
            None => "#bbbbbb".to_string(),
        })
        .collect()
}

/// Renders edges, then halos, then nodes. `halo` assigns each node to the
/// `subset_u` side (`Some(true)`), the `subset_v` side (`Some(false)`) or no
/// halo. Bundled edges, when given, replace straight segments.
pub fn render_svg(
    graph: &Graph,
    positions: &[[f64; 2]],
    style: &StyleSpec,
    bundles: Option<&[BundledEdge]>,
    halo: Option<&[Option<bool>]>,
) -> Result<String, RenderError> {
    style.validate()?;
    if positions.len() < graph.node_count() {
        return Err(RenderError::MissingPosition(
            graph.node_id(positions.len()).to_string(),
        ));
    }
    let positions = &positions[..graph.node_count()];
    let halo_radius = style.node_radius * 2.2;
    let pad = halo_radius;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in positions {
        lo = [lo[0].min(p[0] - pad), lo[1].min(p[1] - pad)];
        hi = [hi[0].max(p[0] + pad), hi[1].max(p[1] + pad)];
    }
    if positions.is_empty() {
        (lo, hi) = ([-1.0, -1.0], [1.0, 1.0]);
    }
    let span = [(hi[0] - lo[0]).max(1.0), (hi[1] - lo[1]).max(1.0)];
    let margin = [0.05 * span[0], 0.05 * span[1]];
    let view = [
        lo[0] - margin[0],
        lo[1] - margin[1],
        span[0] + 2.0 * margin[0],
        span[1] + 2.0 * margin[1],
    ];
    let height = style.width * view[3] / view[2];

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.1}" height="{:.1}" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        style.width, height, view[0], view[1], view[2], view[3]
    );
    let _ = writeln!(
        svg,
        r#"<g class="edges" fill="none" stroke="{}" stroke-opacity="{}">"#,
        escape(&style.edge_color),
        style.edge_opacity
    );
    let bundled: BTreeMap<usize, &BundledEdge> = bundles
        .unwrap_or_default()
        .iter()
        .map(|b| (b.edge, b))
        .collect();
    for (i, e) in graph.edges().iter().enumerate() {
        let points: Vec<[f64; 2]> = match bundled.get(&i) {
            Some(b) => b.control_points.clone(),
            None => vec![positions[e.source], positions[e.target]],
        };
        let mut d = String::new();
        for (k, p) in points.iter().enumerate() {
            let _ = write!(d, "{}{:.3} {:.3}", if k == 0 { "M" } else { " L" }, p[0], p[1]);
        }
        let _ = writeln!(svg, r#"<path class="edge" d="{d}"/>"#);
    }
    let _ = writeln!(svg, "</g>");

    if let Some(sides) = halo {
        let _ = writeln!(svg, r#"<g class="halos" fill-opacity="0.35">"#);
        for (p, side) in positions.iter().zip(sides) {
            let Some(side) = side else { continue };
            let (class, color) = if *side {
                ("halo halo-u", &style.halo_colors[0])
            } else {
                ("halo halo-v", &style.halo_colors[1])
            };
            let _ = writeln!(
                svg,
                r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="{}"/>"#,
                p[0],
                p[1],
                halo_radius,
                escape(color)
            );
        }
        let _ = writeln!(svg, "</g>");
    }

    let colors = node_colors(graph, style);
    let _ = writeln!(svg, r##"<g class="nodes" stroke="#ffffff" stroke-width="0.5">"##);
    for (i, p) in positions.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<circle class="node" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="{}"><title>{}</title></circle>"#,
            p[0],
            p[1],
            style.node_radius,
            escape(&colors[i]),
            escape(graph.node_id(i))
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
