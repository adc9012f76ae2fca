//! Graph layout steered by the 0-dimensional persistence barcode of a
//! weighted graph.
//!
//! The pipeline is: [`graph`] parsing, [`weighting`] into metric edge
//! lengths, [`persistence`] barcode extraction, then the [`layout`] force
//! simulation driven by a [`layout::Selection`] of bars. [`analysis`],
//! [`bundling`], [`render`] and [`session`] build on top of that.

pub mod analysis;
pub mod bundling;
pub mod graph;
pub mod layout;
pub mod persistence;
pub mod render;
pub mod session;
pub mod weighting;
