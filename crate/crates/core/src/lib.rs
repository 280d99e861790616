//! Hierarchical neighbor graphs for wireless topology control.
//!
//! Every node draws a level (deterministically raised by its weight, then
//! promoted with probability `p` per level), connects to its nearest
//! strictly-higher node and to every same-level node no farther away. The
//! crate builds these graphs, repairs them under churn, routes on them,
//! measures them, and simulates sensor-network data collation over them.
//!
//! The geometric layers are generic over [`Scalar`] (`f32` or `f64`); the
//! unparameterised aliases below fix `f64`.

// Parameter checks are written `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod hn;
pub mod metrics;
pub mod rng;
pub mod routing;
mod scalar;
pub mod spatial;
pub mod wsn;

use std::fmt;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Stable node identifier (index into the graph's slot table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

pub type Level = u32;

pub type Point = geometry::Point<f64>;
pub type Region = geometry::Region<f64>;
pub type PointSet = geometry::PointSet<f64>;
pub type Params = hn::Params<f64>;
pub type WeightAssignment = hn::WeightAssignment<f64>;
pub type HnGraph = hn::HnGraph<f64>;

pub type Point32 = geometry::Point<f32>;
pub type Region32 = geometry::Region<f32>;
pub type PointSet32 = geometry::PointSet<f32>;
pub type HnGraph32 = hn::HnGraph<f32>;
