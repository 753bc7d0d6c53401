use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of [0, L] into `nodes - 1` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    length: f64,
    nodes: usize,
}

impl SpatialGrid {
    pub const MIN_NODES: usize = 16;

    pub fn new(length: f64, nodes: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!(
                "grid length must be positive, got {length}"
            )));
        }
        if nodes < Self::MIN_NODES {
            return Err(Error::Config(format!(
                "grid needs at least {} nodes, got {nodes}",
                Self::MIN_NODES
            )));
        }
        Ok(Self { length, nodes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn cells(&self) -> usize {
        self.nodes - 1
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.cells() as f64
    }

    /// Coordinate of node `i`; the last node is exactly `L`.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.length
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }
}
