//! Coverage progress over a coarse visited-cell grid.

use crate::geometry::Rect;
use crate::kinematics::Pose2D;
use serde::{Deserialize, Serialize};

/// Visited-cell bookkeeping; the fraction is monotone non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMetric {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    origin: (f64, f64),
    visited: Vec<bool>,
    visited_count: usize,
}

impl CoverageMetric {
    pub const DEFAULT_RESOLUTION: f64 = 0.05;

    pub fn new(bounds: Rect, resolution: f64) -> Self {
        assert!(resolution > 0.0);
        let width = (bounds.width() / resolution).ceil().max(1.0) as usize;
        let height = (bounds.height() / resolution).ceil().max(1.0) as usize;
        CoverageMetric {
            resolution,
            width,
            height,
            origin: (bounds.min.x, bounds.min.y),
            visited: vec![false; width * height],
            visited_count: 0,
        }
    }

    /// Mark the cell containing `pose` visited. Returns true when this
    /// visit covered a new cell.
    pub fn update(&mut self, pose: Pose2D) -> bool {
        let cx = ((pose.x - self.origin.0) / self.resolution).floor();
        let cy = ((pose.y - self.origin.1) / self.resolution).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return false;
        }
        let idx = cy as usize * self.width + cx as usize;
        if !self.visited[idx] {
            self.visited[idx] = true;
            self.visited_count += 1;
            true
        } else {
            false
        }
    }

    pub fn visited_cells(&self) -> usize {
        self.visited_count
    }

    pub fn total_cells(&self) -> usize {
        self.width * self.height
    }

    /// Visited fraction of all arena cells.
    pub fn fraction(&self) -> f64 {
        self.visited_count as f64 / self.total_cells() as f64
    }
}
