//! Log-odds occupancy grid with Bresenham beam traversal and PGM export.

use crate::geometry::Vec2;
use crate::kinematics::Pose2D;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Log-odds decrement applied to cells a beam passes through.
pub const LOG_ODDS_FREE: f64 = -0.4;
/// Log-odds increment applied to the cell a beam terminates in.
pub const LOG_ODDS_OCC: f64 = 0.85;
/// Symmetric clamp on accumulated cell log-odds.
pub const DEFAULT_LOG_ODDS_CLAMP: f64 = 4.0;

/// Occupancy belief over a regular grid; log-odds per cell, zero = unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// World coordinates of the corner of cell (0, 0).
    pub origin: (f64, f64),
    pub log_odds: Vec<f64>,
    pub clamp: f64,
}

impl OccupancyGrid {
    /// Grid covering `width_m x height_m` from `origin`, all cells unknown.
    pub fn new(origin: (f64, f64), width_m: f64, height_m: f64, resolution: f64) -> Self {
        assert!(resolution > 0.0 && width_m > 0.0 && height_m > 0.0);
        let width = (width_m / resolution).round().max(1.0) as usize;
        let height = (height_m / resolution).round().max(1.0) as usize;
        OccupancyGrid {
            resolution,
            width,
            height,
            origin,
            log_odds: vec![0.0; width * height],
            clamp: DEFAULT_LOG_ODDS_CLAMP,
        }
    }

    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let cx = ((p.x - self.origin.0) / self.resolution).floor();
        let cy = ((p.y - self.origin.1) / self.resolution).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return None;
        }
        Some((cx as usize, cy as usize))
    }

    /// Center of a cell in world coordinates.
    pub fn cell_center(&self, cell: (usize, usize)) -> Vec2 {
        Vec2::new(
            self.origin.0 + (cell.0 as f64 + 0.5) * self.resolution,
            self.origin.1 + (cell.1 as f64 + 0.5) * self.resolution,
        )
    }

    pub fn log_odds_at(&self, cell: (usize, usize)) -> f64 {
        self.log_odds[cell.1 * self.width + cell.0]
    }

    /// Occupancy probability `1/(1+exp(-log_odds))`.
    pub fn probability_at(&self, cell: (usize, usize)) -> f64 {
        1.0 / (1.0 + (-self.log_odds_at(cell)).exp())
    }

    fn bump(&mut self, cell: (usize, usize), delta: f64) {
        let v = &mut self.log_odds[cell.1 * self.width + cell.0];
        *v = (*v + delta).clamp(-self.clamp, self.clamp);
    }

    /// Write the map as a binary PGM (P5, 8-bit): 255 = free, 0 = occupied,
    /// 128 = unknown. Row 0 of the image is the top of the map (max y).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "P5")?;
        writeln!(out, "{} {}", self.width, self.height)?;
        writeln!(out, "255")?;
        for row in (0..self.height).rev() {
            let mut line = Vec::with_capacity(self.width);
            for col in 0..self.width {
                let v = self.log_odds[row * self.width + col];
                line.push(if v > 0.0 {
                    0u8
                } else if v < 0.0 {
                    255u8
                } else {
                    128u8
                });
            }
            out.write_all(&line)?;
        }
        Ok(())
    }

    /// Sidecar metadata: resolution and origin, one `key value` per line.
    pub fn write_meta<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "resolution_m {}", self.resolution)?;
        writeln!(out, "origin_x_m {}", self.origin.0)?;
        writeln!(out, "origin_y_m {}", self.origin.1)?;
        writeln!(out, "width_cells {}", self.width)?;
        writeln!(out, "height_cells {}", self.height)?;
        Ok(())
    }
}

/// Fold one range beam into the grid.
///
/// Cells from the robot's cell along the beam receive the free-space
/// decrement up to `min(measured, max_range)`; when the beam is a hit
/// (`measured` strictly inside `max_range`) the terminal cell receives the
/// occupied increment instead. Beams leaving the grid are truncated at the
/// boundary.
pub fn grid_update(
    grid: &mut OccupancyGrid,
    pose: Pose2D,
    beam_bearing: f64,
    measured: Option<f64>,
    max_range: f64,
) {
    let start = Vec2::new(pose.x, pose.y);
    let dir = Vec2::from_angle(pose.heading + beam_bearing);
    let (range, is_hit) = match measured {
        Some(d) if d < max_range => (d, true),
        _ => (max_range, false),
    };
    let end = start + dir.scaled(range);

    let Some(start_cell) = grid.cell_of(start) else {
        return;
    };
    // Nudge an endpoint that lands exactly on (or epsilon outside) the grid
    // edge into the boundary cell so perimeter walls register.
    let eps = grid.resolution * 1e-6;
    let clamped_end = Vec2::new(
        end.x.clamp(grid.origin.0 + eps, grid.origin.0 + grid.width as f64 * grid.resolution - eps),
        end.y.clamp(grid.origin.1 + eps, grid.origin.1 + grid.height as f64 * grid.resolution - eps),
    );
    let end_cell = grid
        .cell_of(clamped_end)
        .expect("clamped endpoint is inside the grid");

    let cells = bresenham_cells(start_cell, end_cell);
    for (idx, cell) in cells.iter().enumerate() {
        let terminal = idx + 1 == cells.len();
        if terminal && is_hit {
            grid.bump(*cell, LOG_ODDS_OCC);
        } else {
            grid.bump(*cell, LOG_ODDS_FREE);
        }
    }
}

/// Integer grid walk from `a` to `b`, inclusive of both ends.
fn bresenham_cells(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut x0, mut y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut cells = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        cells.push((x0 as usize, y0 as usize));
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> OccupancyGrid {
        OccupancyGrid::new((0.0, 0.0), 1.2, 1.2, 0.02)
    }

    #[test]
    fn dimensions_and_unknown_start() {
        let g = grid();
        assert_eq!((g.width, g.height), (60, 60));
        assert!(g.log_odds.iter().all(|&v| v == 0.0));
        assert_eq!(g.probability_at((0, 0)), 0.5);
    }

    #[test]
    fn single_hit_marks_terminal_occupied_and_path_free() {
        let mut g = grid();
        let pose = Pose2D::new(0.5, 0.5, 0.0);
        grid_update(&mut g, pose, 0.0, Some(0.10), 0.20);
        let hit_cell = g.cell_of(Vec2::new(0.6, 0.5)).unwrap();
        assert!(g.probability_at(hit_cell) > 0.5);
        let through = g.cell_of(Vec2::new(0.55, 0.5)).unwrap();
        assert!(g.probability_at(through) < 0.5);
        let start = g.cell_of(Vec2::new(0.5, 0.5)).unwrap();
        assert!(g.probability_at(start) < 0.5);
    }

    #[test]
    fn repeated_hits_clamp_log_odds() {
        let mut g = grid();
        let pose = Pose2D::new(0.5, 0.5, 0.0);
        for _ in 0..10 {
            grid_update(&mut g, pose, 0.0, Some(0.10), 0.20);
        }
        let hit_cell = g.cell_of(Vec2::new(0.6, 0.5)).unwrap();
        assert_eq!(g.log_odds_at(hit_cell), DEFAULT_LOG_ODDS_CLAMP);
        // Probability stays inside the clamp band.
        let p = g.probability_at(hit_cell);
        assert!(p > 0.98 && p < 0.983);
    }

    #[test]
    fn no_hit_beam_only_decrements() {
        let mut g = grid();
        grid_update(&mut g, Pose2D::new(0.5, 0.5, 0.0), 0.0, None, 0.20);
        assert!(g.log_odds.iter().all(|&v| v <= 0.0));
        assert!(g.log_odds.iter().any(|&v| v < 0.0));
    }

    #[test]
    fn untouched_cells_stay_exactly_unknown() {
        let mut g = grid();
        for k in 0..8 {
            let bearing = k as f64 * std::f64::consts::FRAC_PI_4;
            grid_update(&mut g, Pose2D::new(0.6, 0.6, 0.0), bearing, Some(0.15), 0.20);
        }
        // Far corner never traversed.
        let corner = g.cell_of(Vec2::new(0.01, 1.19)).unwrap();
        assert_eq!(g.log_odds_at(corner), 0.0);
    }

    #[test]
    fn beam_leaving_grid_truncates_without_panic() {
        let mut g = grid();
        // Robot near the edge, beam pointing out of the grid.
        grid_update(&mut g, Pose2D::new(1.15, 0.6, 0.0), 0.0, None, 0.20);
        // Cells up to the boundary freed; no panic, no wrap-around.
        let last = g.cell_of(Vec2::new(1.19, 0.6)).unwrap();
        assert!(g.log_odds_at(last) < 0.0);
    }

    #[test]
    fn hit_exactly_on_boundary_registers_in_edge_cell() {
        let mut g = grid();
        // Wall along x = 1.2 (the grid edge): a hit at exactly max extent.
        grid_update(&mut g, Pose2D::new(1.05, 0.6, 0.0), 0.0, Some(0.15), 0.20);
        let edge = g.cell_of(Vec2::new(1.199, 0.6)).unwrap();
        assert!(
            g.log_odds_at(edge) > 0.0,
            "edge cell log-odds {}",
            g.log_odds_at(edge)
        );
    }

    #[test]
    fn pgm_export_shape_and_legend() {
        let mut g = OccupancyGrid::new((0.0, 0.0), 0.1, 0.06, 0.02);
        // (5 x 3 cells) occupy one, free another, leave the rest unknown.
        g.bump((0, 0), 2.0);
        g.bump((4, 2), -2.0);
        let mut bytes = Vec::new();
        g.write_pgm(&mut bytes).unwrap();
        let header_end = bytes.windows(4).position(|w| w == b"255\n").unwrap() + 4;
        let pixels = &bytes[header_end..];
        assert_eq!(pixels.len(), 15);
        // Row 0 of the image is the top row (y = max): (4,2) -> first row,
        // last column; (0,0) -> last row, first column.
        assert_eq!(pixels[4], 255);
        assert_eq!(pixels[10], 0);
        assert_eq!(pixels[5], 128);
        let mut meta = Vec::new();
        g.write_meta(&mut meta).unwrap();
        let meta = String::from_utf8(meta).unwrap();
        assert!(meta.contains("resolution_m 0.02"));
        assert!(meta.contains("origin_x_m 0"));
    }

    #[test]
    fn bresenham_is_symmetric_and_connected() {
        let cells = bresenham_cells((2, 3), (10, 7));
        assert_eq!(*cells.first().unwrap(), (2, 3));
        assert_eq!(*cells.last().unwrap(), (10, 7));
        for pair in cells.windows(2) {
            let dx = (pair[1].0 as i64 - pair[0].0 as i64).abs();
            let dy = (pair[1].1 as i64 - pair[0].1 as i64).abs();
            assert!(dx <= 1 && dy <= 1 && dx + dy >= 1);
        }
        let back = bresenham_cells((10, 7), (2, 3));
        assert_eq!(back.len(), cells.len());
    }
}
