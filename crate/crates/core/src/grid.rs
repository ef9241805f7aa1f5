use serde::Serialize;

use crate::{Error, Result};

/// Uniform tensor-product lattice on `[-R, R]^n`.
///
/// `points_per_axis` is odd so the origin is a lattice point; coordinates are
/// always computed as `-R + i*h` from the integer index, never accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    radius: f64,
    points_per_axis: usize,
    spacing: f64,
}

impl Grid {
    pub fn new(dim: usize, radius: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidGrid(format!("radius {radius} must be positive")));
        }
        if points_per_axis < 5 || points_per_axis % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} must be odd and >= 5"
            )));
        }
        let spacing = 2.0 * radius / (points_per_axis - 1) as f64;
        Ok(Self {
            dim,
            radius,
            points_per_axis,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the origin along each axis.
    pub fn center_index(&self) -> usize {
        (self.points_per_axis - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major stride of `axis` (axis 0 slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coord(&self, index: usize) -> f64 {
        -self.radius + index as f64 * self.spacing
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let m = self.points_per_axis;
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % m;
            rest /= m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .take(self.dim)
            .fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    /// Coordinates of a flat lattice index, padded with zeros past `dim`.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    /// True when every index of `flat` is at least `margin` cells from the boundary.
    pub fn is_interior(&self, flat: usize, margin: usize) -> bool {
        let idx = self.multi_index(flat);
        let hi = self.points_per_axis - 1;
        idx[..self.dim]
            .iter()
            .all(|&i| i >= margin && i + margin <= hi)
    }

    /// Flat indices at least `margin` cells from the boundary, in row-major order.
    pub fn interior_indices(&self, margin: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.is_interior(k, margin))
            .collect()
    }

    /// Lattice index of coordinate `x` along an axis when `x` is (to within
    /// `1e-9 h`) a lattice coordinate inside the grid.
    pub fn lattice_index(&self, x: f64) -> Option<usize> {
        let s = (x + self.radius) / self.spacing;
        let r = s.round();
        if (s - r).abs() > 1e-9 || r < 0.0 || r > (self.points_per_axis - 1) as f64 {
            return None;
        }
        Some(r as usize)
    }

    /// Flat index of point `x` when it lies on the lattice.
    pub fn lattice_point(&self, x: &[f64]) -> Option<usize> {
        let mut idx = [0usize; 3];
        for axis in 0..self.dim {
            idx[axis] = self.lattice_index(x[axis])?;
        }
        Some(self.flat_index(&idx[..self.dim]))
    }

    /// Sub-lattice with the same spacing covering `[-k h, k h]^n`.
    pub fn window(&self, half_width_cells: usize) -> Result<Grid> {
        if half_width_cells > self.center_index() {
            return Err(Error::InvalidGrid(format!(
                "window of {half_width_cells} cells exceeds the grid"
            )));
        }
        let mut g = Grid::new(
            self.dim,
            half_width_cells as f64 * self.spacing,
            2 * half_width_cells + 1,
        )?;
        g.spacing = self.spacing;
        Ok(g)
    }

    /// Flat index in `self` of the point with flat index `flat` in a window of `self`.
    pub fn embed(&self, window: &Grid, flat: usize) -> usize {
        let offset = self.center_index() - window.center_index();
        let widx = window.multi_index(flat);
        let mut idx = [0usize; 3];
        for axis in 0..self.dim {
            idx[axis] = widx[axis] + offset;
        }
        self.flat_index(&idx[..self.dim])
    }
}
