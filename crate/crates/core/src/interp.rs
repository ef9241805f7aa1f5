//! Off-lattice evaluation of sampled fields.

use serde::Serialize;

use crate::{Error, Result, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Multilinear,
    /// Tensor four-point Lagrange; exact on cubics away from the edges.
    Cubic,
}

/// Per-axis nodes and weights; at most four of each.
fn axis_weights(
    s: f64,
    m: usize,
    scheme: Interpolation,
    nodes: &mut [usize; 4],
    weights: &mut [f64; 4],
) -> usize {
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        nodes[0] = r as usize;
        weights[0] = 1.0;
        return 1;
    }
    let width = match scheme {
        Interpolation::Multilinear => 2,
        Interpolation::Cubic => 4,
    };
    let lo = (s.floor() as isize - (width as isize / 2 - 1)).clamp(0, (m - width) as isize) as usize;
    for j in 0..width {
        nodes[j] = lo + j;
        let mut w = 1.0;
        for k in 0..width {
            if k != j {
                w *= (s - (lo + k) as f64) / (j as f64 - k as f64);
            }
        }
        weights[j] = w;
    }
    width
}

/// Value of `field` at an arbitrary point of its domain.
pub fn interpolate(field: &ScalarField, x: &[f64], scheme: Interpolation) -> Result<f64> {
    let grid = field.grid();
    let n = grid.dim();
    let m = grid.points_per_axis();
    let mut nodes = [[0usize; 4]; 3];
    let mut weights = [[0.0; 4]; 3];
    let mut counts = [1usize; 3];
    for axis in 0..n {
        let s = (x[axis] + grid.radius()) / grid.spacing();
        if !(s >= -1e-9 && s <= (m - 1) as f64 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "point {:?} outside the domain of radius {}",
                &x[..n],
                grid.radius()
            )));
        }
        let s = s.clamp(0.0, (m - 1) as f64);
        counts[axis] = axis_weights(s, m, scheme, &mut nodes[axis], &mut weights[axis]);
    }
    let vals = field.values();
    let mut total = 0.0;
    for a in 0..counts[0] {
        for b in 0..counts[1] {
            for c in 0..counts[2] {
                let pick = [a, b, c];
                let mut idx = [0usize; 3];
                let mut w = 1.0;
                for axis in 0..n {
                    idx[axis] = nodes[axis][pick[axis]];
                    w *= weights[axis][pick[axis]];
                }
                total += w * vals[grid.flat_index(&idx[..n])];
            }
        }
    }
    Ok(total)
}
