use std::fmt::Write as _;
use std::path::Path;

use crate::numfmt::{parse_f64, sci17};
use crate::{Error, Grid, Result};

/// Exponent cut-off of the compact bump: `exp(-r²/w²)` is truncated to zero
/// once it drops to `e^-16`, i.e. for `r >= 4 w`.
pub const BUMP_CUTOFF_EXPONENT: f64 = 16.0;

const FIELD_MAGIC: &str = "lagflow-field v1";

/// Potential values on a lattice, row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: 0,
                point: grid.point(k)[..grid.dim()].to_vec(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Field that skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = grid.dim();
        let values = (0..grid.len()).map(|k| f(&grid.point(k)[..n])).collect();
        Self::new(grid, values)
    }

    /// `½ xᵀ A x + b·x + c` sampled on `grid`.
    pub fn quadratic(grid: Grid, a: &crate::SymMatrix, b: &[f64], c: f64) -> Result<Self> {
        let n = grid.dim();
        if a.dim() != n || b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.dim(),
            });
        }
        Self::from_fn(grid, |x| {
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += x[i] * a.get(i, j) * x[j];
                }
            }
            0.5 * q + b.iter().zip(x).map(|(bi, xi)| bi * xi).sum::<f64>() + c
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a lattice point given by coordinates; `None` off-lattice.
    pub fn at(&self, x: &[f64]) -> Option<f64> {
        self.grid.lattice_point(x).map(|k| self.values[k])
    }

    pub fn map(&self, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let n = self.grid.dim();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(&self.grid.point(k)[..n], v))
            .collect();
        Self::new(self.grid, values)
    }

    pub fn add_constant(&self, c: f64) -> Result<Self> {
        self.map(|_, v| v + c)
    }

    /// `sup |self - other|` over points at least `margin` cells inside.
    pub fn sup_distance(&self, other: &ScalarField, margin: usize) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("fields live on different grids".into()));
        }
        Ok(self
            .grid
            .interior_indices(margin)
            .into_iter()
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max))
    }

    pub fn sup_abs(&self, margin: usize) -> f64 {
        self.grid
            .interior_indices(margin)
            .into_iter()
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max)
    }

    /// Restriction to a centered window sub-lattice of the same spacing.
    pub fn restrict(&self, window: &Grid) -> Self {
        let values = (0..window.len())
            .map(|k| self.values[self.grid.embed(window, k)])
            .collect();
        Self::from_raw(*window, values)
    }

    /// Text snapshot: magic line, grid line, then one value per line.
    pub fn to_snapshot_string(&self) -> String {
        let mut s = String::with_capacity(32 * (self.values.len() + 2));
        s.push_str(FIELD_MAGIC);
        s.push('\n');
        let _ = writeln!(
            s,
            "dim={} m={} R={}",
            self.grid.dim(),
            self.grid.points_per_axis(),
            sci17(self.grid.radius())
        );
        for v in &self.values {
            s.push_str(&sci17(*v));
            s.push('\n');
        }
        s
    }

    pub fn parse_snapshot(text: &str) -> Result<Self> {
        let ctx = "field snapshot";
        let mut lines = text.lines();
        if lines.next() != Some(FIELD_MAGIC) {
            return Err(Error::parse(ctx, format!("first line must be '{FIELD_MAGIC}'")));
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(ctx, "missing grid line"))?;
        let (mut dim, mut m, mut r) = (None, None, None);
        for tok in header.split_whitespace() {
            match tok.split_once('=') {
                Some(("dim", v)) => dim = v.parse::<usize>().ok(),
                Some(("m", v)) => m = v.parse::<usize>().ok(),
                Some(("R", v)) => r = parse_f64(v),
                _ => return Err(Error::parse(ctx, format!("unexpected token '{tok}'"))),
            }
        }
        let (Some(dim), Some(m), Some(r)) = (dim, m, r) else {
            return Err(Error::parse(ctx, "grid line needs dim=, m= and R="));
        };
        let grid = Grid::new(dim, r, m)?;
        let values = lines
            .filter(|l| !l.is_empty())
            .map(|l| parse_f64(l.trim()).ok_or_else(|| Error::parse(ctx, format!("bad value '{l}'"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_snapshot(&text)
    }
}

/// Upper bound on the spectral radius of the Hessian of
/// `amplitude * exp(-|x-c|²/width²)`: `2 |amplitude| / width²`.
pub fn bump_hessian_bound(amplitude: f64, width: f64) -> f64 {
    2.0 * amplitude.abs() / (width * width)
}

/// Adds a Gaussian bump truncated to exactly zero at `|x - center| >= 4 width`.
pub fn add_compact_bump(
    field: &ScalarField,
    center: &[f64],
    amplitude: f64,
    width: f64,
) -> Result<ScalarField> {
    let grid = field.grid();
    let n = grid.dim();
    if center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: center.len(),
        });
    }
    if !(width > 0.0 && width.is_finite()) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bump needs finite amplitude and positive width, got ({amplitude}, {width})"
        )));
    }
    let support = BUMP_CUTOFF_EXPONENT.sqrt() * width;
    if center
        .iter()
        .any(|c| c - support <= -grid.radius() || c + support >= grid.radius())
    {
        return Err(Error::SupportExceedsDomain {
            center: center.to_vec(),
            support,
            radius: grid.radius(),
        });
    }
    field.map(|x, v| v + bump_value(x, center, amplitude, width))
}

pub(crate) fn bump_value(x: &[f64], center: &[f64], amplitude: f64, width: f64) -> f64 {
    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    let e = r2 / (width * width);
    if e >= BUMP_CUTOFF_EXPONENT {
        0.0
    } else {
        amplitude * (-e).exp()
    }
}
