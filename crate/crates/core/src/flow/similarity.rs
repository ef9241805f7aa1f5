//! Parabolic rescaling `λ⁻²u(λx)` and the self-similarity defect of a
//! physical-flow trajectory.

use crate::interp::{interpolate, Interpolation};
use crate::report::FlowReport;
use crate::{Error, Grid, Result, ScalarField};

/// Evaluator of `x ↦ λ⁻² u(λx)`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledEvaluator<'a> {
    field: &'a ScalarField,
    lambda: f64,
    interpolated: bool,
}

impl ScaledEvaluator<'_> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// True when `λx` can leave the lattice, i.e. `λ` is not an integer,
    /// and values come from cubic interpolation.
    pub fn interpolated(&self) -> bool {
        self.interpolated
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let n = self.field.grid().dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut y = [0.0; 3];
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.lambda * xi;
        }
        let v = interpolate(self.field, &y[..n], Interpolation::Cubic)?;
        Ok(v / (self.lambda * self.lambda))
    }

    /// Samples the evaluator on the lattice points of `window`.
    pub fn sample(&self, window: &Grid) -> Result<ScalarField> {
        let n = window.dim();
        let values = (0..window.len())
            .map(|k| self.eval(&window.point(k)[..n]))
            .collect::<Result<Vec<_>>>()?;
        ScalarField::new(*window, values)
    }
}

pub fn scaling_transform(u: &ScalarField, lambda: f64) -> Result<ScaledEvaluator<'_>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scaling factor must be positive, got {lambda}"
        )));
    }
    Ok(ScaledEvaluator {
        field: u,
        lambda,
        interpolated: (lambda - lambda.round()).abs() > 1e-12,
    })
}

/// `sup |t₁⁻¹u(√t₁ x, t₁) − t₂⁻¹u(√t₂ x, t₂)|` over lattice points with
/// `|x|∞ ≤ (R − k h)/√max(t₁, t₂)`, using the report's snapshots.
pub fn self_similarity_defect(report: &FlowReport, t1: f64, t2: f64, margin: usize) -> Result<f64> {
    for t in [t1, t2] {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("snapshot time must be positive, got {t}")));
        }
    }
    let a = &report.snapshot_at(t1)?.field;
    let b = &report.snapshot_at(t2)?.field;
    if t1 == t2 {
        return Ok(0.0);
    }
    let grid = *a.grid();
    if b.grid() != &grid {
        return Err(Error::InvalidArgument("snapshots live on different grids".into()));
    }
    let n = grid.dim();
    let reach = (grid.radius() - margin as f64 * grid.spacing()) / t1.max(t2).sqrt();
    let ea = scaling_transform(a, t1.sqrt())?;
    let eb = scaling_transform(b, t2.sqrt())?;
    let mut sup = 0.0f64;
    for k in 0..grid.len() {
        let x = grid.point(k);
        if x[..n].iter().any(|xi| xi.abs() > reach + 1e-12) {
            continue;
        }
        sup = sup.max((ea.eval(&x[..n])? - eb.eval(&x[..n])?).abs());
    }
    Ok(sup)
}
