use serde::Serialize;

use crate::{Error, Result};

/// Discretization of the drift term `±½ x·∇` in the rescaled flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftScheme {
    /// Second-order centered differences; the discrete stationary state then
    /// zeroes the centered residual operators exactly.
    Centered,
    /// First-order upwinding by the sign of each coordinate.
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Integrator {
    /// Explicit midpoint RK2 at `dt_safety · h²/(2n)`.
    ExplicitRk2,
    /// Backward Euler with coefficients `(I + (D²u)²)⁻¹` frozen at the start
    /// of the step; `dt_multiplier` scales the explicit step. Physical flow only.
    LinearizedBackwardEuler { dt_multiplier: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Condition A margin `δ ∈ (0, 1)`.
    pub delta: f64,
    pub dt_safety: f64,
    /// `t_end` for the physical flow, `s_end` for the rescaled flows.
    pub end_time: f64,
    pub snapshot_stride: usize,
    /// Cells excluded near the boundary when measuring norms.
    pub interior_margin: usize,
    /// Sup-interior `|Δfield|/Δs` below which a rescaled flow counts as stationary.
    pub stationarity_tol: f64,
    /// Residual a soliton certificate has to meet.
    pub residual_tol: f64,
    pub drift: DriftScheme,
    pub integrator: Integrator,
    /// Worker threads; 0 uses the global pool. Results do not depend on it.
    pub workers: usize,
    /// Keep a field snapshot with every report row.
    pub keep_snapshots: bool,
    /// Flow times that steps land on exactly and always snapshot.
    pub snapshot_times: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            dt_safety: 0.8,
            end_time: 1.0,
            snapshot_stride: 16,
            interior_margin: 4,
            stationarity_tol: 1e-8,
            residual_tol: 1e-4,
            drift: DriftScheme::Centered,
            integrator: Integrator::ExplicitRk2,
            workers: 0,
            keep_snapshots: false,
            snapshot_times: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("run config: {what}")));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad("dt_safety must lie in (0, 1]");
        }
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return bad("end time must be positive");
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be >= 1");
        }
        if self.interior_margin < 2 {
            return bad("interior_margin must be >= 2");
        }
        if !(self.stationarity_tol > 0.0) || !(self.residual_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if let Integrator::LinearizedBackwardEuler { dt_multiplier } = self.integrator {
            if !(dt_multiplier > 0.0 && dt_multiplier.is_finite()) {
                return bad("dt_multiplier must be positive");
            }
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("snapshot times must be finite and non-negative");
        }
        Ok(())
    }

    /// Condition A ceiling `1 − δ`.
    pub fn hessian_bound(&self) -> f64 {
        1.0 - self.delta
    }
}
