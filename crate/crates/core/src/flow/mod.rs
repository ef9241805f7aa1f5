//! Time integration of the physical, rescaled expander and normalized
//! shrinker flows on the truncated lattice.

mod implicit;
mod similarity;

pub use implicit::step_physical_implicit;
pub use similarity::{scaling_transform, self_similarity_defect, ScaledEvaluator};

use serde::Serialize;

use crate::closure::{ClosureKind, Padded, SolitonKind};
use crate::diagnostics::{d3_sup_from_hessian, hessian_range, quadratic_fit};
use crate::operator::{angle, angle_packed};
use crate::parallel::{fill, max_over, with_workers};
use crate::report::{FlowReport, ReportRow, Snapshot};
use crate::stencil::{expander_residual, hessian, physical_similarity_residual, shrinker_residual};
use crate::{BoundaryClosure, DriftScheme, Error, Grid, Integrator, Result, RunConfig, ScalarField};

/// Values above this magnitude are reported as blow-up.
pub const BLOWUP_LIMIT: f64 = 1e10;
/// Consecutive below-tolerance steps that count as stationarity.
pub const STATIONARY_CHECKS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// `∂u/∂t = G(D²u)`.
    Physical,
    /// `∂v/∂s = G(D²v) − v + ½ x·∇v`.
    RescaledExpander,
    /// `∂w/∂s = G(D²w) + w − ½ y·∇w`, with gauge projection.
    NormalizedShrinker,
}

impl FlowKind {
    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Physical => "physical",
            FlowKind::RescaledExpander => "rescaled_expander",
            FlowKind::NormalizedShrinker => "normalized_shrinker",
        }
    }

    /// Sign of the drift coefficient `σ` in `σ·½ x·∇`, zero for the physical flow.
    fn drift_sign(self) -> f64 {
        match self {
            FlowKind::Physical => 0.0,
            FlowKind::RescaledExpander => 1.0,
            FlowKind::NormalizedShrinker => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub field: ScalarField,
    /// `t` for the physical flow, `s` for the rescaled flows.
    pub time: f64,
    pub step_count: usize,
}

impl FlowState {
    pub fn new(field: ScalarField) -> Self {
        Self::at(field, 0.0)
    }

    pub fn at(field: ScalarField, time: f64) -> Self {
        Self {
            field,
            time,
            step_count: 0,
        }
    }
}

/// Largest stable explicit step for `kind` on `grid`.
pub fn stable_step(kind: FlowKind, grid: &Grid, dt_safety: f64) -> f64 {
    let h = grid.spacing();
    let diffusion = h * h / (2.0 * grid.dim() as f64);
    match kind {
        FlowKind::Physical => dt_safety * diffusion,
        _ => dt_safety * diffusion.min(h / (0.5 * grid.radius()).max(h)),
    }
}

/// Value and gradient at the origin that the shrinker gauge pins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauge {
    pub value: f64,
    pub gradient: [f64; 3],
}

impl Gauge {
    /// Value and centered gradient of `w` at the origin.
    pub fn of_field(w: &ScalarField) -> Self {
        let grid = w.grid();
        let c = grid.flat_index(&[grid.center_index(); 3][..grid.dim()]);
        let v = w.values();
        let mut gradient = [0.0; 3];
        for (axis, g) in gradient.iter_mut().enumerate().take(grid.dim()) {
            let s = grid.stride(axis);
            *g = (v[c + s] - v[c - s]) / (2.0 * grid.spacing());
        }
        Self {
            value: v[c],
            gradient,
        }
    }

    /// The quadratic shrinker of the cone sector at the origin: value
    /// `−G(A) + offset`, zero gradient.
    pub fn of_closure(closure: &BoundaryClosure) -> Result<Option<Self>> {
        let (ClosureKind::StationaryConeDirichlet(SolitonKind::Shrinker), Some(cone)) =
            (closure.kind, &closure.cone)
        else {
            return Ok(None);
        };
        let origin = vec![0.0; cone.dim()];
        let a = cone
            .hessian_at(&origin)
            .ok_or(Error::SectorCoverageGap { point: origin })?;
        Ok(Some(Self {
            value: closure.offset - angle(a)?,
            gradient: [0.0; 3],
        }))
    }

    /// Subtracts `w(0) − w*(0) + (∇w(0) − ∇w*(0))·y` from `w`.
    fn project(&self, values: &mut [f64], grid: &Grid) {
        let tmp = ScalarField::from_raw(*grid, values.to_vec());
        let now = Gauge::of_field(&tmp);
        let n = grid.dim();
        let c0 = now.value - self.value;
        let mut g0 = [0.0; 3];
        for i in 0..n {
            g0[i] = now.gradient[i] - self.gradient[i];
        }
        fill(values, |k| {
            let y = grid.point(k);
            let mut shift = c0;
            for i in 0..n {
                shift += g0[i] * y[i];
            }
            tmp.values()[k] - shift
        });
    }
}

/// `∂ₜ field` for `kind`, zero where the stencils cannot reach.
fn rate(
    kind: FlowKind,
    u: &ScalarField,
    closure: &BoundaryClosure,
    drift: DriftScheme,
) -> Result<Vec<f64>> {
    let grid = *u.grid();
    let n = grid.dim();
    let pad = Padded::build(u, closure)?;
    let margin = closure.undefined_margin();
    let vals = u.values();
    let sigma = kind.drift_sign();
    let mut out = vec![0.0; grid.len()];
    fill(&mut out, |k| {
        if !grid.is_interior(k, margin) {
            return 0.0;
        }
        let p = pad.index_of(k);
        let mut h = [0.0; 6];
        pad.hessian_at(p, &mut h);
        let g = angle_packed(n, &h);
        if sigma == 0.0 {
            return g;
        }
        let x = grid.point(k);
        let mut advect = 0.0;
        match drift {
            DriftScheme::Centered => {
                let mut grad = [0.0; 3];
                pad.gradient_at(p, &mut grad);
                for i in 0..n {
                    advect += x[i] * grad[i];
                }
            }
            DriftScheme::Upwind => {
                for i in 0..n {
                    let a = sigma * x[i];
                    if a != 0.0 {
                        advect += x[i] * pad.one_sided(p, i, a > 0.0);
                    }
                }
            }
        }
        g + sigma * (0.5 * advect - vals[k])
    });
    Ok(out)
}

fn check_finite(values: &[f64], grid: &Grid, step: usize) -> Result<()> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step,
            point: grid.point(k)[..grid.dim()].to_vec(),
        });
    }
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > BLOWUP_LIMIT {
        return Err(Error::BlowUp { step, value: peak });
    }
    Ok(())
}

/// One explicit midpoint RK2 step; ghost values are taken at the stage times.
fn rk2(
    kind: FlowKind,
    state: &FlowState,
    closure: &BoundaryClosure,
    dt: f64,
    drift: DriftScheme,
) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let grid = *state.field.grid();
    let u = state.field.values();
    let k1 = rate(kind, &state.field, &closure.at_time(state.time), drift)?;
    let mut mid = vec![0.0; u.len()];
    fill(&mut mid, |k| u[k] + 0.5 * dt * k1[k]);
    let mid = ScalarField::from_raw(grid, mid);
    let k2 = rate(kind, &mid, &closure.at_time(state.time + 0.5 * dt), drift)?;
    let mut next = vec![0.0; u.len()];
    fill(&mut next, |k| u[k] + dt * k2[k]);
    Ok(next)
}

fn advance(state: &FlowState, values: Vec<f64>, dt: f64) -> Result<FlowState> {
    let grid = *state.field.grid();
    let step = state.step_count + 1;
    check_finite(&values, &grid, step)?;
    Ok(FlowState {
        field: ScalarField::from_raw(grid, values),
        time: state.time + dt,
        step_count: step,
    })
}

/// One RK2 step of `∂u/∂t = G(D²u)`.
pub fn step_physical(state: &FlowState, closure: &BoundaryClosure, dt: f64) -> Result<FlowState> {
    let next = rk2(FlowKind::Physical, state, closure, dt, DriftScheme::Centered)?;
    advance(state, next, dt)
}

/// One RK2 step of `∂v/∂s = G(D²v) − v + ½ x·∇v`.
pub fn step_rescaled_expander(
    state: &FlowState,
    closure: &BoundaryClosure,
    ds: f64,
    drift: DriftScheme,
) -> Result<FlowState> {
    let next = rk2(FlowKind::RescaledExpander, state, closure, ds, drift)?;
    advance(state, next, ds)
}

/// One RK2 step of `∂w/∂s = G(D²w) + w − ½ y·∇w` followed by the gauge
/// projection onto `gauge`.
pub fn step_normalized_shrinker(
    state: &FlowState,
    closure: &BoundaryClosure,
    ds: f64,
    drift: DriftScheme,
    gauge: &Gauge,
) -> Result<FlowState> {
    let mut next = rk2(FlowKind::NormalizedShrinker, state, closure, ds, drift)?;
    gauge.project(&mut next, state.field.grid());
    advance(state, next, ds)
}

/// Norms recorded in a report row, computed from the field alone (plus
/// the change rate carried over from the step).
pub fn snapshot_metrics(
    kind: FlowKind,
    field: &ScalarField,
    time: f64,
    closure: &BoundaryClosure,
    margin: usize,
) -> Result<ReportRow> {
    let closure = closure.at_time(time);
    let margin = margin.max(closure.undefined_margin() + 1);
    let h = hessian(field, &closure)?;
    let (hess_min, hess_max) = hessian_range(&h, margin);
    let d3 = d3_sup_from_hessian(&h, margin)?;
    let residual = match kind {
        FlowKind::Physical if time > 0.0 => {
            Some(physical_similarity_residual(field, time, &closure)?)
        }
        FlowKind::Physical => None,
        FlowKind::RescaledExpander => Some(expander_residual(field, &closure)?),
        FlowKind::NormalizedShrinker => Some(shrinker_residual(field, &closure)?),
    };
    let residual_sup = residual.map_or(f64::NAN, |r| r.sup_abs(margin));
    let d3_sqrt_t = match kind {
        FlowKind::Physical => d3 * time.max(0.0).sqrt(),
        _ => d3,
    };
    Ok(ReportRow {
        step: 0,
        time,
        residual_sup,
        hess_min,
        hess_max,
        d3_sup: d3,
        d3_sqrt_t,
        defect: quadratic_fit(field, margin)?.distance,
        change_rate: 0.0,
    })
}

/// Condition A margin `(1 − δ) − max spectral radius of D²u` over every
/// point where the Hessian stencil is defined.
pub fn condition_a_margin(u: &ScalarField, closure: &BoundaryClosure, delta: f64) -> Result<f64> {
    let h = hessian(u, closure)?;
    let (lo, hi) = hessian_range(&h, 0);
    Ok((1.0 - delta) - lo.abs().max(hi.abs()))
}

fn sup_rate(a: &[f64], b: &[f64], idx: &[usize], dt: f64) -> f64 {
    max_over(idx, 0.0, |k| (a[k] - b[k]).abs()) / dt
}

/// Runs `kind` from `u0` to `config.end_time` (or stationarity for the
/// rescaled flows), recording a report row every `snapshot_stride` steps,
/// at every requested snapshot time and at the end.
pub fn run_flow(
    u0: &ScalarField,
    closure: &BoundaryClosure,
    config: &RunConfig,
    kind: FlowKind,
) -> Result<(FlowState, FlowReport)> {
    run_flow_gauged(u0, closure, config, kind, None)
}

/// [`run_flow`] with an explicit shrinker gauge reference. Without one the
/// shrinker flow pins the closure's quadratic shrinker at the origin, or
/// `u0` itself when the closure has none.
pub fn run_flow_gauged(
    u0: &ScalarField,
    closure: &BoundaryClosure,
    config: &RunConfig,
    kind: FlowKind,
    gauge: Option<Gauge>,
) -> Result<(FlowState, FlowReport)> {
    config.validate()?;
    if let Some(cone) = &closure.cone {
        if cone.dim() != u0.grid().dim() {
            return Err(Error::DimensionMismatch {
                expected: u0.grid().dim(),
                got: cone.dim(),
            });
        }
    }
    if u0.grid().points_per_axis() < 2 * config.interior_margin + 3 {
        return Err(Error::GridTooSmall(format!(
            "{} points per axis leave no interior at margin {}",
            u0.grid().points_per_axis(),
            config.interior_margin
        )));
    }
    let implicit = match config.integrator {
        Integrator::ExplicitRk2 => None,
        Integrator::LinearizedBackwardEuler { dt_multiplier } => {
            if kind != FlowKind::Physical {
                return Err(Error::InvalidArgument(
                    "the linearized backward Euler step is only available for the physical flow"
                        .into(),
                ));
            }
            Some(dt_multiplier)
        }
    };
    let gauge = match (kind, gauge) {
        (FlowKind::NormalizedShrinker, Some(g)) => Some(g),
        (FlowKind::NormalizedShrinker, None) => {
            Some(Gauge::of_closure(closure)?.unwrap_or_else(|| Gauge::of_field(u0)))
        }
        _ => None,
    };
    with_workers(config.workers, || {
        march(u0, closure, config, kind, gauge, implicit)
    })
}

fn march(
    u0: &ScalarField,
    closure: &BoundaryClosure,
    config: &RunConfig,
    kind: FlowKind,
    gauge: Option<Gauge>,
    implicit: Option<f64>,
) -> Result<(FlowState, FlowReport)> {
    let grid = *u0.grid();
    let mut report = FlowReport::default();
    let margin_a = condition_a_margin(u0, closure, config.delta)?;
    if margin_a < -crate::soliton::CONDITION_A_SLACK {
        let msg = format!(
            "initial data violates Condition A with delta = {}: margin {margin_a:.3e}",
            config.delta
        );
        log::warn!("{msg}");
        report.warnings.push(msg);
    }

    let base_dt = stable_step(kind, &grid, config.dt_safety) * implicit.unwrap_or(1.0);
    let mut targets: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t > 0.0 && *t < config.end_time)
        .collect();
    targets.push(config.end_time);
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let is_snapshot_time =
        |t: f64| config.snapshot_times.iter().any(|s| (s - t).abs() <= 1e-12 * s.max(1.0));

    let interior = grid.interior_indices(config.interior_margin);
    let mut state = FlowState::new(u0.clone());
    let record = |report: &mut FlowReport, state: &FlowState, change_rate: f64, keep: bool| {
        let mut row = snapshot_metrics(kind, &state.field, state.time, closure, config.interior_margin)?;
        row.step = state.step_count;
        row.change_rate = change_rate;
        log::debug!(
            "{} step {} t={:.6} residual={:.3e} d3={:.3e}",
            kind.name(),
            row.step,
            row.time,
            row.residual_sup,
            row.d3_sup
        );
        report.rows.push(row);
        if keep {
            report.snapshots.push(Snapshot {
                step: state.step_count,
                time: state.time,
                field: state.field.clone(),
            });
        }
        Ok::<(), Error>(())
    };
    record(&mut report, &state, 0.0, config.keep_snapshots || is_snapshot_time(0.0))?;

    let mut target = 0;
    let mut quiet = 0;
    loop {
        let goal = targets[target];
        let mut dt = base_dt;
        let landing = state.time + dt >= goal - 1e-12 * goal.max(1.0);
        if landing {
            dt = goal - state.time;
        }
        let mut next = match (kind, implicit) {
            (FlowKind::Physical, None) => step_physical(&state, closure, dt)?,
            (FlowKind::Physical, Some(_)) => step_physical_implicit(&state, closure, dt)?.0,
            (FlowKind::RescaledExpander, _) => {
                step_rescaled_expander(&state, closure, dt, config.drift)?
            }
            (FlowKind::NormalizedShrinker, _) => step_normalized_shrinker(
                &state,
                closure,
                dt,
                config.drift,
                gauge.as_ref().expect("shrinker gauge"),
            )?,
        };
        if landing {
            next.time = goal;
            target += 1;
        }
        let change = sup_rate(next.field.values(), state.field.values(), &interior, dt);
        state = next;

        if kind != FlowKind::Physical {
            quiet = if change <= config.stationarity_tol { quiet + 1 } else { 0 };
        }
        let done = target == targets.len();
        let stationary = quiet >= STATIONARY_CHECKS;
        let snap = landing && is_snapshot_time(state.time);
        if done || stationary || snap || state.step_count % config.snapshot_stride == 0 {
            record(&mut report, &state, change, config.keep_snapshots || snap || done || stationary)?;
        }
        if stationary {
            report.stationary = true;
            log::info!("{} stationary at s = {:.6}", kind.name(), state.time);
            break;
        }
        if done {
            break;
        }
    }
    Ok((state, report))
}

#[cfg(test)]
mod tests;
