//! Quadratic solitons, expander construction by parabolic relaxation,
//! shrinker probing, translator checks and the Condition A/B verifiers.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

pub use crate::closure::SolitonKind;
use crate::cone::sample_cone;
use crate::diagnostics::d3_sup;
use crate::flow::{condition_a_margin, run_flow, run_flow_gauged, scaling_transform, FlowKind, Gauge};
use crate::interp::{interpolate, Interpolation};
use crate::numfmt::sci17;
use crate::operator::angle;
use crate::report::FlowReport;
use crate::stencil::{angle_field, expander_residual, shrinker_residual, translator_residual};
use crate::{BoundaryClosure, ConeSpec, Error, Grid, Result, RunConfig, ScalarField, SymMatrix};

/// Roundoff slack of the Condition A pass test.
pub const CONDITION_A_SLACK: f64 = 1e-12;
/// Scaling factors tried by [`check_condition_b`].
pub const CONDITION_B_LAMBDAS: [usize; 3] = [2, 3, 4];

/// `½ xᵀA x ± G(A)`, the quadratic expander (`+`) or shrinker (`−`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSoliton {
    pub hessian: SymMatrix,
    pub kind: SolitonKind,
    pub constant: f64,
}

pub fn quadratic_soliton(a: SymMatrix, kind: SolitonKind) -> Result<QuadraticSoliton> {
    let rho = a.spectral_radius()?;
    if !(rho < 1.0) {
        return Err(Error::SpectralRadius(rho));
    }
    let constant = kind.sign() * angle(&a)?;
    Ok(QuadraticSoliton {
        hessian: a,
        kind,
        constant,
    })
}

impl QuadraticSoliton {
    pub fn sample(&self, grid: &Grid) -> Result<ScalarField> {
        let n = grid.dim();
        ScalarField::quadratic(*grid, &self.hessian, &vec![0.0; n], self.constant)
    }

    pub fn cone(&self) -> ConeSpec {
        ConeSpec::quadratic(self.hessian.clone())
    }

    /// Dirichlet closure holding the soliton on the ghost layer.
    pub fn closure(&self) -> BoundaryClosure {
        BoundaryClosure::stationary_cone(self.cone(), self.kind)
    }

    pub fn gauge(&self) -> Gauge {
        Gauge {
            value: self.constant,
            gradient: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Expander,
    Shrinker,
    Translator,
}

impl From<SolitonKind> for CertificateKind {
    fn from(k: SolitonKind) -> Self {
        match k {
            SolitonKind::Expander => CertificateKind::Expander,
            SolitonKind::Shrinker => CertificateKind::Shrinker,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub grid: Grid,
    pub config: RunConfig,
    pub flow: Option<FlowKind>,
    pub steps: usize,
    pub final_time: f64,
    pub stationary: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonCertificate {
    pub kind: CertificateKind,
    pub residual_sup_interior: f64,
    pub residual_field: ScalarField,
    pub interior_margin: usize,
    pub condition_a_margin: f64,
    pub d3_sup: f64,
    /// Further measurements, e.g. the shrinker's d3 trajectory or the
    /// translator's dynamic defect.
    pub details: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub provenance: Provenance,
}

/// Replaces every floating-point number in `v` by its 17-digit string.
fn floats_as_strings(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::String(sci17(n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(a) => Value::Array(a.into_iter().map(floats_as_strings).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, floats_as_strings(v))).collect()),
        other => other,
    }
}

impl SolitonCertificate {
    /// Sup of `|residual_field|` over the interior margin region.
    pub fn recompute_residual_sup(&self) -> f64 {
        self.residual_field.sup_abs(self.interior_margin)
    }

    pub fn to_json(&self) -> Value {
        let p = &self.provenance;
        let details: Map<String, Value> = self
            .details
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(sci17(*v))))
            .collect();
        let config = serde_json::to_value(&p.config).unwrap_or(Value::Null);
        let grid = serde_json::to_value(p.grid).unwrap_or(Value::Null);
        json!({
            "kind": self.kind,
            "residual_sup_interior": sci17(self.residual_sup_interior),
            "condition_a_margin": sci17(self.condition_a_margin),
            "d3_sup": sci17(self.d3_sup),
            "interior_margin": self.interior_margin,
            "details": details,
            "flags": self.flags,
            "run": {
                "grid": floats_as_strings(grid),
                "config": floats_as_strings(config),
                "flow": p.flow.map(FlowKind::name),
                "steps": p.steps,
                "final_time": sci17(p.final_time),
                "stationary": p.stationary,
                "wall_time_s": sci17(p.wall_time_s),
            }
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        s.push('\n');
        s
    }
}

fn all_sectors_equal(cone: &ConeSpec) -> bool {
    let first = &cone.sectors()[0].hessian;
    cone.sectors().iter().all(|s| &s.hessian == first)
}

/// Closure for the rescaled expander flow from `cone`: the stationary
/// Dirichlet ghosts when the cone is a single quadratic, Hessian
/// extrapolation otherwise (the Dirichlet ghosts are discontinuous where a
/// sector interface meets the boundary).
pub fn expander_closure(cone: &ConeSpec) -> BoundaryClosure {
    if all_sectors_equal(cone) {
        BoundaryClosure::stationary_cone(cone.clone(), SolitonKind::Expander)
    } else {
        BoundaryClosure::hessian_extrapolation(cone.clone())
    }
}

/// Closure for the physical flow from `cone`, chosen as in [`expander_closure`].
pub fn physical_closure(cone: &ConeSpec) -> BoundaryClosure {
    if all_sectors_equal(cone) {
        BoundaryClosure::frozen_hessian(cone.clone())
    } else {
        BoundaryClosure::hessian_extrapolation(cone.clone())
    }
}

fn check_cone_condition_a(cone: &ConeSpec, delta: f64) -> Result<()> {
    let margin = (1.0 - delta) - cone.max_spectral_radius()?;
    if margin < -CONDITION_A_SLACK {
        return Err(Error::ConditionA { margin, delta });
    }
    Ok(())
}

/// Result of [`make_expander_run`].
#[derive(Debug, Clone)]
pub struct ExpanderRun {
    pub field: ScalarField,
    pub certificate: SolitonCertificate,
    pub report: FlowReport,
}

/// Relaxes the sampled cone under the rescaled expander flow until it is
/// stationary, then certifies the result.
pub fn make_expander(
    cone: &ConeSpec,
    grid: &Grid,
    config: &RunConfig,
) -> Result<(ScalarField, SolitonCertificate)> {
    let run = make_expander_run(cone, grid, config)?;
    Ok((run.field, run.certificate))
}

pub fn make_expander_run(cone: &ConeSpec, grid: &Grid, config: &RunConfig) -> Result<ExpanderRun> {
    let start = Instant::now();
    check_cone_condition_a(cone, config.delta)?;
    let closure = expander_closure(cone);
    let v0 = sample_cone(cone, grid)?;
    let (state, report) = run_flow(&v0, &closure, config, FlowKind::RescaledExpander)?;
    let residual_field = expander_residual(&state.field, &closure)?;
    let k = config.interior_margin;
    let residual = residual_field.sup_abs(k);
    if !(residual <= config.residual_tol) {
        return Err(Error::NonConvergence {
            s_end: state.time,
            final_residual: residual,
        });
    }
    let certificate = SolitonCertificate {
        kind: CertificateKind::Expander,
        residual_sup_interior: residual,
        residual_field,
        interior_margin: k,
        condition_a_margin: condition_a_margin(&state.field, &closure, config.delta)?,
        d3_sup: d3_sup(&state.field, &closure, k)?,
        details: BTreeMap::new(),
        flags: BTreeMap::from([("stationary".to_string(), report.stationary)]),
        provenance: Provenance {
            grid: *grid,
            config: config.clone(),
            flow: Some(FlowKind::RescaledExpander),
            steps: state.step_count,
            final_time: state.time,
            stationary: report.stationary,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    };
    Ok(ExpanderRun {
        field: state.field,
        certificate,
        report,
    })
}

/// Finite-radius blow-down of an expander.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeEstimate {
    /// Estimated cone on the unit window `|x|∞ ≤ 1`.
    pub field: ScalarField,
    /// Evaluation radius `r = R − k h`.
    pub radius: f64,
    /// `max |G(D²v)| / r²`, the size of the additive-constant term that has
    /// not yet died out at radius `r`.
    pub defect_bound: f64,
}

/// Estimates the cone `lim λ⁻² v(λx)` by radial extrapolation from the
/// cube of half-width `r = R − k h`: `U(x) ≈ (|x|∞/r)² v(r x/|x|∞)`.
pub fn cone_of_expander(v: &ScalarField, closure: &BoundaryClosure, margin: usize) -> Result<ConeEstimate> {
    let grid = v.grid();
    let n = grid.dim();
    let h = grid.spacing();
    let radius = grid.radius() - margin as f64 * h;
    if !(radius >= 1.0) {
        return Err(Error::GridTooSmall(format!(
            "evaluation radius {radius} is below the unit window"
        )));
    }
    let window = grid.window((1.0 / h + 1e-9).floor() as usize)?;
    let mut values = vec![0.0; window.len()];
    for (k, out) in values.iter_mut().enumerate() {
        let x = window.point(k);
        let norm = x[..n].iter().fold(0.0f64, |m, xi| m.max(xi.abs()));
        if norm < 0.5 * h {
            continue;
        }
        let mut y = [0.0; 3];
        for i in 0..n {
            y[i] = radius * x[i] / norm;
        }
        let s = norm / radius;
        *out = s * s * interpolate(v, &y[..n], Interpolation::Cubic)?;
    }
    let g = angle_field(v, closure)?;
    let defect_bound = g.sup_abs(margin.max(closure.undefined_margin())) / (radius * radius);
    Ok(ConeEstimate {
        field: ScalarField::new(window, values)?,
        radius,
        defect_bound,
    })
}

/// Runs the normalized shrinker flow from `w0` with the gauge pinned to
/// `reference` and reports whether third derivatives decay.
pub fn probe_shrinker(
    w0: &ScalarField,
    reference: &QuadraticSoliton,
    config: &RunConfig,
) -> Result<(SolitonCertificate, FlowReport)> {
    let start = Instant::now();
    if reference.kind != SolitonKind::Shrinker {
        return Err(Error::InvalidArgument("reference must be a quadratic shrinker".into()));
    }
    // Dirichlet ghosts pin the neutral quadratic mode and feed a boundary layer.
    let closure = BoundaryClosure::quadratic_extrapolation();
    let margin = condition_a_margin(w0, &closure, config.delta)?;
    if margin < -CONDITION_A_SLACK {
        return Err(Error::ConditionA {
            margin,
            delta: config.delta,
        });
    }
    let (state, report) = run_flow_gauged(
        w0,
        &closure,
        config,
        FlowKind::NormalizedShrinker,
        Some(reference.gauge()),
    )?;
    let k = config.interior_margin;
    let residual_field = shrinker_residual(&state.field, &closure)?;
    let first = report.rows.first().ok_or(Error::EmptyReport)?;
    let last = report.rows.last().ok_or(Error::EmptyReport)?;
    let window: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.time >= 1.0 - 1e-12 && r.time <= 5.0 + 1e-12)
        .collect();
    let d3_decreasing = window.len() >= 2 && window.windows(2).all(|w| w[1].d3_sup < w[0].d3_sup);
    let at_snapshots: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.step == 0 || report.snapshots.iter().any(|s| s.step == r.step))
        .map(|r| r.defect)
        .collect();
    let fit_decreasing = at_snapshots.len() >= 2 && at_snapshots.windows(2).all(|w| w[1] < w[0]);
    let fit_decreasing_rows = report.rows.windows(2).all(|w| w[1].defect < w[0].defect);
    let ratio = if first.d3_sup > 0.0 { last.d3_sup / first.d3_sup } else { 0.0 };
    let certificate = SolitonCertificate {
        kind: CertificateKind::Shrinker,
        residual_sup_interior: residual_field.sup_abs(k),
        residual_field,
        interior_margin: k,
        condition_a_margin: condition_a_margin(&state.field, &closure, config.delta)?,
        d3_sup: last.d3_sup,
        details: BTreeMap::from([
            ("d3_initial".to_string(), first.d3_sup),
            ("d3_final".to_string(), last.d3_sup),
            ("d3_ratio".to_string(), ratio),
            ("fit_distance_initial".to_string(), first.defect),
            ("fit_distance_final".to_string(), last.defect),
        ]),
        flags: BTreeMap::from([
            ("d3_decreasing".to_string(), d3_decreasing),
            ("fit_distance_decreasing".to_string(), fit_decreasing),
            ("fit_distance_decreasing_all_rows".to_string(), fit_decreasing_rows),
        ]),
        provenance: Provenance {
            grid: *w0.grid(),
            config: config.clone(),
            flow: Some(FlowKind::NormalizedShrinker),
            steps: state.step_count,
            final_time: state.time,
            stationary: report.stationary,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    };
    Ok((certificate, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionA {
    pub pass: bool,
    /// `(1 − δ) − max spectral radius of D²u`.
    pub margin: f64,
}

pub fn check_condition_a(u: &ScalarField, delta: f64, closure: &BoundaryClosure) -> Result<ConditionA> {
    let margin = condition_a_margin(u, closure, delta)?;
    Ok(ConditionA {
        pass: margin >= -CONDITION_A_SLACK,
        margin,
    })
}

/// Lattice offsets `j` (from the centre) with `λ j` still on the lattice.
fn compatible_offsets(grid: &Grid, lambda: usize) -> std::ops::RangeInclusive<isize> {
    let half = (grid.center_index() / lambda) as isize;
    -half..=half
}

/// `sup |λ⁻² u(λx) − u(x)|` over `λ ∈ {2, 3, 4}` and lattice `x` with `λx`
/// on the lattice.
pub fn check_condition_b(u: &ScalarField) -> Result<f64> {
    let grid = u.grid();
    if grid.points_per_axis() < 9 {
        return Err(Error::GridTooSmall(
            "condition B needs at least 9 points per axis".into(),
        ));
    }
    let n = grid.dim();
    let c = grid.center_index() as isize;
    let vals = u.values();
    let mut sup = 0.0f64;
    for lambda in CONDITION_B_LAMBDAS {
        let range = compatible_offsets(grid, lambda);
        let side = (2 * *range.end() + 1) as usize;
        let count = side.pow(n as u32);
        for q in 0..count {
            let mut idx = [0usize; 3];
            let mut scaled = [0usize; 3];
            let mut rest = q;
            for axis in (0..n).rev() {
                let j = (rest % side) as isize - *range.end();
                rest /= side;
                idx[axis] = (c + j) as usize;
                scaled[axis] = (c + lambda as isize * j) as usize;
            }
            let a = vals[grid.flat_index(&scaled[..n])] / (lambda * lambda) as f64;
            let b = vals[grid.flat_index(&idx[..n])];
            sup = sup.max((a - b).abs());
        }
    }
    Ok(sup)
}

/// The sequence `λ⁻² u(λx)` on a common window.
#[derive(Debug, Clone, PartialEq)]
pub struct Blowdown {
    pub lambdas: Vec<f64>,
    pub window: Grid,
    pub fields: Vec<ScalarField>,
    /// Some `λx` fell between lattice points and was interpolated.
    pub interpolated: bool,
}

/// Blow-down sequence of `u`. Without `allow_interpolation` only integer
/// `λ` are used and evaluation is exact.
pub fn blowdown(u: &ScalarField, lambdas: &[f64], allow_interpolation: bool) -> Result<Blowdown> {
    let grid = u.grid();
    let used: Vec<f64> = lambdas
        .iter()
        .copied()
        .filter(|l| *l >= 1.0 && l.is_finite())
        .filter(|l| allow_interpolation || (l - l.round()).abs() <= 1e-12)
        .collect();
    let Some(lmax) = used.iter().copied().reduce(f64::max) else {
        return Err(Error::InvalidArgument(
            "no grid-compatible scaling factor (integer λ ≥ 1) given".into(),
        ));
    };
    let half = ((grid.center_index() as f64 / lmax) + 1e-9).floor() as usize;
    let window = grid.window(half)?;
    let mut interpolated = false;
    let fields = used
        .iter()
        .map(|&l| {
            let ev = scaling_transform(u, l)?;
            interpolated |= ev.interpolated();
            ev.sample(&window)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Blowdown {
        lambdas: used,
        window,
        fields,
        interpolated,
    })
}

/// Static translator residual and dynamic comparison against the exact
/// translating solution `u₀(x − at) + t b·x + c t − ½ t² (a·b)`.
pub fn check_translator(
    u0: &ScalarField,
    a: &[f64],
    b: &[f64],
    c: f64,
    closure: &BoundaryClosure,
    config: &RunConfig,
) -> Result<(SolitonCertificate, FlowReport)> {
    let start = Instant::now();
    let grid = *u0.grid();
    let n = grid.dim();
    let k = config.interior_margin;
    let residual_field = translator_residual(u0, a, b, c, closure)?;
    let static_residual = residual_field.sup_abs(k);

    let mut times: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t > 0.0 && *t <= config.end_time)
        .collect();
    times.push(config.end_time);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let h = grid.spacing();
    let mut shifts = Vec::with_capacity(times.len());
    for &t in &times {
        let mut cells = [0isize; 3];
        for i in 0..n {
            let s = a[i] * t / h;
            if (s - s.round()).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "a·t = {} is not a multiple of h = {h} at t = {t}",
                    a[i] * t
                )));
            }
            cells[i] = s.round() as isize;
        }
        shifts.push(cells);
    }
    let run_config = RunConfig {
        snapshot_times: times.clone(),
        ..config.clone()
    };
    let (state, report) = run_flow(u0, closure, &run_config, FlowKind::Physical)?;
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let mut dynamic = 0.0f64;
    for (&t, cells) in times.iter().zip(&shifts) {
        let snap = &report.snapshot_at(t)?.field;
        let m = grid.points_per_axis() as isize;
        for q in grid.interior_indices(k) {
            let idx = grid.multi_index(q);
            let mut src = [0usize; 3];
            let mut inside = true;
            for i in 0..n {
                let j = idx[i] as isize - cells[i];
                inside &= (0..m).contains(&j);
                src[i] = j.max(0) as usize;
            }
            if !inside {
                continue;
            }
            let x = grid.point(q);
            let bx: f64 = b.iter().zip(&x[..n]).map(|(p, q)| p * q).sum();
            let exact = u0.values()[grid.flat_index(&src[..n])] + t * bx + c * t - 0.5 * t * t * ab;
            dynamic = dynamic.max((snap.values()[q] - exact).abs());
        }
    }
    let certificate = SolitonCertificate {
        kind: CertificateKind::Translator,
        residual_sup_interior: static_residual,
        residual_field,
        interior_margin: k,
        condition_a_margin: condition_a_margin(u0, closure, config.delta)?,
        d3_sup: d3_sup(u0, closure, k)?,
        details: BTreeMap::from([
            ("static_residual".to_string(), static_residual),
            ("dynamic_defect".to_string(), dynamic),
        ]),
        flags: BTreeMap::new(),
        provenance: Provenance {
            grid,
            config: run_config,
            flow: Some(FlowKind::Physical),
            steps: state.step_count,
            final_time: state.time,
            stationary: false,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    };
    Ok((certificate, report))
}

#[cfg(test)]
mod tests;
