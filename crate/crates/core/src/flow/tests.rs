use super::*;
use crate::cone::sample_cone;
use crate::field::add_compact_bump;
use crate::{ConeSpec, SymMatrix};

const ANGLE_05_03: f64 = 0.7551044034786732;

fn a() -> SymMatrix {
    SymMatrix::diag(&[0.5, 0.3])
}

fn grid(radius: f64, m: usize) -> Grid {
    Grid::new(2, radius, m).unwrap()
}

fn quad(g: Grid, c: f64) -> ScalarField {
    ScalarField::quadratic(g, &a(), &[0.0, 0.0], c).unwrap()
}

fn max_diff(x: &ScalarField, y: &ScalarField) -> f64 {
    x.sup_distance(y, 0).unwrap()
}

#[test]
fn quadratic_physical_step_is_exact() {
    let g = grid(2.0, 17);
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let dt = stable_step(FlowKind::Physical, &g, 0.8);
    let next = step_physical(&FlowState::new(quad(g, 0.0)), &closure, dt).unwrap();
    assert!(max_diff(&next.field, &quad(g, dt * ANGLE_05_03)) <= 1e-13);
    assert_eq!(next.step_count, 1);
    assert_eq!(next.time, dt);
}

#[test]
fn zero_field_is_unchanged_by_every_flow() {
    let g = grid(2.0, 17);
    let zero = ScalarField::zeros(g);
    let state = FlowState::new(zero.clone());
    let cone = ConeSpec::zero(2);
    let dt = stable_step(FlowKind::RescaledExpander, &g, 0.8);
    let p = step_physical(&state, &BoundaryClosure::frozen_hessian(cone.clone()), dt).unwrap();
    let e = step_rescaled_expander(
        &state,
        &BoundaryClosure::stationary_cone(cone.clone(), SolitonKind::Expander),
        dt,
        DriftScheme::Upwind,
    )
    .unwrap();
    let shrink = BoundaryClosure::stationary_cone(cone, SolitonKind::Shrinker);
    let gauge = Gauge::of_closure(&shrink).unwrap().unwrap();
    let s = step_normalized_shrinker(&state, &shrink, dt, DriftScheme::Centered, &gauge).unwrap();
    for out in [p, e, s] {
        assert!(out.field.values().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn quadratic_expander_is_a_fixed_point() {
    let g = grid(4.0, 33);
    let closure = BoundaryClosure::stationary_cone(ConeSpec::quadratic(a()), SolitonKind::Expander);
    let v = quad(g, ANGLE_05_03);
    let ds = stable_step(FlowKind::RescaledExpander, &g, 0.8);
    let next = step_rescaled_expander(&FlowState::new(v.clone()), &closure, ds, DriftScheme::Centered).unwrap();
    assert!(max_diff(&next.field, &v) <= 1e-12);
    // Upwind differences are first order, off by a·h/2 per axis on quadratics.
    let next = step_rescaled_expander(&FlowState::new(v.clone()), &closure, ds, DriftScheme::Upwind).unwrap();
    let bound = ds * 0.5 * g.radius() * 0.5 * g.spacing() * (0.5 + 0.3);
    assert!(max_diff(&next.field, &v) <= bound);
}

#[test]
fn quadratic_shrinker_is_a_fixed_point() {
    let g = grid(4.0, 33);
    let closure = BoundaryClosure::stationary_cone(ConeSpec::quadratic(a()), SolitonKind::Shrinker);
    let gauge = Gauge::of_closure(&closure).unwrap().unwrap();
    assert!((gauge.value + ANGLE_05_03).abs() < 1e-15);
    let w = quad(g, -ANGLE_05_03);
    let ds = stable_step(FlowKind::NormalizedShrinker, &g, 0.8);
    let next =
        step_normalized_shrinker(&FlowState::new(w.clone()), &closure, ds, DriftScheme::Centered, &gauge)
            .unwrap();
    assert!(max_diff(&next.field, &w) <= 1e-12);
}

#[test]
fn gauge_projection_removes_affine_drift() {
    let g = grid(4.0, 33);
    let closure = BoundaryClosure::quadratic_extrapolation();
    let reference = Gauge {
        value: -ANGLE_05_03,
        gradient: [0.0; 3],
    };
    let shifted = quad(g, -ANGLE_05_03).map(|x, v| v + 0.01 + 0.02 * x[0] - 0.03 * x[1]).unwrap();
    let ds = stable_step(FlowKind::NormalizedShrinker, &g, 0.8);
    let next = step_normalized_shrinker(
        &FlowState::new(shifted),
        &closure,
        ds,
        DriftScheme::Centered,
        &reference,
    )
    .unwrap();
    let now = Gauge::of_field(&next.field);
    assert!((now.value - reference.value).abs() < 1e-14);
    assert!(now.gradient[..2].iter().all(|g| g.abs() < 1e-13));
}

#[test]
fn cone_step_reduces_expander_residual() {
    let cone = ConeSpec::sign_flip(&[0.5, 0.3]).unwrap();
    let g = grid(8.0, 65);
    let closure = BoundaryClosure::hessian_extrapolation(cone.clone());
    let v = sample_cone(&cone, &g).unwrap();
    let before = expander_residual(&v, &closure).unwrap().sup_abs(4);
    let ds = stable_step(FlowKind::RescaledExpander, &g, 0.8);
    let next = step_rescaled_expander(&FlowState::new(v), &closure, ds, DriftScheme::Centered).unwrap();
    let after = expander_residual(&next.field, &closure).unwrap().sup_abs(4);
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn quadratic_physical_run_to_unit_time() {
    let g = grid(2.0, 17);
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let config = RunConfig {
        interior_margin: 2,
        ..RunConfig::default()
    };
    let (state, report) = run_flow(&quad(g, 0.0), &closure, &config, FlowKind::Physical).unwrap();
    assert_eq!(state.time, 1.0);
    assert!(max_diff(&state.field, &quad(g, ANGLE_05_03)) <= 1e-8);
    assert_eq!(report.last().unwrap().time, 1.0);
    assert!(report.rows[0].residual_sup.is_nan());
    assert!(report.last().unwrap().residual_sup < 1e-12);
    assert!(report.warnings.is_empty());
}

#[test]
fn zero_remains_zero_for_all_flows() {
    let g = grid(2.0, 17);
    let zero = ScalarField::zeros(g);
    let config = RunConfig {
        end_time: 0.5,
        interior_margin: 2,
        ..RunConfig::default()
    };
    let cone = ConeSpec::zero(2);
    let runs = [
        (FlowKind::Physical, BoundaryClosure::frozen_hessian(cone.clone())),
        (
            FlowKind::RescaledExpander,
            BoundaryClosure::stationary_cone(cone.clone(), SolitonKind::Expander),
        ),
        (
            FlowKind::NormalizedShrinker,
            BoundaryClosure::stationary_cone(cone, SolitonKind::Shrinker),
        ),
    ];
    for (kind, closure) in runs {
        let (state, _) = run_flow(&zero, &closure, &config, kind).unwrap();
        assert!(state.field.values().iter().all(|v| *v == 0.0), "{}", kind.name());
    }
}

#[test]
fn rescaled_run_detects_stationarity() {
    let g = grid(4.0, 33);
    let closure = BoundaryClosure::stationary_cone(ConeSpec::quadratic(a()), SolitonKind::Expander);
    let config = RunConfig {
        end_time: 20.0,
        ..RunConfig::default()
    };
    let (state, report) =
        run_flow(&quad(g, ANGLE_05_03), &closure, &config, FlowKind::RescaledExpander).unwrap();
    assert!(report.stationary);
    assert_eq!(state.step_count, STATIONARY_CHECKS);
    assert_eq!(report.snapshots.len(), 1);
}

#[test]
fn steps_land_on_snapshot_times() {
    let g = grid(2.0, 17);
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let config = RunConfig {
        end_time: 0.5,
        interior_margin: 2,
        snapshot_stride: 1000,
        snapshot_times: vec![0.0, 0.3, 0.5],
        ..RunConfig::default()
    };
    let (_, report) = run_flow(&quad(g, 0.0), &closure, &config, FlowKind::Physical).unwrap();
    let times: Vec<f64> = report.rows.iter().map(|r| r.time).collect();
    assert_eq!(times, vec![0.0, 0.3, 0.5]);
    for t in [0.0, 0.3, 0.5] {
        let snap = report.snapshot_at(t).unwrap();
        assert!(max_diff(&snap.field, &quad(g, t * ANGLE_05_03)) <= 1e-12);
    }
    assert!(matches!(report.snapshot_at(0.2), Err(Error::MissingSnapshot(_))));
}

#[test]
fn condition_a_violation_warns_but_runs() {
    let g = Grid::new(1, 2.0, 17).unwrap();
    let u = ScalarField::from_fn(g, |x| 0.5 * 0.99 * x[0] * x[0]).unwrap();
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(SymMatrix::diag(&[0.99])));
    let config = RunConfig {
        end_time: 0.1,
        interior_margin: 2,
        ..RunConfig::default()
    };
    let (_, report) = run_flow(&u, &closure, &config, FlowKind::Physical).unwrap();
    assert_eq!(report.warnings.len(), 1);
    assert!((condition_a_margin(&u, &closure, 0.5).unwrap() + 0.49).abs() < 1e-12);
}

#[test]
fn implicit_integrator_is_physical_only() {
    let g = grid(2.0, 17);
    let closure = BoundaryClosure::stationary_cone(ConeSpec::quadratic(a()), SolitonKind::Expander);
    let config = RunConfig {
        integrator: Integrator::LinearizedBackwardEuler { dt_multiplier: 4.0 },
        interior_margin: 2,
        ..RunConfig::default()
    };
    let err = run_flow(&quad(g, ANGLE_05_03), &closure, &config, FlowKind::RescaledExpander);
    assert!(matches!(err, Err(Error::InvalidArgument(_))));
}

#[test]
fn implicit_step_is_exact_on_quadratics() {
    let g = grid(2.0, 17);
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let dt = 10.0 * stable_step(FlowKind::Physical, &g, 0.8);
    let (next, iterations) = step_physical_implicit(&FlowState::new(quad(g, 0.0)), &closure, dt).unwrap();
    assert!(iterations <= implicit::LINEAR_MAX_ITER);
    assert!(max_diff(&next.field, &quad(g, dt * ANGLE_05_03)) <= 1e-10);
}

#[test]
fn implicit_step_needs_dirichlet_closure() {
    let g = grid(2.0, 17);
    let state = FlowState::new(quad(g, 0.0));
    assert!(step_physical_implicit(&state, &BoundaryClosure::quadratic_extrapolation(), 0.01).is_err());
}

#[test]
fn implicit_run_tracks_explicit_run() {
    let g = grid(4.0, 33);
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let u0 = add_compact_bump(&sample_cone(&ConeSpec::quadratic(a()), &g).unwrap(), &[0.0, 0.0], 0.02, 0.5)
        .unwrap();
    let base = RunConfig {
        end_time: 0.25,
        ..RunConfig::default()
    };
    let implicit = RunConfig {
        integrator: Integrator::LinearizedBackwardEuler { dt_multiplier: 1.0 },
        ..base.clone()
    };
    let (e, _) = run_flow(&u0, &closure, &base, FlowKind::Physical).unwrap();
    let (i, _) = run_flow(&u0, &closure, &implicit, FlowKind::Physical).unwrap();
    assert!(e.field.sup_distance(&i.field, 4).unwrap() < 1e-3);
}

#[test]
fn scaling_transform_fixes_quadratics() {
    let g = grid(4.0, 33);
    let u = quad(g, 0.0);
    let window = g.window(4).unwrap();
    for lambda in [1.0, 2.0, 1.5, 3.7] {
        let ev = scaling_transform(&u, lambda).unwrap();
        assert_eq!(ev.interpolated(), lambda.fract() != 0.0);
        let scaled = ev.sample(&window).unwrap();
        assert!(max_diff(&scaled, &u.restrict(&window)) <= 1e-12, "lambda {lambda}");
    }
}

#[test]
fn scaling_transform_fixes_cones_on_lattice() {
    let cone = ConeSpec::sign_flip(&[0.5, 0.3]).unwrap();
    let g = grid(4.0, 33);
    let u = sample_cone(&cone, &g).unwrap();
    let window = g.window(8).unwrap();
    let scaled = scaling_transform(&u, 2.0).unwrap().sample(&window).unwrap();
    assert!(max_diff(&scaled, &u.restrict(&window)) <= 1e-14);
}

#[test]
fn scaling_damps_a_bump() {
    let cone = ConeSpec::sign_flip(&[0.5, 0.3]).unwrap();
    let g = grid(8.0, 65);
    let base = sample_cone(&cone, &g).unwrap();
    let bumped = add_compact_bump(&base, &[0.0, 0.0], 0.05, 1.0).unwrap();
    let window = g.window(8).unwrap();
    let a = scaling_transform(&bumped, 4.0).unwrap().sample(&window).unwrap();
    let b = scaling_transform(&base, 4.0).unwrap().sample(&window).unwrap();
    assert!(max_diff(&a, &b) <= 0.05 / 16.0 + 1e-15);
}

#[test]
fn scaling_rejects_non_positive_lambda() {
    let u = ScalarField::zeros(grid(1.0, 9));
    assert!(scaling_transform(&u, 0.0).is_err());
    assert!(scaling_transform(&u, -2.0).is_err());
}

fn self_similar_report(g: Grid, times: &[f64]) -> FlowReport {
    // u(x, t) = t v(x/√t) with v the quadratic expander.
    let mut report = FlowReport::default();
    for (step, &t) in times.iter().enumerate() {
        report.snapshots.push(Snapshot {
            step,
            time: t,
            field: quad(g, t * ANGLE_05_03),
        });
    }
    report
}

#[test]
fn self_similarity_defect_vanishes_on_expanders() {
    let g = grid(8.0, 65);
    let report = self_similar_report(g, &[1.0, 4.0]);
    assert!(self_similarity_defect(&report, 1.0, 4.0, 4).unwrap() <= 1e-10);
    assert_eq!(self_similarity_defect(&report, 4.0, 4.0, 4).unwrap(), 0.0);
    assert!(matches!(
        self_similarity_defect(&report, 1.0, 2.0, 4),
        Err(Error::MissingSnapshot(_))
    ));
}

#[test]
fn self_similarity_defect_sees_non_self_similar_data() {
    let g = grid(8.0, 65);
    let mut report = self_similar_report(g, &[1.0, 4.0]);
    report.snapshots[1].field = report.snapshots[1].field.add_constant(1.0).unwrap();
    let d = self_similarity_defect(&report, 1.0, 4.0, 4).unwrap();
    assert!((d - 0.25).abs() < 1e-12);
}

#[test]
fn report_rows_recompute_from_snapshots() {
    let cone = ConeSpec::sign_flip(&[0.5, 0.3]).unwrap();
    let g = grid(4.0, 33);
    let closure = BoundaryClosure::hessian_extrapolation(cone.clone());
    let config = RunConfig {
        end_time: 0.2,
        keep_snapshots: true,
        snapshot_stride: 4,
        ..RunConfig::default()
    };
    let u0 = sample_cone(&cone, &g).unwrap();
    let (_, report) = run_flow(&u0, &closure, &config, FlowKind::Physical).unwrap();
    assert_eq!(report.rows.len(), report.snapshots.len());
    for (row, snap) in report.rows.iter().zip(&report.snapshots) {
        let again = snapshot_metrics(FlowKind::Physical, &snap.field, snap.time, &closure, 4).unwrap();
        assert_eq!(row.d3_sup, again.d3_sup);
        assert_eq!(row.hess_max, again.hess_max);
        assert_eq!(row.defect, again.defect);
    }
}

#[test]
fn physical_cone_run_keeps_condition_a() {
    let cone = ConeSpec::sign_flip(&[0.5, 0.3]).unwrap();
    let g = grid(4.0, 33);
    let closure = BoundaryClosure::hessian_extrapolation(cone.clone());
    let config = RunConfig {
        end_time: 0.5,
        ..RunConfig::default()
    };
    let (_, report) = run_flow(&sample_cone(&cone, &g).unwrap(), &closure, &config, FlowKind::Physical)
        .unwrap();
    assert!(report.max_spectral_radius() <= 0.5 + 1e-6);
}

#[test]
fn tiny_grids_are_rejected() {
    let g = grid(1.0, 9);
    let config = RunConfig::default();
    let err = run_flow(
        &ScalarField::zeros(g),
        &BoundaryClosure::frozen_hessian(ConeSpec::zero(2)),
        &config,
        FlowKind::Physical,
    );
    assert!(matches!(err, Err(Error::GridTooSmall(_))));
}
