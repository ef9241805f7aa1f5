//! The twelve acceptance criteria, run in order.
//!
//! Each criterion yields one [`Outcome`]; a run error counts as a failure of
//! that criterion (and of any criterion that needs its output) rather than
//! aborting the suite.

use std::time::Instant;

use lagflow_core::cone::sample_cone;
use lagflow_core::diagnostics::decay_monitor;
use lagflow_core::flow::self_similarity_defect;
use lagflow_core::operator::{angle, angle_via_complex_det, linearization};
use lagflow_core::report::FlowReport;
use lagflow_core::soliton::{cone_of_expander, expander_closure, ExpanderRun, SolitonCertificate};
use lagflow_core::SymMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliResult;
use crate::experiments::{expander, physical_flow, shrinker, translator, FlowRun};
use crate::presets::find;
use crate::settings::Settings;
use crate::study::{spacing_study, StudyFlow};

/// `arctan 0.5 + arctan 0.3`, evaluated to 30 digits with mpmath.
pub const ANGLE_05_03: f64 = 0.7551044034786732;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}  {}: {} [{:.1} s]",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds
        )
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn preset(name: &str, workers: usize) -> Settings {
    let mut s = find(name).expect("built-in preset").load();
    s.run.workers = workers;
    s
}

/// Random symmetric `n×n` matrix rescaled to spectral radius `U(0, 0.9]`.
fn contraction(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let upper: Vec<f64> = (0..n * (n + 1) / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = SymMatrix::from_upper(n, &upper).expect("upper length");
    let rho = a.spectral_radius().expect("eigenvalues");
    let target = 0.9 * (1.0 - rng.gen::<f64>());
    if rho == 0.0 {
        a
    } else {
        a.scaled(target / rho)
    }
}

/// Random orthogonal matrix by Gram–Schmidt on uniform rows.
fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    q
}

pub fn operator_agreement() -> Outcome {
    let ((det, orth, odd, errors), seconds) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
        let (mut det, mut orth, mut odd, mut errors) = (0.0f64, 0.0f64, 0.0f64, 0usize);
        for k in 0..1000 {
            let n = 2 + k % 3;
            let a = contraction(&mut rng, n);
            let q = orthogonal(&mut rng, n);
            match (
                angle(&a),
                angle_via_complex_det(&a),
                angle(&a.conjugate(&q)),
                angle(&a.scaled(-1.0)),
            ) {
                (Ok(g), Ok(c), Ok(r), Ok(m)) => {
                    det = det.max((g - c).abs());
                    orth = orth.max((g - r).abs());
                    odd = odd.max((g + m).abs());
                }
                _ => errors += 1,
            }
        }
        (det, orth, odd, errors)
    });
    Outcome {
        id: 1,
        title: "operator correctness",
        pass: errors == 0 && det <= 1e-12 && orth <= 1e-12 && odd <= 1e-13 && seconds < 5.0,
        detail: format!(
            "1000 matrices, n in {{2,3,4}}: |G - arg det| {det:.2e} (tol 1e-12), \
             orthogonal invariance {orth:.2e} (tol 1e-12), oddness {odd:.2e} (tol 1e-13), {errors} errors"
        ),
        seconds,
    }
}

pub fn linearization_gradient() -> Outcome {
    let ((worst, errors), seconds) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_602);
        let eps = 1e-5;
        let (mut worst, mut errors) = (0.0f64, 0usize);
        for k in 0..200 {
            let n = 2 + k % 3;
            let a = contraction(&mut rng, n);
            let upper: Vec<f64> = (0..n * (n + 1) / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = SymMatrix::from_upper(n, &upper).expect("upper length");
            let exact = linearization(&a).inner(&b);
            match (angle(&a.add(&b.scaled(eps))), angle(&a.sub(&b.scaled(eps)))) {
                (Ok(p), Ok(m)) => worst = worst.max(((p - m) / (2.0 * eps) - exact).abs()),
                _ => errors += 1,
            }
        }
        (worst, errors)
    });
    Outcome {
        id: 2,
        title: "linearization gradient check",
        pass: errors == 0 && worst <= 1e-8 && seconds < 5.0,
        detail: format!("200 pairs: |tr((I+A^2)^-1 B) - central difference| {worst:.2e} (tol 1e-8)"),
        seconds,
    }
}

fn failed(id: u8, title: &'static str, why: impl std::fmt::Display, seconds: f64) -> Outcome {
    Outcome {
        id,
        title,
        pass: false,
        detail: format!("run failed: {why}"),
        seconds,
    }
}

/// Everything later criteria reuse.
#[derive(Default)]
struct Runs {
    quadratic: Option<FlowRun>,
    expander: Option<(ExpanderRun, Settings)>,
    cone_bump: Option<FlowRun>,
    shrinker: Option<(SolitonCertificate, FlowReport)>,
}

fn quadratic_flow(runs: &mut Runs, workers: usize) -> Outcome {
    const TITLE: &str = "exact quadratic flow";
    let s = preset("quadratic-flow", workers);
    let (res, seconds) = timed(|| physical_flow(&s));
    let run = match res {
        Ok(r) => r,
        Err(e) => return failed(3, TITLE, e, seconds),
    };
    let cone = s.cone().expect("preset cone");
    let grid = s.grid(2).expect("preset grid");
    let u0 = sample_cone(&cone, &grid).expect("sampling");
    let t = run.state.time;
    let error = u0
        .map(|_, v| v + t * ANGLE_05_03)
        .and_then(|exact| run.state.field.sup_distance(&exact, s.run.interior_margin))
        .unwrap_or(f64::NAN);
    runs.quadratic = Some(run);
    Outcome {
        id: 3,
        title: TITLE,
        pass: t == 1.0 && error <= 1e-8 && seconds < 120.0,
        detail: format!("t = {t}, sup-interior error vs u0 + t G(A) {error:.2e} (tol 1e-8)"),
        seconds,
    }
}

fn expander_construction(runs: &mut Runs, workers: usize) -> Outcome {
    const TITLE: &str = "expander construction";
    let s = preset("sign-flip-expander", workers);
    let (res, seconds) = timed(|| expander(&s));
    let run = match res {
        Ok(r) => r,
        Err(e) => return failed(4, TITLE, e, seconds),
    };
    let c = &run.certificate;
    let first_below = run
        .report
        .rows
        .iter()
        .find(|r| r.residual_sup <= 1e-4)
        .map_or(f64::NAN, |r| r.time);
    let s_final = c.provenance.final_time;
    let out = Outcome {
        id: 4,
        title: TITLE,
        pass: c.residual_sup_interior <= 1e-4 && s_final <= 20.0 && c.d3_sup > 0.01 && seconds < 600.0,
        detail: format!(
            "residual {:.2e} (tol 1e-4) first reached at s = {first_below:.2}, stopped at s = {s_final:.2} \
             (stationary: {}), d3_sup {:.4} (> 0.01)",
            c.residual_sup_interior, c.provenance.stationary, c.d3_sup
        ),
        seconds,
    };
    runs.expander = Some((run, s));
    out
}

fn round_trip(runs: &Runs) -> Outcome {
    const TITLE: &str = "correspondence round trip";
    let Some((run, s)) = &runs.expander else {
        return failed(5, TITLE, "criterion 4 produced no expander", 0.0);
    };
    let (res, seconds) = timed(|| -> CliResult<(f64, f64, f64)> {
        let cone = s.cone()?;
        let closure = expander_closure(&cone);
        let est = cone_of_expander(&run.field, &closure, s.run.interior_margin)?;
        let exact = sample_cone(&cone, est.field.grid())?;
        let gap = est.field.sup_distance(&exact, 0)?;
        let h = run.field.grid().spacing();
        let tol = cone.max_abs_angle()? / (est.radius * est.radius) + 5.0 * h * h;
        Ok((gap, tol, est.radius))
    });
    match res {
        Ok((gap, tol, r)) => Outcome {
            id: 5,
            title: TITLE,
            pass: gap <= tol && seconds < 60.0,
            detail: format!("unit-window gap {gap:.3e} at r = {r} (tol max|G|/r^2 + 5h^2 = {tol:.3e})"),
            seconds,
        },
        Err(e) => failed(5, TITLE, e, seconds),
    }
}

fn scaled_flow_convergence(runs: &mut Runs, workers: usize) -> Outcome {
    const TITLE: &str = "scaled-flow convergence";
    let s = preset("cone-bump-flow", workers);
    let (res, seconds) = timed(|| -> CliResult<(FlowRun, Vec<f64>)> {
        let run = physical_flow(&s)?;
        let defects = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&t| self_similarity_defect(&run.report, t, 2.0 * t, s.run.interior_margin))
            .collect::<lagflow_core::Result<Vec<f64>>>()?;
        Ok((run, defects))
    });
    let (run, d) = match res {
        Ok(r) => r,
        Err(e) => return failed(6, TITLE, e, seconds),
    };
    runs.cone_bump = Some(run);
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let limit = 10.0 * 1e-4;
    Outcome {
        id: 6,
        title: TITLE,
        pass: decreasing && d[3] <= limit && seconds < 900.0,
        detail: format!(
            "defect(t, 2t) at t = 1, 2, 4, 8: {:.3e}, {:.3e}, {:.3e}, {:.3e}; strictly decreasing: {decreasing}; \
             final <= {limit:.0e}",
            d[0], d[1], d[2], d[3]
        ),
        seconds,
    }
}

fn shrinker_probe(runs: &mut Runs, workers: usize) -> Outcome {
    const TITLE: &str = "shrinker triviality probe";
    let s = preset("shrinker-probe", workers);
    let (res, seconds) = timed(|| shrinker(&s));
    let (cert, report) = match res {
        Ok(r) => r,
        Err(e) => return failed(7, TITLE, e, seconds),
    };
    let ratio = cert.details["d3_ratio"];
    let fit = cert.flags["fit_distance_decreasing"];
    let fits: Vec<String> = report
        .snapshots
        .iter()
        .filter_map(|snap| report.rows.iter().find(|r| r.step == snap.step))
        .map(|r| format!("{:.2e}", r.defect))
        .collect();
    let out = Outcome {
        id: 7,
        title: TITLE,
        pass: ratio <= 0.1 && fit && seconds < 600.0,
        detail: format!(
            "d3 ratio at s = 5: {ratio:.2e} (tol 0.1); fit distance at snapshots s = 1..5: [{}] from {:.2e}, \
             monotone decreasing: {fit} (every report row: {})",
            fits.join(", "),
            cert.details["fit_distance_initial"],
            cert.flags["fit_distance_decreasing_all_rows"]
        ),
        seconds,
    };
    runs.shrinker = Some((cert, report));
    out
}

fn condition_a_preservation(runs: &Runs) -> Outcome {
    const TITLE: &str = "Condition A preservation";
    let mut parts = Vec::new();
    let mut pass = true;
    let mut check = |label: &str, report: Option<&FlowReport>, delta: f64| match report {
        Some(r) => {
            let rho = r.max_spectral_radius();
            let ok = rho <= 1.0 - delta + 1e-6;
            pass &= ok;
            parts.push(format!("{label} {rho:.6} <= {}", 1.0 - delta));
        }
        None => {
            pass = false;
            parts.push(format!("{label} missing"));
        }
    };
    let delta = |name: &str| find(name).expect("preset").load().run.delta;
    check("c3", runs.quadratic.as_ref().map(|r| &r.report), delta("quadratic-flow"));
    check("c4", runs.expander.as_ref().map(|(r, _)| &r.report), delta("sign-flip-expander"));
    check("c6", runs.cone_bump.as_ref().map(|r| &r.report), delta("cone-bump-flow"));
    check("c7", runs.shrinker.as_ref().map(|(_, r)| r), delta("shrinker-probe"));
    Outcome {
        id: 8,
        title: TITLE,
        pass,
        detail: format!("max interior spectral radius (bound 1 - delta + 1e-6): {}", parts.join("; ")),
        seconds: 0.0,
    }
}

fn derivative_decay(runs: &Runs) -> Outcome {
    const TITLE: &str = "derivative decay";
    let Some(run) = &runs.cone_bump else {
        return failed(9, TITLE, "criterion 6 produced no run", 0.0);
    };
    match decay_monitor(&run.report) {
        Ok(m) => {
            let rows: Vec<_> = run.report.rows.iter().filter(|r| r.step > 10).collect();
            let rises = rows.windows(2).filter(|w| w[1].d3_sqrt_t > w[0].d3_sqrt_t).count();
            Outcome {
                id: 9,
                title: TITLE,
                pass: m.constant.is_finite() && m.non_increasing,
                detail: format!(
                    "sup d3 sqrt(t) = {:.5} (recorded); non-increasing after 10 steps: {} \
                     ({rises} of {} row pairs increase)",
                    m.constant,
                    m.non_increasing,
                    rows.len().saturating_sub(1)
                ),
                seconds: 0.0,
            }
        }
        Err(e) => failed(9, TITLE, e, 0.0),
    }
}

fn translator_identity(workers: usize) -> Outcome {
    const TITLE: &str = "translator identity";
    let s = preset("translator", workers);
    let (res, seconds) = timed(|| translator(&s));
    match res {
        Ok((cert, _)) => {
            let st = cert.details["static_residual"];
            let dy = cert.details["dynamic_defect"];
            Outcome {
                id: 10,
                title: TITLE,
                pass: st <= 1e-12 && dy <= 1e-8 && seconds < 120.0,
                detail: format!("static residual {st:.2e} (tol 1e-12), dynamic defect at t = 1 {dy:.2e} (tol 1e-8)"),
                seconds,
            }
        }
        Err(e) => failed(10, TITLE, e, seconds),
    }
}

fn determinism(runs: &Runs) -> Outcome {
    const TITLE: &str = "determinism";
    let Some((run, s)) = &runs.expander else {
        return failed(11, TITLE, "criterion 4 produced no run", 0.0);
    };
    let other = Settings {
        run: lagflow_core::RunConfig {
            workers: 4,
            ..s.run.clone()
        },
        ..s.clone()
    };
    let (res, seconds) = timed(|| expander(&other));
    match res {
        Ok(again) => {
            let same_csv = again.report.to_csv() == run.report.to_csv();
            let same_field = again
                .field
                .values()
                .iter()
                .zip(run.field.values())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            Outcome {
                id: 11,
                title: TITLE,
                pass: same_csv && same_field,
                detail: format!(
                    "workers {} vs 4: report CSV identical {same_csv}, final field bitwise identical {same_field}",
                    s.run.workers
                ),
                seconds,
            }
        }
        Err(e) => failed(11, TITLE, e, seconds),
    }
}

fn convergence(runs: &Runs, workers: usize) -> Outcome {
    const TITLE: &str = "convergence study";
    let Some((run, s)) = &runs.expander else {
        return failed(12, TITLE, "criterion 4 produced no run", 0.0);
    };
    let (res, seconds) = timed(|| -> CliResult<(f64, f64, f64)> {
        let rows = spacing_study(&preset("smooth-refinement", workers), StudyFlow::Physical, 3)?;
        let order = rows.last().map_or(f64::NAN, |r| r.order);
        let wide = Settings {
            radius: 2.0 * s.radius,
            points: 2 * (s.points - 1) + 1,
            ..s.clone()
        };
        let wide_residual = expander(&wide)?.certificate.residual_sup_interior;
        Ok((order, run.certificate.residual_sup_interior, wide_residual))
    });
    match res {
        Ok((order, r8, r16)) => {
            let change = (r16 / r8).max(r8 / r16);
            Outcome {
                id: 12,
                title: TITLE,
                pass: order >= 1.8 && change < 2.0 && seconds < 1200.0,
                detail: format!(
                    "observed order under h-halving {order:.3} (>= 1.8); expander residual R = {}: {r8:.3e}, \
                     R = {}: {r16:.3e}, change {change:.3}x (< 2)",
                    s.radius,
                    2.0 * s.radius
                ),
                seconds,
            }
        }
        Err(e) => failed(12, TITLE, e, seconds),
    }
}

/// Runs all twelve criteria in order, handing each outcome to `emit` as
/// soon as it is known. Criterion 4 and 11 use 1 and 4 workers; the rest
/// use `workers`.
pub fn run_suite(workers: usize, mut emit: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let mut runs = Runs::default();
    let mut out = Vec::with_capacity(12);
    let mut push = |o: Outcome| {
        emit(&o);
        out.push(o);
    };
    push(operator_agreement());
    push(linearization_gradient());
    push(quadratic_flow(&mut runs, workers));
    push(expander_construction(&mut runs, 1));
    push(round_trip(&runs));
    push(scaled_flow_convergence(&mut runs, workers));
    push(shrinker_probe(&mut runs, workers));
    push(condition_a_preservation(&runs));
    push(derivative_decay(&runs));
    push(translator_identity(workers));
    push(determinism(&runs));
    push(convergence(&runs, workers));
    out
}
