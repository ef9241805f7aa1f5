//! Runs driven by [`Settings`], shared by the subcommands, the presets and
//! the acceptance suite.

use std::path::{Path, PathBuf};

use lagflow_core::flow::{run_flow, FlowState};
use lagflow_core::operator::angle;
use lagflow_core::report::FlowReport;
use lagflow_core::soliton::{
    check_translator, make_expander_run, probe_shrinker, quadratic_soliton, ExpanderRun, SolitonCertificate,
    SolitonKind,
};
use lagflow_core::{Error, FlowKind, ScalarField};

use crate::error::{usage, CliResult};
use crate::settings::Settings;

/// Outcome of a plain flow run.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub state: FlowState,
    pub report: FlowReport,
    /// Sup-interior distance from the exact solution when the cone is a
    /// single quadratic sector and the data carries no bump.
    pub exact_error: Option<f64>,
}

fn is_quadratic(settings: &Settings) -> bool {
    settings.bump.is_none() && settings.quadratic_hessian().is_ok()
}

/// Physical flow from the sampled cone (plus bump).
pub fn physical_flow(settings: &Settings) -> CliResult<FlowRun> {
    let cone = settings.cone()?;
    let grid = settings.grid(cone.dim())?;
    let u0 = settings.initial_field(&cone, &grid)?;
    let closure = settings.closure(&cone, None);
    let (state, report) = run_flow(&u0, &closure, &settings.run, FlowKind::Physical)?;
    let exact_error = if is_quadratic(settings) {
        let a = settings.quadratic_hessian()?;
        let exact = u0.map(|_, v| v + state.time * angle(&a).unwrap_or(f64::NAN))?;
        Some(state.field.sup_distance(&exact, settings.run.interior_margin)?)
    } else {
        None
    };
    Ok(FlowRun {
        state,
        report,
        exact_error,
    })
}

/// Rescaled expander or normalized shrinker flow from the sampled cone.
pub fn rescaled_flow(settings: &Settings, kind: SolitonKind) -> CliResult<FlowRun> {
    let cone = settings.cone()?;
    let grid = settings.grid(cone.dim())?;
    let mut u0 = settings.initial_field(&cone, &grid)?;
    let flow = match kind {
        SolitonKind::Expander => FlowKind::RescaledExpander,
        SolitonKind::Shrinker => FlowKind::NormalizedShrinker,
    };
    let mut exact = None;
    if is_quadratic(settings) {
        let s = quadratic_soliton(settings.quadratic_hessian()?, kind)?;
        exact = Some(s.sample(&grid)?);
        if kind == SolitonKind::Shrinker {
            // Start on the shrinker itself so the gauge pins its constant.
            u0 = s.sample(&grid)?;
        }
    }
    let closure = settings.closure(&cone, Some(kind));
    let (state, report) = run_flow(&u0, &closure, &settings.run, flow)?;
    let exact_error = match exact {
        Some(e) if report.stationary || kind == SolitonKind::Shrinker => {
            Some(state.field.sup_distance(&e, settings.run.interior_margin)?)
        }
        _ => None,
    };
    Ok(FlowRun {
        state,
        report,
        exact_error,
    })
}

pub fn expander(settings: &Settings) -> CliResult<ExpanderRun> {
    let cone = settings.cone()?;
    let grid = settings.grid(cone.dim())?;
    Ok(make_expander_run(&cone, &grid, &settings.run)?)
}

/// Shrinker probe around the quadratic shrinker of the settings' cone. The
/// initial field is read from `field` if given, else the shrinker plus bump.
pub fn shrinker(settings: &Settings) -> CliResult<(SolitonCertificate, FlowReport)> {
    let reference = quadratic_soliton(settings.quadratic_hessian()?, SolitonKind::Shrinker)?;
    let w0 = match &settings.field {
        Some(p) => ScalarField::read_snapshot(p)?,
        None => {
            let grid = settings.grid(reference.hessian.dim())?;
            settings.with_bump(reference.sample(&grid)?)?
        }
    };
    Ok(probe_shrinker(&w0, &reference, &settings.run)?)
}

/// Translator check of `u₀ = ½xᵀAx` with `b = Aa` and `c = G(A)` unless given.
pub fn translator(settings: &Settings) -> CliResult<(SolitonCertificate, FlowReport)> {
    let a = settings.quadratic_hessian()?;
    let n = a.dim();
    let cone = settings.cone()?;
    let grid = settings.grid(n)?;
    let av = settings.translate_a.clone();
    if av.len() != n {
        return Err(usage(format!("translator needs a = <{n} values>")));
    }
    let b = settings.translate_b.clone().unwrap_or_else(|| {
        (0..n).map(|i| (0..n).map(|j| a.get(i, j) * av[j]).sum()).collect()
    });
    let c = match settings.translate_c {
        Some(c) => c,
        None => angle(&a)?,
    };
    let u0 = settings.initial_field(&cone, &grid)?;
    let closure = settings.closure(&cone, None);
    Ok(check_translator(&u0, &av, &b, c, &closure, &settings.run)?)
}

/// Output file `<out>/<run_id>.<suffix>`.
pub fn output_path(settings: &Settings, suffix: &str) -> PathBuf {
    settings.out.join(format!("{}.{suffix}", settings.run_id))
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Creates the output directory and writes the manifest.
pub fn prepare_output(settings: &Settings, command: &str) -> CliResult<()> {
    std::fs::create_dir_all(&settings.out).map_err(|e| io(&settings.out, e))?;
    let path = output_path(settings, "manifest");
    let text = format!(
        "# lagflow {} {command}\n{}",
        env!("CARGO_PKG_VERSION"),
        settings.manifest()
    );
    std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(())
}

/// Writes the report CSV and every kept snapshot.
pub fn write_report(settings: &Settings, report: &FlowReport) -> CliResult<PathBuf> {
    let path = output_path(settings, "report.csv");
    report.write_csv(&path)?;
    report.write_snapshots(&settings.out, &settings.run_id)?;
    Ok(path)
}

pub fn write_certificate(settings: &Settings, cert: &SolitonCertificate) -> CliResult<PathBuf> {
    let path = output_path(settings, "certificate.json");
    std::fs::write(&path, cert.to_json_string()).map_err(|e| io(&path, e))?;
    Ok(path)
}
