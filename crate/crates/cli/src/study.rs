//! Grid and domain refinement studies.

use std::fmt::Write as _;

use lagflow_core::numfmt::sci17;
use lagflow_core::soliton::SolitonKind;
use lagflow_core::{Grid, ScalarField};

use crate::error::{usage, CliResult};
use crate::experiments::{physical_flow, rescaled_flow};
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyFlow {
    Physical,
    Expander,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    /// `"h"` for spacing refinement at fixed R, `"R"` for domain growth at fixed h.
    pub study: &'static str,
    pub radius: f64,
    pub spacing: f64,
    pub points: usize,
    /// Final-row residual of the run.
    pub residual: f64,
    /// Sup distance to the next run on the shared lattice points (NaN for the last run).
    pub difference: f64,
    /// `difference` of the previous row over this one.
    pub ratio: f64,
    /// `log₂ ratio`; the observed order under h-halving.
    pub order: f64,
}

pub const STUDY_HEADER: &str = "study,radius,spacing,points,residual,difference,ratio,order";

pub fn to_csv(rows: &[StudyRow]) -> String {
    let mut s = String::from(STUDY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.study,
            sci17(r.radius),
            sci17(r.spacing),
            r.points,
            sci17(r.residual),
            sci17(r.difference),
            sci17(r.ratio),
            sci17(r.order)
        );
    }
    s
}

fn run(settings: &Settings, flow: StudyFlow) -> CliResult<(ScalarField, f64)> {
    let out = match flow {
        StudyFlow::Physical => physical_flow(settings)?,
        StudyFlow::Expander => rescaled_flow(settings, SolitonKind::Expander)?,
    };
    let residual = out.report.last().map_or(f64::NAN, |r| r.residual_sup);
    Ok((out.state.field, residual))
}

/// Sup over the coarse grid's interior of `|coarse − fine|`, where the fine
/// grid shares the coarse lattice (same spacing or an integer refinement)
/// and covers at least the same cube.
fn shared_difference(coarse: &ScalarField, fine: &ScalarField, margin: usize) -> CliResult<f64> {
    let (cg, fg) = (coarse.grid(), fine.grid());
    let ratio = cg.spacing() / fg.spacing();
    let step = ratio.round() as usize;
    if step == 0 || (ratio - step as f64).abs() > 1e-9 || fg.radius() < cg.radius() - 1e-12 {
        return Err(usage("refinement grids do not share lattice points"));
    }
    let n = cg.dim();
    let offset = fg.center_index() - step * cg.center_index();
    let mut worst = 0.0f64;
    for k in cg.interior_indices(margin) {
        let idx = cg.multi_index(k);
        let mut fidx = [0usize; 3];
        for i in 0..n {
            fidx[i] = offset + step * idx[i];
        }
        let v = fine.values()[fg.flat_index(&fidx[..n])];
        worst = worst.max((coarse.values()[k] - v).abs());
    }
    Ok(worst)
}

fn fill_ratios(rows: &mut [StudyRow]) {
    for i in 1..rows.len() {
        let ratio = rows[i - 1].difference / rows[i].difference;
        rows[i].ratio = ratio;
        rows[i].order = ratio.log2();
    }
}

/// Runs at `points`, `2 points − 1`, … (`levels` runs, h halving at fixed R).
pub fn spacing_study(settings: &Settings, flow: StudyFlow, levels: usize) -> CliResult<Vec<StudyRow>> {
    if levels < 3 {
        return Err(usage("spacing study needs at least three levels"));
    }
    let mut fields = Vec::with_capacity(levels);
    let mut rows = Vec::with_capacity(levels);
    let mut points = settings.points;
    for _ in 0..levels {
        let s = Settings {
            points,
            ..settings.clone()
        };
        let (field, residual) = run(&s, flow)?;
        let g: Grid = *field.grid();
        rows.push(StudyRow {
            study: "h",
            radius: g.radius(),
            spacing: g.spacing(),
            points,
            residual,
            difference: f64::NAN,
            ratio: f64::NAN,
            order: f64::NAN,
        });
        fields.push(field);
        points = 2 * points - 1;
    }
    for i in 0..levels - 1 {
        rows[i].difference = shared_difference(&fields[i], &fields[i + 1], settings.run.interior_margin)?;
    }
    rows.pop();
    fill_ratios(&mut rows);
    Ok(rows)
}

/// Runs at `radius · f` for each factor with the spacing held fixed.
pub fn domain_study(settings: &Settings, flow: StudyFlow, factors: &[usize]) -> CliResult<Vec<StudyRow>> {
    let mut fields: Vec<ScalarField> = Vec::new();
    let mut rows = Vec::new();
    for &f in factors {
        let s = Settings {
            radius: settings.radius * f as f64,
            points: (settings.points - 1) * f + 1,
            ..settings.clone()
        };
        let (field, residual) = run(&s, flow)?;
        let g = *field.grid();
        rows.push(StudyRow {
            study: "R",
            radius: g.radius(),
            spacing: g.spacing(),
            points: s.points,
            residual,
            difference: f64::NAN,
            ratio: f64::NAN,
            order: f64::NAN,
        });
        fields.push(field);
    }
    for i in 0..fields.len().saturating_sub(1) {
        rows[i].difference = shared_difference(&fields[i], &fields[i + 1], settings.run.interior_margin)?;
    }
    Ok(rows)
}
