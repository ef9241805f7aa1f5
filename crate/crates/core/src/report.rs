//! Per-snapshot flow records and their CSV form.

use std::path::Path;

use crate::numfmt::{parse_f64, sci17};
use crate::{Error, Result, ScalarField};

pub const REPORT_HEADER: &str =
    "step,time,residual_sup,hess_min,hess_max,d3_sup,d3_sqrt_t,defect,change_rate";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub step: usize,
    pub time: f64,
    /// Sup-interior residual of the soliton equation matching the flow
    /// (NaN where undefined, e.g. the physical flow at `t = 0`).
    pub residual_sup: f64,
    pub hess_min: f64,
    pub hess_max: f64,
    pub d3_sup: f64,
    /// `d3_sup·√t` for the physical flow, `d3_sup` for the rescaled flows.
    pub d3_sqrt_t: f64,
    /// Sup-interior distance from the best-fit quadratic.
    pub defect: f64,
    /// Sup-interior `|Δfield|/Δt` over the step that produced the row.
    pub change_rate: f64,
}

impl ReportRow {
    fn to_csv_line(&self) -> String {
        let mut s = self.step.to_string();
        for v in [
            self.time,
            self.residual_sup,
            self.hess_min,
            self.hess_max,
            self.d3_sup,
            self.d3_sqrt_t,
            self.defect,
            self.change_rate,
        ] {
            s.push(',');
            s.push_str(&sci17(v));
        }
        s
    }

    /// Largest absolute Hessian eigenvalue in the row.
    pub fn spectral_radius(&self) -> f64 {
        self.hess_min.abs().max(self.hess_max.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub field: ScalarField,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowReport {
    pub rows: Vec<ReportRow>,
    pub snapshots: Vec<Snapshot>,
    /// Non-fatal findings, e.g. initial data outside the Condition A margin.
    pub warnings: Vec<String>,
    /// The run stopped early because the field became stationary.
    pub stationary: bool,
}

impl FlowReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.to_csv_line());
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses the rows of a report CSV; snapshots are not part of the CSV.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let ctx = "flow report";
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_HEADER) {
            return Err(Error::parse(ctx, "unexpected header"));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(Error::parse(ctx, format!("expected 9 columns: '{line}'")));
            }
            let step = cols[0]
                .parse()
                .map_err(|_| Error::parse(ctx, format!("bad step '{}'", cols[0])))?;
            let mut v = [0.0; 8];
            for (o, c) in v.iter_mut().zip(&cols[1..]) {
                *o = parse_f64(c).ok_or_else(|| Error::parse(ctx, format!("bad number '{c}'")))?;
            }
            rows.push(ReportRow {
                step,
                time: v[0],
                residual_sup: v[1],
                hess_min: v[2],
                hess_max: v[3],
                d3_sup: v[4],
                d3_sqrt_t: v[5],
                defect: v[6],
                change_rate: v[7],
            });
        }
        Ok(Self {
            rows,
            ..Default::default()
        })
    }

    pub fn last(&self) -> Option<&ReportRow> {
        self.rows.last()
    }

    /// Snapshot recorded at flow time `t` (relative match within 1e-12).
    pub fn snapshot_at(&self, t: f64) -> Result<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::MissingSnapshot(t))
    }

    /// Largest Hessian spectral radius over all rows.
    pub fn max_spectral_radius(&self) -> f64 {
        self.rows.iter().map(|r| r.spectral_radius()).fold(0.0, f64::max)
    }

    /// Writes every snapshot as `<run_id>.step<k>.field` under `dir`.
    pub fn write_snapshots(&self, dir: &Path, run_id: &str) -> Result<Vec<std::path::PathBuf>> {
        self.snapshots
            .iter()
            .map(|s| {
                let path = dir.join(format!("{run_id}.step{}.field", s.step));
                s.field.write_snapshot(&path)?;
                Ok(path)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let row = ReportRow {
            step: 3,
            time: 0.1,
            residual_sup: f64::NAN,
            hess_min: -0.5,
            hess_max: 0.3,
            d3_sup: 1.0 / 3.0,
            d3_sqrt_t: 2.0f64.sqrt(),
            defect: 1e-300,
            change_rate: 0.0,
        };
        let report = FlowReport {
            rows: vec![row, ReportRow { step: 4, ..row }],
            ..Default::default()
        };
        let text = report.to_csv();
        assert!(text.starts_with(REPORT_HEADER));
        let back = FlowReport::parse_csv(&text).unwrap();
        assert_eq!(back.rows.len(), 2);
        assert!(back.rows[0].residual_sup.is_nan());
        assert_eq!(back.rows[1].d3_sup.to_bits(), row.d3_sup.to_bits());
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(FlowReport::parse_csv("step,time\n").is_err());
    }
}
