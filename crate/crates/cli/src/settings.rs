//! Flat `key = value` run settings.
//!
//! A settings file holds one assignment per line; `#` starts a comment.
//! Command-line flags are applied as further assignments after the file, so
//! they override it. [`Settings::manifest`] writes every resolved key back
//! out in the same format, and reading a manifest reproduces the run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lagflow_core::numfmt::sci17;
use lagflow_core::soliton::{physical_closure, expander_closure, SolitonKind};
use lagflow_core::{
    BoundaryClosure, ConeSpec, DriftScheme, Grid, Integrator, RunConfig, ScalarField, SymMatrix,
};

use crate::error::{usage, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum ConeSource {
    None,
    File(PathBuf),
    /// Single quadratic sector `diag(d)`.
    Diag(Vec<f64>),
    /// `diag(±a₁, a₂, …)` on `±x₁ ≥ 0`.
    SignFlip(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureChoice {
    /// Dirichlet ghosts for single-sector cones, Hessian extrapolation otherwise.
    Auto,
    Frozen,
    Stationary,
    Extrapolation,
    Quadratic,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub dim: Option<usize>,
    pub radius: f64,
    pub points: usize,
    pub cone: ConeSource,
    /// Center coordinates, then amplitude and width.
    pub bump: Option<Vec<f64>>,
    pub closure: ClosureChoice,
    pub run: RunConfig,
    pub out: PathBuf,
    pub run_id: String,
    /// Initial field for `blowdown` and `probe-shrinker`.
    pub field: Option<PathBuf>,
    pub lambdas: Vec<f64>,
    pub interpolate: bool,
    pub translate_a: Vec<f64>,
    pub translate_b: Option<Vec<f64>>,
    pub translate_c: Option<f64>,
    /// Tolerance on the translator's static residual and dynamic defect.
    pub translator_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dim: None,
            radius: 8.0,
            points: 129,
            cone: ConeSource::None,
            bump: None,
            closure: ClosureChoice::Auto,
            run: RunConfig::default(),
            out: PathBuf::from("lagflow-out"),
            run_id: "run".into(),
            field: None,
            lambdas: vec![2.0, 4.0, 8.0],
            interpolate: false,
            translate_a: Vec::new(),
            translate_b: None,
            translate_c: None,
            translator_tol: 1e-8,
        }
    }
}

fn num(key: &str, v: &str) -> CliResult<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| usage(format!("{key}: '{v}' is not a number")))
}

fn count(key: &str, v: &str) -> CliResult<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| usage(format!("{key}: '{v}' is not a non-negative integer")))
}

fn list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|t| num(key, t)).collect()
}

fn flag(key: &str, v: &str) -> CliResult<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(usage(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| sci17(*x)).collect::<Vec<_>>().join(",")
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key.trim() {
            "dim" => self.dim = Some(count(key, v)?),
            "radius" | "grid_R" => self.radius = num(key, v)?,
            "points" | "grid_m" => self.points = count(key, v)?,
            "cone" => self.cone = ConeSource::File(PathBuf::from(v)),
            "diag" => self.cone = ConeSource::Diag(list(key, v)?),
            "sign_flip" => self.cone = ConeSource::SignFlip(list(key, v)?),
            "bump" => self.bump = if v == "none" { None } else { Some(list(key, v)?) },
            "closure" => {
                self.closure = match v {
                    "auto" => ClosureChoice::Auto,
                    "frozen" => ClosureChoice::Frozen,
                    "stationary" => ClosureChoice::Stationary,
                    "extrapolation" => ClosureChoice::Extrapolation,
                    "quadratic" => ClosureChoice::Quadratic,
                    "none" => ClosureChoice::None,
                    _ => return Err(usage(format!("closure: unknown kind '{v}'"))),
                }
            }
            "delta" => self.run.delta = num(key, v)?,
            "dt_safety" => self.run.dt_safety = num(key, v)?,
            "end_time" | "t_end" | "s_end" => self.run.end_time = num(key, v)?,
            "snapshot_stride" => self.run.snapshot_stride = count(key, v)?,
            "interior_margin" => self.run.interior_margin = count(key, v)?,
            "stationarity_tol" => self.run.stationarity_tol = num(key, v)?,
            "residual_tol" => self.run.residual_tol = num(key, v)?,
            "drift" => {
                self.run.drift = match v {
                    "centered" => DriftScheme::Centered,
                    "upwind" => DriftScheme::Upwind,
                    _ => return Err(usage(format!("drift: expected centered or upwind, got '{v}'"))),
                }
            }
            "integrator" => {
                self.run.integrator = match v {
                    "explicit" => Integrator::ExplicitRk2,
                    "implicit" => Integrator::LinearizedBackwardEuler { dt_multiplier: 4.0 },
                    _ => return Err(usage(format!("integrator: expected explicit or implicit, got '{v}'"))),
                }
            }
            "dt_multiplier" => {
                self.run.integrator = Integrator::LinearizedBackwardEuler {
                    dt_multiplier: num(key, v)?,
                }
            }
            "workers" => self.run.workers = count(key, v)?,
            "keep_snapshots" => self.run.keep_snapshots = flag(key, v)?,
            "snapshot_times" => self.run.snapshot_times = list(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "run_id" => {
                if v.is_empty() || v.contains(['/', '\\']) {
                    return Err(usage(format!("run_id: '{v}' is not a plain name")));
                }
                self.run_id = v.to_string();
            }
            "field" => self.field = Some(PathBuf::from(v)),
            "lambdas" => self.lambdas = list(key, v)?,
            "interpolate" => self.interpolate = flag(key, v)?,
            "a" => self.translate_a = list(key, v)?,
            "b" => self.translate_b = Some(list(key, v)?),
            "c" => self.translate_c = Some(num(key, v)?),
            "translator_tol" => self.translator_tol = num(key, v)?,
            other => return Err(usage(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Applies every assignment in `text`.
    pub fn apply_text(&mut self, text: &str, source: &str) -> CliResult<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{source}:{}: expected 'key = value'", no + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| usage(format!("{source}:{}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read settings file {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `key=value` pairs as given on the command line.
    pub fn apply_pairs(&mut self, pairs: &[String]) -> CliResult<()> {
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| usage(format!("--set expects key=value, got '{p}'")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn cone(&self) -> CliResult<ConeSpec> {
        let cone = match &self.cone {
            ConeSource::None => return Err(usage("no cone given (use --cone, diag = … or sign_flip = …)")),
            ConeSource::File(p) => ConeSpec::read(p)?,
            ConeSource::Diag(d) => ConeSpec::quadratic(SymMatrix::diag(d)),
            ConeSource::SignFlip(d) => ConeSpec::sign_flip(d)?,
        };
        if let Some(dim) = self.dim {
            if dim != cone.dim() {
                return Err(usage(format!("dim = {dim} but the cone has dimension {}", cone.dim())));
            }
        }
        Ok(cone)
    }

    pub fn grid(&self, dim: usize) -> CliResult<Grid> {
        Ok(Grid::new(self.dim.unwrap_or(dim), self.radius, self.points)?)
    }

    /// The single-sector Hessian of a quadratic cone.
    pub fn quadratic_hessian(&self) -> CliResult<SymMatrix> {
        let cone = self.cone()?;
        let first = &cone.sectors()[0].hessian;
        if cone.sectors().iter().any(|s| &s.hessian != first) {
            return Err(usage("this command needs a single quadratic sector (e.g. diag = 0.5,0.3)"));
        }
        Ok(first.clone())
    }

    /// Sampled cone plus the optional bump.
    pub fn initial_field(&self, cone: &ConeSpec, grid: &Grid) -> CliResult<ScalarField> {
        let u = lagflow_core::cone::sample_cone(cone, grid)?;
        self.with_bump(u)
    }

    pub fn with_bump(&self, u: ScalarField) -> CliResult<ScalarField> {
        let Some(b) = &self.bump else {
            return Ok(u);
        };
        let n = u.grid().dim();
        if b.len() != n + 2 {
            return Err(usage(format!(
                "bump needs {n} center coordinates, amplitude and width ({} values), got {}",
                n + 2,
                b.len()
            )));
        }
        Ok(lagflow_core::field::add_compact_bump(&u, &b[..n], b[n], b[n + 1])?)
    }

    pub fn closure(&self, cone: &ConeSpec, kind: Option<SolitonKind>) -> BoundaryClosure {
        match (self.closure, kind) {
            (ClosureChoice::Auto, None) => physical_closure(cone),
            (ClosureChoice::Auto, Some(SolitonKind::Expander)) => expander_closure(cone),
            (ClosureChoice::Auto, Some(SolitonKind::Shrinker)) => BoundaryClosure::quadratic_extrapolation(),
            (ClosureChoice::Frozen, _) => BoundaryClosure::frozen_hessian(cone.clone()),
            (ClosureChoice::Stationary, k) => {
                BoundaryClosure::stationary_cone(cone.clone(), k.unwrap_or(SolitonKind::Expander))
            }
            (ClosureChoice::Extrapolation, _) => BoundaryClosure::hessian_extrapolation(cone.clone()),
            (ClosureChoice::Quadratic, _) => BoundaryClosure::quadratic_extrapolation(),
            (ClosureChoice::None, _) => BoundaryClosure::none(),
        }
    }

    /// Every resolved setting, in the settings-file format.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(d) = self.dim {
            put("dim", d.to_string());
        }
        put("radius", sci17(self.radius));
        put("points", self.points.to_string());
        match &self.cone {
            ConeSource::None => {}
            ConeSource::File(p) => put("cone", p.display().to_string()),
            ConeSource::Diag(d) => put("diag", join(d)),
            ConeSource::SignFlip(d) => put("sign_flip", join(d)),
        }
        put("bump", self.bump.as_deref().map_or("none".into(), join));
        put(
            "closure",
            match self.closure {
                ClosureChoice::Auto => "auto",
                ClosureChoice::Frozen => "frozen",
                ClosureChoice::Stationary => "stationary",
                ClosureChoice::Extrapolation => "extrapolation",
                ClosureChoice::Quadratic => "quadratic",
                ClosureChoice::None => "none",
            }
            .into(),
        );
        let r = &self.run;
        put("delta", sci17(r.delta));
        put("dt_safety", sci17(r.dt_safety));
        put("end_time", sci17(r.end_time));
        put("snapshot_stride", r.snapshot_stride.to_string());
        put("interior_margin", r.interior_margin.to_string());
        put("stationarity_tol", sci17(r.stationarity_tol));
        put("residual_tol", sci17(r.residual_tol));
        put(
            "drift",
            match r.drift {
                DriftScheme::Centered => "centered",
                DriftScheme::Upwind => "upwind",
            }
            .into(),
        );
        match r.integrator {
            Integrator::ExplicitRk2 => put("integrator", "explicit".into()),
            Integrator::LinearizedBackwardEuler { dt_multiplier } => put("dt_multiplier", sci17(dt_multiplier)),
        }
        put("workers", r.workers.to_string());
        put("keep_snapshots", r.keep_snapshots.to_string());
        put("snapshot_times", join(&r.snapshot_times));
        put("out", self.out.display().to_string());
        put("run_id", self.run_id.clone());
        if let Some(f) = &self.field {
            put("field", f.display().to_string());
        }
        put("lambdas", join(&self.lambdas));
        put("interpolate", self.interpolate.to_string());
        if !self.translate_a.is_empty() {
            put("a", join(&self.translate_a));
        }
        if let Some(b) = &self.translate_b {
            put("b", join(b));
        }
        if let Some(c) = self.translate_c {
            put("c", sci17(c));
        }
        put("translator_tol", sci17(self.translator_tol));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut s = Settings::default();
        s.apply_text("# comment\nradius = 4\npoints=33 # trailing\n\ndiag = 0.5, 0.3\n", "t")
            .unwrap();
        s.apply_pairs(&["points=65".into()]).unwrap();
        assert_eq!(s.radius, 4.0);
        assert_eq!(s.points, 65);
        assert_eq!(s.cone, ConeSource::Diag(vec![0.5, 0.3]));
    }

    #[test]
    fn malformed_lines_are_usage_errors() {
        let mut s = Settings::default();
        assert_eq!(s.apply_text("radius 4\n", "t").unwrap_err().code(), 1);
        assert_eq!(s.apply_text("radius = four\n", "t").unwrap_err().code(), 1);
        assert_eq!(s.apply_text("colour = red\n", "t").unwrap_err().code(), 1);
        assert_eq!(s.apply_text("drift = sideways\n", "t").unwrap_err().code(), 1);
    }

    #[test]
    fn manifest_reproduces_settings() {
        let mut s = Settings::default();
        s.apply_text(
            "sign_flip = 0.5,0.3\nbump = 0,0,0.05,1\ndelta = 0.4\nsnapshot_times = 1,2,4\n\
             drift = upwind\ndt_multiplier = 3\nrun_id = c6\nclosure = extrapolation\na = 1,0\nc = 0.25\n",
            "t",
        )
        .unwrap();
        let mut back = Settings::default();
        back.apply_text(&s.manifest(), "manifest").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bump_arity_is_checked() {
        let mut s = Settings::default();
        s.apply_text("diag = 0.5,0.3\nradius = 8\npoints = 33\nbump = 0,0.01,1\n", "t").unwrap();
        let cone = s.cone().unwrap();
        let g = s.grid(cone.dim()).unwrap();
        assert_eq!(s.initial_field(&cone, &g).unwrap_err().code(), 1);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut s = Settings::default();
        s.apply_text("dim = 3\ndiag = 0.5,0.3\n", "t").unwrap();
        assert!(s.cone().is_err());
    }
}
