use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lagflow_cli::error::{CliError, CliResult};
use lagflow_cli::experiments::{
    expander, output_path, physical_flow, prepare_output, rescaled_flow, shrinker, translator, write_certificate,
    write_report,
};
use lagflow_cli::presets::{find, PRESETS};
use lagflow_cli::settings::Settings;
use lagflow_cli::study::{domain_study, spacing_study, to_csv, StudyFlow};
use lagflow_core::soliton::{blowdown, SolitonKind};
use lagflow_core::ScalarField;
use log::{info, warn};

#[derive(Parser)]
#[command(name = "lagflow", version, about = "Lagrangian angle flow experiments on uniform grids")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Settings file of `key = value` lines; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Extra assignment, applied last. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Cone file.
    #[arg(long, global = true, value_name = "FILE")]
    cone: Option<PathBuf>,
    /// Grid points per axis (odd).
    #[arg(long = "grid-m", global = true)]
    grid_m: Option<usize>,
    /// Half-width of the grid cube.
    #[arg(long = "grid-R", global = true)]
    grid_r: Option<f64>,
    /// Condition A margin.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Final time t (physical flow) or s (rescaled flows).
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Prefix of every output file.
    #[arg(long = "run-id", global = true)]
    run_id: Option<String>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, env = "LAGFLOW_WORKERS")]
    workers: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Expander,
    Shrinker,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    Physical,
    Expander,
}

#[derive(Subcommand)]
enum Command {
    /// Physical flow du/dt = G(D²u); writes the report CSV and snapshots.
    Flow,
    /// Rescaled expander or normalized shrinker flow.
    RescaledFlow {
        #[arg(long, value_enum, default_value = "expander")]
        kind: Kind,
    },
    /// Relaxes the rescaled flow to an expander; exit 0 iff its residual meets residual_tol.
    MakeExpander,
    /// Shrinker triviality probe; exit 0 iff the third derivatives decay.
    ProbeShrinker {
        /// Initial field snapshot instead of the quadratic shrinker plus bump.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Static and dynamic translator check; exit 0 iff both meet translator_tol.
    CheckTranslator,
    /// Blow-down sequence u(λx)/λ² of a snapshot.
    Blowdown {
        #[arg(long)]
        field: PathBuf,
        /// Comma-separated scale factors.
        #[arg(long)]
        lambdas: Option<String>,
    },
    /// h-halving and R-doubling study; exit 0 iff the observed order is at least 1.8.
    ConvergenceStudy {
        #[arg(long, value_enum, default_value = "physical")]
        flow: StudyKind,
        /// Number of h-halving runs.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Domain multipliers at fixed spacing.
        #[arg(long, default_value = "1,2,4")]
        factors: String,
    },
    /// Runs a named preset (see --list).
    Preset {
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

fn resolve(mut settings: Settings, common: &Common) -> CliResult<Settings> {
    if let Some(path) = &common.config {
        settings.apply_file(path)?;
    }
    let mut pairs = Vec::new();
    if let Some(v) = &common.cone {
        pairs.push(format!("cone={}", v.display()));
    }
    if let Some(v) = common.grid_m {
        pairs.push(format!("points={v}"));
    }
    if let Some(v) = common.grid_r {
        pairs.push(format!("radius={v}"));
    }
    if let Some(v) = common.delta {
        pairs.push(format!("delta={v}"));
    }
    if let Some(v) = common.t_end {
        pairs.push(format!("end_time={v}"));
    }
    if let Some(v) = &common.out {
        pairs.push(format!("out={}", v.display()));
    }
    if let Some(v) = &common.run_id {
        pairs.push(format!("run_id={v}"));
    }
    if let Some(v) = common.workers {
        pairs.push(format!("workers={v}"));
    }
    settings.apply_pairs(&pairs)?;
    settings.apply_pairs(&common.set)?;
    Ok(settings)
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        warn!("{w}");
    }
}

fn cmd_flow(s: &Settings) -> CliResult<()> {
    prepare_output(s, "flow")?;
    let run = physical_flow(s)?;
    report_warnings(&run.report.warnings);
    let path = write_report(s, &run.report)?;
    println!("final time {} after {} steps", run.state.time, run.state.step_count);
    println!("report rows {} in {}", run.report.rows.len(), path.display());
    if let Some(e) = run.exact_error {
        println!("sup-interior error vs exact solution {e:.6e}");
    }
    Ok(())
}

fn cmd_rescaled(s: &Settings, kind: SolitonKind) -> CliResult<()> {
    prepare_output(s, "rescaled-flow")?;
    let run = rescaled_flow(s, kind)?;
    report_warnings(&run.report.warnings);
    let path = write_report(s, &run.report)?;
    let last = run.report.last().map_or(f64::NAN, |r| r.residual_sup);
    println!("final s {} after {} steps, stationary {}", run.state.time, run.state.step_count, run.report.stationary);
    println!("residual {last:.6e}; report in {}", path.display());
    if let Some(e) = run.exact_error {
        println!("sup-interior distance from the quadratic soliton {e:.6e}");
    }
    Ok(())
}

fn cmd_make_expander(s: &Settings) -> CliResult<()> {
    prepare_output(s, "make-expander")?;
    let run = expander(s)?;
    report_warnings(&run.report.warnings);
    write_report(s, &run.report)?;
    let field = output_path(s, "expander.field");
    run.field.write_snapshot(&field)?;
    let cert = write_certificate(s, &run.certificate)?;
    let c = &run.certificate;
    println!(
        "residual {:.6e} at s = {}, d3_sup {:.6}, condition A margin {:.6}",
        c.residual_sup_interior, c.provenance.final_time, c.d3_sup, c.condition_a_margin
    );
    println!("field {}; certificate {}", field.display(), cert.display());
    if c.residual_sup_interior > s.run.residual_tol {
        return Err(CliError::Tolerance(format!(
            "expander residual {:.3e} > {:.3e}",
            c.residual_sup_interior, s.run.residual_tol
        )));
    }
    Ok(())
}

fn cmd_probe_shrinker(s: &Settings) -> CliResult<()> {
    prepare_output(s, "probe-shrinker")?;
    let (cert, report) = shrinker(s)?;
    report_warnings(&report.warnings);
    write_report(s, &report)?;
    let path = write_certificate(s, &cert)?;
    println!(
        "d3 {:.6e} -> {:.6e} (ratio {:.3e}); fit distance {:.6e} -> {:.6e}",
        cert.details["d3_initial"],
        cert.details["d3_final"],
        cert.details["d3_ratio"],
        cert.details["fit_distance_initial"],
        cert.details["fit_distance_final"]
    );
    for (k, v) in &cert.flags {
        println!("{k} {v}");
    }
    println!("certificate {}", path.display());
    if !cert.flags["d3_decreasing"] {
        return Err(CliError::Tolerance("third derivatives did not decay".into()));
    }
    Ok(())
}

fn cmd_check_translator(s: &Settings) -> CliResult<()> {
    prepare_output(s, "check-translator")?;
    let (cert, report) = translator(s)?;
    report_warnings(&report.warnings);
    write_report(s, &report)?;
    let path = write_certificate(s, &cert)?;
    let (st, dy) = (cert.details["static_residual"], cert.details["dynamic_defect"]);
    println!("static residual {st:.6e}, dynamic defect {dy:.6e} at t = {}", cert.provenance.final_time);
    println!("certificate {}", path.display());
    if st > s.translator_tol || dy > s.translator_tol {
        return Err(CliError::Tolerance(format!(
            "translator residuals {st:.3e}, {dy:.3e} exceed {:.3e}",
            s.translator_tol
        )));
    }
    Ok(())
}

fn cmd_blowdown(s: &Settings, field: &Path) -> CliResult<()> {
    prepare_output(s, "blowdown")?;
    let u = ScalarField::read_snapshot(field)?;
    let b = blowdown(&u, &s.lambdas, s.interpolate)?;
    println!("window radius {}, interpolated {}", b.window.radius(), b.interpolated);
    for (i, (l, f)) in b.lambdas.iter().zip(&b.fields).enumerate() {
        let path = output_path(s, &format!("blowdown{i}.field"));
        f.write_snapshot(&path)?;
        let gap = match i {
            0 => String::from("-"),
            _ => format!("{:.6e}", f.sup_distance(&b.fields[i - 1], 0)?),
        };
        println!("lambda {l}: gap to previous {gap}; {}", path.display());
    }
    Ok(())
}

fn cmd_convergence_study(s: &Settings, flow: StudyKind, levels: usize, factors: &str) -> CliResult<()> {
    prepare_output(s, "convergence-study")?;
    let flow = match flow {
        StudyKind::Physical => StudyFlow::Physical,
        StudyKind::Expander => StudyFlow::Expander,
    };
    let factors = factors
        .split(',')
        .map(|f| f.trim().parse::<usize>().ok().filter(|f| *f > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage(format!("--factors: '{factors}' is not a list of positive integers")))?;
    let mut rows = spacing_study(s, flow, levels)?;
    let order = rows.last().map_or(f64::NAN, |r| r.order);
    rows.extend(domain_study(s, flow, &factors)?);
    let path = output_path(s, "study.csv");
    let csv = to_csv(&rows);
    std::fs::write(&path, &csv).map_err(|e| lagflow_core::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    print!("{csv}");
    println!("observed order {order:.4}; study in {}", path.display());
    if !(order >= 1.8) {
        return Err(CliError::Tolerance(format!("observed order {order:.3} < 1.8")));
    }
    Ok(())
}

fn dispatch(command: &str, s: &Settings, cmd: &Command) -> CliResult<()> {
    info!("{command}: {}", s.manifest().replace('\n', "; "));
    match (command, cmd) {
        (_, Command::RescaledFlow { kind }) => cmd_rescaled(
            s,
            match kind {
                Kind::Expander => SolitonKind::Expander,
                Kind::Shrinker => SolitonKind::Shrinker,
            },
        ),
        (_, Command::Blowdown { field, .. }) => cmd_blowdown(s, field),
        (_, Command::ConvergenceStudy { flow, levels, factors }) => cmd_convergence_study(s, *flow, *levels, factors),
        ("flow", _) => cmd_flow(s),
        ("make-expander", _) => cmd_make_expander(s),
        ("probe-shrinker", _) => cmd_probe_shrinker(s),
        ("check-translator", _) => cmd_check_translator(s),
        ("convergence-study", _) => cmd_convergence_study(s, StudyKind::Physical, 3, "1,2,4"),
        (other, _) => Err(CliError::Usage(format!("no runner for '{other}'"))),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (command, base) = match &cli.command {
        Command::Preset { list: true, .. } | Command::Preset { name: None, .. } => {
            for p in PRESETS {
                println!("{:<18} criteria {:?}  {}", p.name, p.criteria, p.summary);
            }
            return Ok(());
        }
        Command::Preset { name: Some(name), .. } => {
            let p = find(name)?;
            (p.command, p.load())
        }
        Command::Flow => ("flow", Settings::default()),
        Command::RescaledFlow { .. } => ("rescaled-flow", Settings::default()),
        Command::MakeExpander => ("make-expander", Settings::default()),
        Command::ProbeShrinker { .. } => ("probe-shrinker", Settings::default()),
        Command::CheckTranslator => ("check-translator", Settings::default()),
        Command::Blowdown { .. } => ("blowdown", Settings::default()),
        Command::ConvergenceStudy { .. } => ("convergence-study", Settings::default()),
    };
    let mut s = resolve(base, &cli.common)?;
    match &cli.command {
        Command::ProbeShrinker { field: Some(f) } => s.field = Some(f.clone()),
        Command::Blowdown { field, lambdas } => {
            s.field = Some(field.clone());
            if let Some(l) = lambdas {
                s.set("lambdas", l)?;
            }
        }
        _ => {}
    }
    dispatch(command, &s, &cli.command)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lagflow: {e}");
            e.exit_code()
        }
    }
}
