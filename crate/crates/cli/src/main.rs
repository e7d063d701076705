use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use osc_cli::plot::emit_plot;
use osc_cli::shipped::{list_scenarios, load_text};
use osc_cli::{run, CliError, Overrides, RunReport, Scenario};

/// Run a scenario of relatively-cscK / log-norm / stability checks and write
/// CSV tables (and optionally SVG plots).
///
/// Exit status: 0 all tasks passed, 1 a task failed, 2 the scenario did not
/// parse, 3 the scenario did not validate.
#[derive(Parser, Debug)]
#[command(name = "osclab", version, about)]
struct Cli {
    /// Scenario file, or the name of a shipped or custom scenario.
    scenario: Option<String>,

    /// List available scenarios and exit.
    #[arg(long)]
    list: bool,

    /// Directory of extra `*.toml` scenarios.
    #[arg(long, value_name = "DIR")]
    scenario_dir: Option<PathBuf>,

    /// Output directory (default: the scenario's `output_dir`, else
    /// `osclab-out/<scenario>`).
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Tolerance overrides, `key=value[,key=value…]`.
    #[arg(long = "tol", value_name = "K=V")]
    tolerances: Vec<String>,

    /// Grid overrides for every model: `s_range`, `t_range`, `ns`, `nt`,
    /// `nodes` (both axes), `order`.
    #[arg(long, value_name = "K=V")]
    grid: Vec<String>,

    /// Write SVG plots: of every task with a series, or of the named task.
    #[arg(long, value_name = "TASK", num_args = 0..=1, default_missing_value = "")]
    plot: Option<String>,

    /// Do not print the summary.
    #[arg(short, long)]
    quiet: bool,
}

fn plots(report: &RunReport, which: &str, dir: &Path) -> Result<(), CliError> {
    if which.is_empty() {
        for t in &report.tasks {
            if let Some(s) = &t.series {
                emit_plot(s, &dir.join(format!("{}.svg", t.name)))?;
            }
        }
        return Ok(());
    }
    let series = report.tasks.iter().find(|t| t.name == which).and_then(|t| t.series.as_ref());
    let series = series.ok_or_else(|| CliError::MissingSeries { task: which.into() })?;
    emit_plot(series, &dir.join(format!("{which}.svg")))
}

fn main_inner(cli: Cli) -> Result<u8, CliError> {
    let custom = cli.scenario_dir.as_deref();
    if cli.list {
        for name in list_scenarios(custom)? {
            println!("{name}");
        }
        return Ok(0);
    }
    let Some(arg) = cli.scenario.as_deref() else {
        eprintln!("osclab: no scenario given (try --list)");
        return Ok(2);
    };
    let mut overrides = Overrides::default();
    for t in &cli.tolerances {
        overrides.add_tolerances(t)?;
    }
    for g in &cli.grid {
        overrides.add_grid(g)?;
    }
    let (text, origin) = load_text(arg, custom)?;
    let scenario = Scenario::load(&text, &origin, &overrides)?;
    let stem = scenario.name.clone().unwrap_or_else(|| {
        Path::new(arg).file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned())
    });
    let dir = cli.out.or_else(|| scenario.output_dir.clone()).unwrap_or_else(|| Path::new("osclab-out").join(stem));

    let report = run::run(&scenario);
    if !cli.quiet {
        print!("{}", report.render());
    }
    report.emit_csv(&dir)?;
    if let Some(which) = &cli.plot {
        plots(&report, which, &dir)?;
    }
    if !cli.quiet {
        println!("output in {}", dir.display());
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("osclab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
