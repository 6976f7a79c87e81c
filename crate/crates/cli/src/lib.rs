//! `geomgate` command-line front end.

pub mod config;
pub mod sweep;
pub mod verify;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use geomgate::dynamics::StepGrid;
use geomgate::format::fmt_f64;
use geomgate::gate::{sample_trajectory, simulate_gate, GateOptions};
use geomgate::{model, Preset, QubitRow};

use config::{parse_config, OutputFormat, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "geomgate", version, about = "Conditional displacement gates in cavity QED")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the invariant checks and print a pass/fail summary.
    Verify {
        /// Skip the full-model comparison.
        #[arg(long)]
        quick: bool,
    },
    /// Simulate the gate and emit a report.
    Gate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parameter preset; overrides the physics fields of --config.
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Run a parameter sweep and emit one CSV row per grid point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, env = "GEOMGATE_JOBS", default_value_t = 1)]
        jobs: usize,
    },
    /// Emit alpha(t) as CSV: the analytic loop, or with --simulate the
    /// propagated `<a>` of one row.
    Trajectory {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        simulate: bool,
        /// Row for --simulate: gg, ge, eg or ee.
        #[arg(long, default_value = "eg")]
        row: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Errors that map to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn load_config(path: Option<&Path>, preset: Option<Preset>) -> anyhow::Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_config(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => match preset {
            Some(p) => return Ok(RunConfig::from_preset(p)),
            None => return Err(UsageError("give --config or --preset".into()).into()),
        },
    };
    if let Some(p) = preset {
        config.apply_preset(p);
    }
    for w in config.params.regime_warnings() {
        log::warn!("{w}");
    }
    Ok(config)
}

fn provenance(config: &RunConfig) -> String {
    format!("# geomgate {} config_hash={}", env!("CARGO_PKG_VERSION"), config.hash())
}

fn emit(text: &str, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn output_path(flag: Option<PathBuf>, config: &RunConfig) -> Option<PathBuf> {
    flag.or_else(|| config.output_path.as_ref().map(PathBuf::from))
}

fn gate(config: RunConfig, output: Option<PathBuf>, format: Option<OutputFormat>) -> anyhow::Result<()> {
    let report = simulate_gate(&config.params, &GateOptions::default())?;
    for note in &report.notes {
        log::warn!("{note}");
    }
    let text = match format.unwrap_or(config.format) {
        OutputFormat::Json => {
            let mut meta =
                vec![("tool", "geomgate".to_string()), ("version", env!("CARGO_PKG_VERSION").to_string()), ("config_hash", config.hash())];
            if let Some(p) = config.preset {
                meta.push(("preset", p.name().to_string()));
            }
            report.to_json(&meta) + "\n"
        }
        OutputFormat::Csv => {
            let mut s = provenance(&config) + "\n";
            s.push_str("row,phase,residual_re,residual_im,purity,corrected_re,corrected_im,population\n");
            for row in QubitRow::ALL {
                let k = row.index();
                let cols = [
                    report.phases[k],
                    report.residual_alpha[k].re,
                    report.residual_alpha[k].im,
                    report.cavity_purity[k],
                    report.corrected_diagonal[k].re,
                    report.corrected_diagonal[k].im,
                    report.populations[k],
                ];
                s.push_str(row.label());
                for c in cols {
                    s.push(',');
                    s.push_str(&fmt_f64(c));
                }
                s.push('\n');
            }
            s
        }
    };
    emit(&text, output_path(output, &config).as_deref())
}

fn sweep(config_path: &Path, spec_path: &Path, output: Option<PathBuf>, jobs: usize) -> anyhow::Result<()> {
    let config = load_config(Some(config_path), None)?;
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading sweep spec {}", spec_path.display()))?;
    let spec = match sweep::parse_spec(&text) {
        Ok(s) => s,
        Err(e @ (sweep::SpecError::EmptyAxis(_) | sweep::SpecError::NoAxes)) => return Err(UsageError(e.to_string()).into()),
        Err(e) => return Err(e).with_context(|| format!("sweep spec {}", spec_path.display())),
    };
    let results = sweep::run_sweep(&config, &spec, jobs)?;
    let mut s = provenance(&config) + "\n";
    s.push_str(&sweep::csv_header(&spec));
    s.push('\n');
    for r in &results {
        s.push_str(&sweep::csv_row(&spec, r));
        s.push('\n');
    }
    emit(&s, output_path(output, &config).as_deref())
}

fn parse_row(s: &str) -> Result<QubitRow, UsageError> {
    QubitRow::ALL.into_iter().find(|r| r.label() == s).ok_or_else(|| UsageError(format!("unknown row `{s}` (expected gg, ge, eg or ee)")))
}

fn trajectory(config: RunConfig, simulate: bool, row: &str, output: Option<PathBuf>) -> anyhow::Result<()> {
    let row = parse_row(row)?;
    let p = &config.params;
    let mut s = provenance(&config) + "\n";
    if simulate {
        s.push_str("t,alpha_re,alpha_im,p_r,purity\n");
        for x in sample_trajectory(p, row, &GateOptions::default())? {
            let cols = [x.t, x.alpha.re, x.alpha.im, x.p_r, x.purity];
            s.push_str(&cols.map(fmt_f64).join(","));
            s.push('\n');
        }
    } else {
        s.push_str("t,alpha_re,alpha_im,phi\n");
        let grid = StepGrid::new(p.t_total, p.dt)?;
        for k in 0..=grid.steps {
            let t = grid.time(k);
            let a = model::alpha_trajectory(p, t);
            let cols = [t, a.re, a.im, model::conditional_phase(p, t).0];
            s.push_str(&cols.map(fmt_f64).join(","));
            s.push('\n');
        }
    }
    emit(&s, output_path(output, &config).as_deref())
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Verify { quick } => {
            let checks = verify::run_checks(quick);
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("verify: {} of {} checks passed", checks.len() - failed, checks.len());
            Ok(i32::from(failed > 0))
        }
        Command::Gate { config, preset, output, format } => {
            gate(load_config(config.as_deref(), preset)?, output, format)?;
            Ok(0)
        }
        Command::Sweep { config, spec, output, jobs } => {
            sweep(&config, &spec, output, jobs)?;
            Ok(0)
        }
        Command::Trajectory { config, preset, simulate, row, output } => {
            trajectory(load_config(config.as_deref(), preset)?, simulate, &row, output)?;
            Ok(0)
        }
    }
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code: 0 success, 1 runtime or config error, 2 usage error.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
