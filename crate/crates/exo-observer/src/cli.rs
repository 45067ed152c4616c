//! Command-line interface: run simulations to CSV, execute the verification
//! suites, and emit the reproduction time series.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{Mode, SimConfig};
use crate::sim::{Engine, RunResult, Sample};
use crate::verify::{run_checks, VerifyLevel};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "exo-observer", version, about = "Adaptive observer simulator")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the coupled simulation and write states.csv / errors.csv.
    Simulate {
        /// Config file(s); repeat the flag to queue several runs. Without it
        /// the bundled experiment configuration is used.
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        /// Override the config's mode.
        #[arg(long)]
        mode: Option<Mode>,
        /// Override the integration step.
        #[arg(long = "h")]
        h: Option<f64>,
        /// Override the horizon.
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Output directory (per-config subdirectories when several configs
        /// are queued).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Fan independent runs out over up to N worker threads.
        #[arg(long, default_value_t = 1)]
        sweep: usize,
        /// Validate the config, print the resolved mixing vector beta, exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the invariant check suites and print a pass/fail table.
    Verify {
        #[arg(value_enum, default_value_t = Level::Quick)]
        level: Level,
    },
    /// Emit the reproduction time series (t >= 25) for external plotting.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig1,
    Fig2,
}

impl ValueEnum for Mode {
    fn value_variants<'a>() -> &'a [Self] {
        &[Mode::Normalized, Mode::Paper]
    }
    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(match self {
            Mode::Normalized => clap::builder::PossibleValue::new("normalized"),
            Mode::Paper => clap::builder::PossibleValue::new("paper"),
        })
    }
}

/// Exit codes: 0 success, 1 failed verification or internal error,
/// 2 configuration errors, 3 numerical divergence.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig { .. } => 2,
        Error::SimulationDiverged { .. }
        | Error::IntegrationDiverged { .. }
        | Error::AdaptationDiverged { .. } => 3,
        _ => 1,
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> crate::Result<i32> {
    match cli.command {
        Command::Simulate {
            configs,
            mode,
            h,
            t_end,
            out,
            sweep,
            dry_run,
        } => cmd_simulate(&configs, mode, h, t_end, &out, sweep, dry_run),
        Command::Verify { level } => Ok(cmd_verify(match level {
            Level::Quick => VerifyLevel::Quick,
            Level::Full => VerifyLevel::Full,
        })),
        Command::Reproduce {
            figure,
            config,
            mode,
            out,
        } => cmd_reproduce(figure, config.as_deref(), mode, &out),
    }
}

struct ResolvedRun {
    name: String,
    config: SimConfig,
    mode: Mode,
}

fn resolve_runs(
    configs: &[PathBuf],
    mode: Option<Mode>,
    h: Option<f64>,
    t_end: Option<f64>,
) -> crate::Result<Vec<ResolvedRun>> {
    let mut runs = Vec::new();
    let paths: Vec<Option<&Path>> = if configs.is_empty() {
        vec![None]
    } else {
        configs.iter().map(|p| Some(p.as_path())).collect()
    };
    for path in paths {
        let mut config = match path {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::paper_default(),
        };
        if let Some(h) = h {
            config.h = h;
        }
        if let Some(t_end) = t_end {
            config.t_end = t_end;
        }
        config.validate()?;
        let name = path
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "paper".to_string());
        let mode = mode.unwrap_or(config.mode);
        runs.push(ResolvedRun { name, config, mode });
    }
    Ok(runs)
}

fn cmd_simulate(
    configs: &[PathBuf],
    mode: Option<Mode>,
    h: Option<f64>,
    t_end: Option<f64>,
    out: &Path,
    sweep: usize,
    dry_run: bool,
) -> crate::Result<i32> {
    let runs = resolve_runs(configs, mode, h, t_end)?;

    if dry_run {
        for run in &runs {
            let params = run.config.to_params(run.mode)?;
            let beta: Vec<String> = params.design.beta.iter().map(|v| v.to_string()).collect();
            println!("{}: config ok, beta = ({})", run.name, beta.join(", "));
        }
        return Ok(0);
    }

    let multi = runs.len() > 1;
    let errors: Mutex<Vec<Error>> = Mutex::new(Vec::new());
    let next: Mutex<usize> = Mutex::new(0);
    let workers = sweep.clamp(1, runs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = {
                    let mut guard = next.lock().unwrap();
                    let idx = *guard;
                    *guard += 1;
                    idx
                };
                if idx >= runs.len() {
                    break;
                }
                let run = &runs[idx];
                let dir = if multi {
                    out.join(&run.name)
                } else {
                    out.to_path_buf()
                };
                if let Err(e) = execute_run(run, &dir) {
                    eprintln!("{}: {e}", run.name);
                    errors.lock().unwrap().push(e);
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    match errors.into_iter().next() {
        Some(e) => Ok(exit_code(&e)),
        None => Ok(0),
    }
}

fn execute_run(run: &ResolvedRun, dir: &Path) -> crate::Result<()> {
    let params = run.config.to_params(run.mode)?;
    let truth = params.truth_diagnostics;
    let result = Engine::new(params)?.run()?;
    std::fs::create_dir_all(dir)?;
    write_states_csv(&dir.join("states.csv"), &result.samples)?;
    if truth {
        write_errors_csv(&dir.join("errors.csv"), &result.samples)?;
    }
    match result.t_e {
        Some(t_e) => println!("{}: done, excitation fired at t_e = {t_e}", run.name),
        None => println!("{}: done, excitation threshold never crossed", run.name),
    }
    Ok(())
}

fn cmd_verify(level: VerifyLevel) -> i32 {
    let outcomes = run_checks(level);
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "{:width$}  {}",
            o.name,
            if o.passed { "pass" } else { "FAIL" }
        );
        if !o.passed {
            println!("    counterexample: {}", o.detail);
            failed += 1;
        }
    }
    println!("{} checks, {} failed", outcomes.len(), failed);
    if failed == 0 {
        0
    } else {
        1
    }
}

fn cmd_reproduce(
    figure: Figure,
    config: Option<&Path>,
    mode: Option<Mode>,
    out: &Path,
) -> crate::Result<i32> {
    let mut cfg = match config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::paper_default(),
    };
    cfg.truth_diagnostics = true;
    let params = cfg.to_params(mode.unwrap_or(cfg.mode))?;
    let t_start = params.design.t_eps;
    let result = Engine::new(params)?.run()?;
    std::fs::create_dir_all(out)?;
    let samples: Vec<&Sample> = result.samples.iter().filter(|s| s.t >= t_start).collect();
    match figure {
        Figure::Fig1 => {
            let path = out.join("fig1.csv");
            let mut w = csv_writer(&path)?;
            writeln!(w, "t,x_err_1,x_err_2,x_err_3,delta_err")?;
            for s in samples {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s.t,
                    s.x_hat[0] - s.x[0],
                    s.x_hat[1] - s.x[1],
                    s.x_hat[2] - s.x[2],
                    s.delta_hat - s.delta
                )?;
            }
            w.flush()?;
            println!("wrote {}", path.display());
        }
        Figure::Fig2 => {
            let path = out.join("fig2.csv");
            let mut w = csv_writer(&path)?;
            writeln!(w, "t,kappa_err,x_delta0_err,t_i_err,u_err")?;
            for s in samples {
                let m =
                    s.truth
                        .as_ref()
                        .map(|t| t.metrics)
                        .ok_or_else(|| Error::InvalidConfig {
                            reason: "reproduction needs truth diagnostics".into(),
                        })?;
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s.t, m.kappa_err, m.xdelta0_err, m.t_i_err, m.u_err
                )?;
            }
            w.flush()?;
            println!("wrote {}", path.display());
        }
    }
    Ok(0)
}

fn csv_writer(path: &Path) -> crate::Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// `states.csv`: truth and estimated states plus disturbance.
pub fn write_states_csv(path: &Path, samples: &[Sample]) -> crate::Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(w, "t,x1,x2,x3,x_hat1,x_hat2,x_hat3,delta,delta_hat")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.t, s.x[0], s.x[1], s.x[2], s.x_hat[0], s.x_hat[1], s.x_hat[2], s.delta, s.delta_hat
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `errors.csv`: the six error norms, pair multiplier magnitudes and the
/// excitation monitor state.
pub fn write_errors_csv(path: &Path, samples: &[Sample]) -> crate::Result<()> {
    let mut w = csv_writer(path)?;
    writeln!(
        w,
        "t,x_err,delta_err,kappa_err,x_delta0_err,t_i_err,u_err,\
         m_eta,m_theta,m_psi_d,m_t_i,m_x_delta0,fe_level,fe_excited"
    )?;
    for s in samples {
        let m = match &s.truth {
            Some(t) => t.metrics,
            None => continue,
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t,
            m.x_err,
            m.delta_err,
            m.kappa_err,
            m.xdelta0_err,
            m.t_i_err,
            m.u_err,
            s.pair_mags.eta,
            s.pair_mags.theta,
            s.pair_mags.psi_d,
            s.pair_mags.t_i,
            s.pair_mags.x_delta0,
            s.fe_level,
            if s.fe_excited { 1 } else { 0 }
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Re-exported for integration tests: run one config end to end.
pub fn run_config(config: &SimConfig, mode: Mode) -> crate::Result<RunResult> {
    Engine::new(config.to_params(mode)?)?.run()
}
