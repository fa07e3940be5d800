use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nls_lab::config::ExperimentKind;
use nls_lab::experiments;
use nls_lab::{LabError, RunConfig, RunManifest};

/// Soliton laboratory for the semiclassical nonlinear Schrödinger equation.
///
/// Exit status: 0 when every assertion passes, 1 when a run finishes with a
/// failed assertion, 2 on config or precondition errors.
#[derive(Parser)]
#[command(name = "nsolab", version)]
struct Cli {
    /// Only report failures.
    #[arg(long, global = true)]
    quiet: bool,
    /// Override the observer cadence (steps between records).
    #[arg(long, global = true)]
    cadence: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the hypotheses on W and V.
    Validate { config: PathBuf },
    /// Minimize and store the rescaled ground state.
    GroundState(RunArgs),
    /// Run the experiment named in the config.
    Evolve(RunArgs),
    /// Run the h sweep.
    Sweep(RunArgs),
    /// Run the orbital stability experiment.
    Stability(RunArgs),
    /// Print a ready-made config.
    Template {
        #[arg(value_enum, default_value_t = Template::Flagship)]
        kind: Template,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Template {
    Flagship,
    Stationary,
    Stability,
}

fn load(path: &Path, cadence: Option<usize>) -> Result<RunConfig, LabError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(c) = cadence {
        cfg.time.cadence = c;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &RunConfig) -> Result<PathBuf, LabError> {
    args.out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| LabError::Config("no output directory: pass --out or set \"output\"".into()))
}

fn report(manifest: &RunManifest, quiet: bool) -> ExitCode {
    for a in &manifest.assertions {
        if !quiet || !a.passed {
            println!("{} {}  {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
        }
    }
    if !quiet {
        for (k, v) in &manifest.summary {
            println!("     {k} = {v:.6e}");
        }
        println!("wall time {:.2} s", manifest.wall_time_s);
    }
    if manifest.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, LabError> {
    match &cli.command {
        Command::Validate { config } => {
            let cfg = load(config, cli.cadence)?;
            let v = experiments::validate(&cfg)?;
            if !cli.quiet {
                println!("nonlinearity:\n{}", v.nonlinearity);
                println!("potential{}:\n{}", if v.potential_required { "" } else { " (not required)" }, v.potential);
            }
            Ok(if v.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::GroundState(args) => {
            let cfg = load(&args.config, cli.cadence)?;
            let out = out_dir(args, &cfg)?;
            let (m, _) = experiments::run_ground_state(&cfg, Some(&out))?;
            Ok(report(&m, cli.quiet))
        }
        Command::Evolve(args) => {
            let cfg = load(&args.config, cli.cadence)?;
            let out = out_dir(args, &cfg)?;
            let m = experiments::run(&cfg, Some(&out))?;
            Ok(report(&m, cli.quiet))
        }
        Command::Sweep(args) => {
            let mut cfg = load(&args.config, cli.cadence)?;
            cfg.experiment = ExperimentKind::Sweep;
            let out = out_dir(args, &cfg)?;
            let (m, sweep) = experiments::run_sweep(&cfg, Some(&out))?;
            if !cli.quiet {
                println!("{:>10} {:>14} {:>14} {:>12}", "h", "sup|H_h|", "sup|q-q_p|", "dt");
                for r in &sweep.rows {
                    println!("{:>10} {:>14.6e} {:>14.6e} {:>12.4e}", r.h, r.sup_hh, r.sup_particle_gap, r.dt);
                }
            }
            Ok(report(&m, cli.quiet))
        }
        Command::Stability(args) => {
            let mut cfg = load(&args.config, cli.cadence)?;
            cfg.experiment = ExperimentKind::Stability;
            let out = out_dir(args, &cfg)?;
            let (m, _) = experiments::run_stability(&cfg, Some(&out))?;
            Ok(report(&m, cli.quiet))
        }
        Command::Template { kind } => {
            let cfg = match kind {
                Template::Flagship => RunConfig::flagship(),
                Template::Stationary => RunConfig::stationary_default(),
                Template::Stability => RunConfig::stability_default(),
            };
            println!("{}", cfg.to_json());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
