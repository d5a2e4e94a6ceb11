//! `ghzbayes`: command-line front end for the phase-estimation library.

mod commands;
mod config;
mod error;
mod report;

use clap::{Parser, Subcommand};
use commands::Ctx;
use config::Params;
use error::CliError;
use report::Report;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "ghzbayes", version, about = "Bayesian phase estimation with adaptive GHZ-block measurements")]
struct Cli {
    /// INI config file; one section per command plus [global]. Flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print a single JSON document on stdout
    #[arg(long, global = true)]
    json: bool,
    /// RNG seed for optimiser restarts and Monte Carlo
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the primary result table as CSV
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// With --out, also write a gnuplot script next to the CSV
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate (and optionally rank) binary partitions of N qubits
    Partitions(commands::PartitionsArgs),
    /// Optimal quantum interferometer BMSE
    Oqi(commands::OqiArgs),
    /// Optimise an adaptive GHZ-block measurement plan
    Optimize(commands::OptimizeArgs),
    /// Gain over the coherent spin state across prior widths (resumable)
    SweepPrior(commands::SweepArgs),
    /// RBMSE scaling and overhead constants of several schemes
    Scaling(commands::ScalingArgs),
    /// Phase unwinding with slow atoms for wide priors
    Unwind(commands::UnwindArgs),
    /// Allan deviation of Ramsey clock protocols
    Clock(commands::ClockArgs),
    /// Gains under decoherence and gain-decay fits
    Noise(commands::NoiseCmdArgs),
    /// Large-N BMSE plateaus for Heisenberg and standard scaling
    Plateau(commands::PlateauArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Partitions(_) => "partitions",
            Command::Oqi(_) => "oqi",
            Command::Optimize(_) => "optimize",
            Command::SweepPrior(_) => "sweep-prior",
            Command::Scaling(_) => "scaling",
            Command::Unwind(_) => "unwind",
            Command::Clock(_) => "clock",
            Command::Noise(_) => "noise",
            Command::Plateau(_) => "plateau",
        }
    }
}

fn set_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GHZBAYES_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("GHZBAYES_THREADS: expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Run(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    set_threads()?;
    let ini = config::load(cli.config.as_deref())?;
    let name = cli.command.name();
    let mut ctx = Ctx { params: Params::new(ini.as_ref(), name), seed_flag: cli.seed };
    let mut r = Report::new(name);
    match &cli.command {
        Command::Partitions(a) => commands::partitions(a, &mut ctx, &mut r)?,
        Command::Oqi(a) => commands::oqi(a, &mut ctx, &mut r)?,
        Command::Optimize(a) => commands::optimize(a, &mut ctx, &mut r)?,
        Command::SweepPrior(a) => commands::sweep_prior(a, &mut ctx, &mut r)?,
        Command::Scaling(a) => commands::scaling(a, &mut ctx, &mut r)?,
        Command::Unwind(a) => commands::unwind(a, &mut ctx, &mut r)?,
        Command::Clock(a) => commands::clock(a, &mut ctx, &mut r)?,
        Command::Noise(a) => commands::noise(a, &mut ctx, &mut r)?,
        Command::Plateau(a) => commands::plateau(a, &mut ctx, &mut r)?,
    }
    r.params = ctx.params.into_resolved();
    r.params.remove("seed");
    Ok(r)
}

fn emit(cli: &Cli, r: &Report, secs: f64) -> Result<(), CliError> {
    if let Some(path) = &cli.out {
        let table = r.tables.first().ok_or_else(|| CliError::Run("command produced no table".into()))?;
        r.write_csv(table, path)?;
        if cli.plot {
            r.write_plot_script(table, path, &path.with_extension("gp"))?;
        }
    }
    let mut out = std::io::stdout().lock();
    let written = if cli.json {
        serde_json::to_writer_pretty(&mut out, &r.to_json(secs)).map_err(std::io::Error::from).and_then(|_| writeln!(out))
    } else {
        r.print_text(&mut out).and_then(|_| writeln!(out, "wall time: {secs:.3} s"))
    };
    match written {
        // A closed pipe (e.g. `| head`) is not a failure of the run.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = run(&cli).and_then(|r| {
        emit(&cli, &r, start.elapsed().as_secs_f64())?;
        Ok(r.budget_limited)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
