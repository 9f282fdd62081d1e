use std::path::PathBuf;
use std::process::ExitCode;

use breather_cli::trace::{render_markdown, traceability_report, Verdict};
use breather_cli::{pipelines, CliError, Pipeline, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "breather",
    version,
    about = "Compute, evolve and analyse small-amplitude breathers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// `key=value` override of a config field (dotted path), repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, short, conflicts_with = "verbose")]
    quiet: bool,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the exact breather over one period.
    Evolve(Common),
    /// Newton-solve the harmonic system at each amplitude.
    Solve(Common),
    /// Continue a family along decreasing amplitudes.
    Sweep(Common),
    /// Decompose a stored solution and evaluate its resonance integrals.
    Analyze(Common),
    /// Golden-rule integrals of the potential, optionally on solved members.
    Fermi(Common),
    /// Run every acceptance criterion.
    Accept(Common),
    /// Print the traceability table of an accept run.
    Report(ReportArgs),
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory of an accept run.
    #[arg(long, required_unless_present = "config")]
    dir: Option<PathBuf>,
    /// Config whose accept output directory is used when `--dir` is absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn init_logging(quiet: bool, verbose: bool) {
    let level = if quiet {
        "error"
    } else if verbose {
        "debug"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let dir = match (&args.dir, &args.config) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => RunConfig::load(c, &args.overrides)?.output_dir(Pipeline::Accept),
        (None, None) => return Err(CliError::Config("report needs --dir or --config".into())),
    };
    let rep = traceability_report(&dir);
    print!("{}", render_markdown(&rep));
    if !rep.mismatched_files.is_empty() {
        return Err(CliError::Config(format!(
            "checksum mismatch in {}",
            rep.mismatched_files.join(", ")
        )));
    }
    if rep.count(Verdict::Fail) > 0 {
        return Err(CliError::Acceptance(rep.count(Verdict::Fail)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, common) = match &cli.command {
        Command::Evolve(c) => (Pipeline::Evolve, c),
        Command::Solve(c) => (Pipeline::Solve, c),
        Command::Sweep(c) => (Pipeline::Sweep, c),
        Command::Analyze(c) => (Pipeline::Analyze, c),
        Command::Fermi(c) => (Pipeline::Fermi, c),
        Command::Accept(c) => (Pipeline::Accept, c),
        Command::Report(args) => {
            init_logging(false, false);
            return match report(args) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    log::error!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
    };
    init_logging(common.quiet, common.verbose);
    let outcome = RunConfig::load(&common.config, &common.overrides)
        .and_then(|cfg| pipelines::run(pipeline, &cfg));
    match outcome {
        Ok((dir, _, Ok(()))) => {
            log::info!("done: {}", dir.display());
            ExitCode::SUCCESS
        }
        Ok((dir, _, Err(e))) => {
            log::error!("{e} (artifacts in {})", dir.display());
            ExitCode::from(e.exit_code() as u8)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
