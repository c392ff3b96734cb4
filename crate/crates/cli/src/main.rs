use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use extshoot_cli::{run, Command, Options};

#[derive(Parser)]
#[command(
    name = "extshoot",
    version,
    about = "Shooting solver for sign-changing exterior radial solutions"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the hypotheses and print derived constants.
    Validate(Flags),
    /// Integrate one slope and write its trajectory.
    Shoot(Flags),
    /// Tabulate the interior zero count over the configured slope grid.
    Scan(Flags),
    /// Solve for the family points at both ends of each count set.
    Families(Flags),
    /// Run the small- and large-slope verification suites.
    Verify(Flags),
    /// Re-emit stored results and regenerate plots.
    Export(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON config file, or `-` for standard input.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config and EXTSHOOT_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Shooting slope for `shoot`.
    #[arg(long)]
    a: Option<f64>,
    /// Number of family indices.
    #[arg(long)]
    m: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (command, flags) = match cli.command {
        Cmd::Validate(f) => (Command::Validate, f),
        Cmd::Shoot(f) => (Command::Shoot, f),
        Cmd::Scan(f) => (Command::Scan, f),
        Cmd::Families(f) => (Command::Families, f),
        Cmd::Verify(f) => (Command::Verify, f),
        Cmd::Export(f) => (Command::Export, f),
    };
    let opts = Options {
        config: flags.config,
        out: flags.out,
        workers: flags.workers,
        a: flags.a,
        m: flags.m,
    };
    match run(command, &opts, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("extshoot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
