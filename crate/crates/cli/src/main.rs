use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridsec_cli::config::Format;
use gridsec_cli::{run, Command, RunOptions};

/// Cyber-physical security games on a DC-OPF grid model.
#[derive(Parser)]
#[command(name = "gridsec", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Base-case and single-outage DC OPF
    Opf(Common),
    /// Line-loss cost per line
    Costs(Common),
    /// Attacker payoff matrix
    Payoffs(Common),
    /// Zero-sum equilibrium
    Ne(Common),
    /// Defender best reply to level-k attackers over a tau grid
    ChSweep(Common),
    /// Every stage
    All(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the scenario's output.dir, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact format; repeat for several (default: the scenario's list)
    #[arg(long, value_enum)]
    format: Vec<Format>,
    /// Report currency in thousands
    #[arg(long)]
    thousands: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Opf(a) => (Command::Opf, a),
        Cmd::Costs(a) => (Command::Costs, a),
        Cmd::Payoffs(a) => (Command::Payoffs, a),
        Cmd::Ne(a) => (Command::Ne, a),
        Cmd::ChSweep(a) => (Command::ChSweep, a),
        Cmd::All(a) => (Command::All, a),
    };
    let scenario = match gridsec_cli::load(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let mut opts = RunOptions::from_scenario(&scenario);
    if let Some(out) = args.out {
        opts.out = out;
    }
    if !args.format.is_empty() {
        opts.formats = args.format;
    }
    opts.thousands |= args.thousands;
    match run(command, &scenario, &opts) {
        Ok(_) => {
            println!(
                "{} artifacts written to {}",
                command.name(),
                opts.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
