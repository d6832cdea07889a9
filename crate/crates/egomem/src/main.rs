use clap::Parser;

use egomem::cli::{cmd_enroll, cmd_evaluate, cmd_features, cmd_report, cmd_simulate, Command};

/// Self-supervised face/voice dataset collection with spatial working
/// memory, on deterministic simulated sessions.
#[derive(Parser)]
#[command(name = "egomem", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Features(args) => cmd_features(args),
        Command::Enroll(args) => cmd_enroll(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(output) => print!("{output}"),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(1);
        }
    }
}
