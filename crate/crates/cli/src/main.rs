use actgrad_cli::commands::{
    run_compare, run_fetch_data, run_gradcheck, run_pso, run_train, CompareArgs, FetchDataArgs,
    GlobalArgs, GradcheckArgs, PsoArgs, TrainArgs,
};
use clap::{Parser, Subcommand};
use std::process::ExitCode;

/// Train and analyze CNNs with trainable activation functions on CIFAR-10.
#[derive(Parser)]
#[command(name = "actgrad", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network with RMSProp; writes metrics CSV, checkpoint, manifest.
    Train(TrainArgs),
    /// Accuracy improvement of variant runs over a baseline run.
    Compare(CompareArgs),
    /// Train a network with particle swarm optimization.
    Pso(PsoArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Download (or synthesize) the CIFAR-10 binary batches.
    FetchData(FetchDataArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => run_train(&cli.global, args).map(|_| ()),
        Command::Compare(args) => run_compare(args).map(|_| ()),
        Command::Pso(args) => run_pso(&cli.global, args).map(|_| ()),
        Command::Gradcheck(args) => run_gradcheck(&cli.global, args),
        Command::FetchData(args) => run_fetch_data(&cli.global, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
