use std::path::PathBuf;
use std::process::ExitCode;

use carnot_mbo_cli::{execute, load_config, Suite};
use clap::{Args, Parser, Subcommand};

/// Validation runs for the diffusion-threshold approximation of horizontal
/// mean curvature flow.
#[derive(Parser)]
#[command(name = "carnot-mbo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heat kernel normalization, closed form and Gaussian bounds.
    KernelCheck(RunArgs),
    /// Iterates of the threshold operator and its order properties.
    Mbo(RunArgs),
    /// Direct solution of the curvature flow.
    Flow(RunArgs),
    /// Threshold iterates against the direct flow for each j.
    Compare(RunArgs),
    /// Small-time expansions of the threshold scheme.
    Asymptotics(RunArgs),
    /// Resolvent products against the direct flow for each j.
    Semigroup(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (suite, args) = match cli.command {
        Command::KernelCheck(a) => (Suite::Kernel, a),
        Command::Mbo(a) => (Suite::Mbo, a),
        Command::Flow(a) => (Suite::Flow, a),
        Command::Compare(a) => (Suite::Compare, a),
        Command::Asymptotics(a) => (Suite::Asymptotics, a),
        Command::Semigroup(a) => (Suite::Semigroup, a),
    };
    let result = load_config(args.config.as_deref(), &args.set).and_then(|cfg| execute(suite, &cfg));
    match result {
        Ok(out) => {
            print!("{}", out.report);
            println!("manifest: {}", out.manifest.display());
            let failures = out.report.failures();
            if failures.is_empty() {
                return ExitCode::SUCCESS;
            }
            for c in failures {
                eprintln!("FAIL {}: measured {:e}, threshold {:e}", c.name, c.measured, c.threshold);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
