use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddsim_cli::config::DEFAULTS;
use ddsim_cli::{load_config, run, take_config_flag};

#[derive(Parser)]
#[command(name = "ddsim", version, about = "Dynamical-decoupling ensemble simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: pdd, sdd, cdd, cpmg, rd-table or verify-analysis.
    ///
    /// Options: `--config FILE` and any `--key value` override.
    Run {
        experiment: String,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// List configuration keys and their defaults.
    Keys,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Keys => {
            let mut out = std::io::stdout().lock();
            for (k, v) in DEFAULTS {
                // A closed pipe (`ddsim keys | head`) is not an error.
                if writeln!(out, "{k} = {v}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Command::Run { experiment, args } => {
            let result = take_config_flag(&args)
                .and_then(|(config, overrides)| load_config(&experiment, config.as_deref(), &overrides))
                .and_then(|cfg| run(&cfg));
            match result {
                Ok(out) => {
                    for f in &out.files {
                        println!("{}", f.display());
                    }
                    if out.checks_passed {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("error: one or more verification checks failed");
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
