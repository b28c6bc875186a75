mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use commands::Failure;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

/// Parses `argv` (without the program name) and runs the subcommand.
fn run(argv: Vec<String>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(
        std::iter::once("underlay".to_string()).chain(argv.iter().cloned()),
    ) {
        Ok(cli) => cli,
        Err(e) => {
            let quiet = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if quiet {
                Ok(())
            } else {
                Err(Failure::silent(commands::EXIT_VALIDATION))
            };
        }
    };
    if let args::Command::Replay(r) = &cli.command {
        let replayed = manifest::replay_argv(&r.manifest, r.out.as_deref())?;
        let expected = replayed.scenario_hash.clone();
        let cli = Cli::try_parse_from(
            std::iter::once("underlay".to_string()).chain(replayed.argv.iter().cloned()),
        )
        .map_err(|e| Failure::validation(format!("manifest arguments no longer parse: {e}")))?;
        let actual = manifest::scenario_hash(&commands::effective_scenario(&cli)?.0);
        if actual != expected {
            return Err(Failure::validation(format!(
                "scenario hash {actual} differs from the manifest's {expected}; the configuration changed since the recorded run"
            )));
        }
        return commands::dispatch(&cli, &replayed.argv);
    }
    commands::dispatch(&cli, &argv)
}
