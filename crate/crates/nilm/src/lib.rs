//! File formats, parallel evaluation and the `nilm` command line on top of
//! [`nilm_core`].

pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod parallel;
pub mod pipeline;

pub use error::{AppError, AppResult};

use clap::Parser;

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match cli::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &cli::Command) -> AppResult<()> {
    use cli::Command;
    match command {
        Command::Generate(args) => commands::generate(args),
        Command::Evaluate(args) => {
            let summary = commands::evaluate(args)?;
            print!("{}", commands::summary_table(&summary.report));
            println!("outputs written to {}", summary.config.out.display());
            Ok(())
        }
        Command::Predict(args) => {
            let rows = commands::predict(args)?;
            println!("{rows} prediction rows written to {}", args.out.display());
            Ok(())
        }
        Command::Oracle(args) => {
            for (a, acc) in commands::oracle(args)? {
                println!("{:<16} {acc:>8.2}", a.name());
            }
            Ok(())
        }
        Command::Fhmm(args) => {
            for (a, acc) in commands::fhmm(args)? {
                println!("{:<16} {acc:>8.2}", a.name());
            }
            Ok(())
        }
    }
}
