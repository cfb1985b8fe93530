//! Command-line front end; [`run_cli`] is the whole program.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Context;
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Context::resolve(&cli.common)?;
    let (artifacts, failure) = match &cli.command {
        Command::Gen { with_weights } => (commands::gen(&ctx, *with_weights)?, None),
        Command::Verify => commands::verify(&ctx)?,
        Command::Analyze { inputs } => (commands::analyze(&ctx, inputs)?, None),
        Command::Reduce { inputs, reducer } => (commands::reduce(&ctx, inputs, reducer.as_deref())?, None),
        Command::Compare { inputs } => (commands::compare(&ctx, inputs)?, None),
        Command::Flops { model, three_stage } => (commands::flops(&ctx, model.as_deref(), *three_stage)?, None),
        Command::Search { inputs, workers } => (commands::search(&ctx, inputs, workers.map(|w| w as usize))?, None),
    };
    for path in artifacts.write_all(&ctx.out)? {
        if !ctx.quiet {
            eprintln!("wrote {}", path.display());
        }
    }
    failure.map_or(Ok(()), Err)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use freqtoken::Error;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(Error::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Schedule("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Io(std::io::Error::other("x"))).exit_code(), 3);
        assert_eq!(CliError::VerificationFailed("x".into()).exit_code(), 4);
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["freqtoken", "verify", "--seed", "7", "--trials", "10"]).unwrap();
        assert_eq!(cli.common.seed, Some(7));
        assert_eq!(cli.common.trials, Some(10));
        assert!(matches!(cli.command, Command::Verify));
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(Cli::try_parse_from(["freqtoken", "verify", "--trials", "0"]).is_err());
    }
}
