use std::process::ExitCode;

use clap::Parser;
use ticpay_cli::{dispatch, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let code = dispatch(&cli, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
