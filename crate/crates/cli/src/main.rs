use std::io;
use std::process::ExitCode;

use clap::Parser;
use rcd_cli::{exit_code, run, Cli, Io};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut out, mut err) = (io::stdout().lock(), io::stderr());
    let result = run(
        cli,
        &mut Io {
            out: &mut out,
            err: &mut err,
        },
    );
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
