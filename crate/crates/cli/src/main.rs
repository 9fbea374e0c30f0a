use std::process::ExitCode;

use clap::Parser;
use martlab_cli::{dispatch, Cli, Exit};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let code = match dispatch(cli, &mut out) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Usage
        }
    };
    ExitCode::from(code as u8)
}
