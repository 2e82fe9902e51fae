use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match asa_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version land here too.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match asa_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
