use std::io::{self, Write};

use clap::Parser;
use resfluor_cli::error::CliError;
use resfluor_cli::{run, Cli};

/// Prints lines, stopping quietly if the reader has gone away.
fn print_lines(text: &[String]) {
    let mut out = io::stdout().lock();
    for line in text {
        if writeln!(out, "{line}").is_err() {
            return;
        }
    }
    let _ = out.flush();
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => print_lines(&lines),
        Err(e) => {
            if let CliError::NotConverged(report) = &e {
                print_lines(std::slice::from_ref(report));
                eprintln!("error: fit did not converge");
            } else {
                eprintln!("error: {e}");
            }
            std::process::exit(e.exit_code());
        }
    }
}
