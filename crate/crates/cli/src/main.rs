use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use cpb_cli::commands::{self, Cli};

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var("THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("THREADS must be a positive integer, found `{v}`")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match thread_cap() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let result = commands::run(cli, &mut out, &mut err);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
