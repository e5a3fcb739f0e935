use std::process::ExitCode;

use jamguard_cli::{configure_threads, execute, parse_args, CliError};

fn run() -> Result<i32, CliError> {
    configure_threads(std::env::var("JAMGUARD_THREADS").ok().as_deref())?;
    let spec = parse_args(std::env::args_os())?;
    let outcome = execute(&spec)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if outcome.exit_code == 0 {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            match &e {
                CliError::Usage(inner) => {
                    let _ = inner.print();
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
