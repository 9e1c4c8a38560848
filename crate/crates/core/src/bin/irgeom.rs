use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use irgeom::cli::{emit, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[config]: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = run(&cli).and_then(|out| {
        if cli.global.verbose > 0 {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
        }
        emit(&out, cli.global.output.as_deref())
    });
    match result {
        Ok(Some(text)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
