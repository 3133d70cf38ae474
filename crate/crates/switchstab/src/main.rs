use std::process::ExitCode;

use clap::Parser;

use switchstab::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // The replica reduction is deterministic in replica order, so the
        // pool size only affects wall time.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("could not configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
