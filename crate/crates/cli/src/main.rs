mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use tracing::Level;

use seeded_laplacian::Error;

use crate::args::{Cli, Command};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParam(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => Level::WARN,
        1 => Level::INFO,
        _ => Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --jobs {n}: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Segment(a) => commands::segment(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Robot(a) => commands::robot(&a),
        Command::Toy(a) => commands::toy(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Serve(a) => commands::serve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
