mod args;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::run::{execute, Failure};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            fail(&Failure::usage(rendered.trim_end()));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        set_threads(n);
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            fail(&f);
            ExitCode::from(f.code as u8)
        }
    }
}

fn fail(f: &Failure) {
    eprintln!("{}", f.to_json());
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) {
    // only fails if a pool already exists, which cannot happen this early
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) {}
