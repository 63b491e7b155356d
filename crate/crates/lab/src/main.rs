use std::process::ExitCode;

use clap::Parser;
use mfgbelief_lab::{run, Cli};

fn main() -> ExitCode {
    run(&Cli::parse())
}
