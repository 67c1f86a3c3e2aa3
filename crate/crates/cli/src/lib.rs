//! Command-line front end for the `slicedict` library.

pub mod args;
pub mod color;
pub mod commands;
pub mod dictfile;
pub mod manifest;
pub mod metrics;
pub mod mosaic;
pub mod pnm;

use anyhow::{Context, Result};

use args::{Cli, Command};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Inpaint(a) => commands::inpaint_cmd(a),
        Command::Separate(a) => commands::separate_cmd(a),
        Command::Enhance(a) => commands::enhance_cmd(a),
    }
}
