//! The `fluxchain` command line.
//!
//! Exit codes: 0 on success, 1 on a domain, IO or `--check` failure, 2 on a
//! usage error.

pub mod args;
mod commands;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

use crate::args::Cli;
use crate::output::{check, entries, place, write_atomic, DirLock, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] fluxchain_core::Error),
    #[error("{0}")]
    Runtime(String),
    #[error("check failed:\n  {}", .0.join("\n  "))]
    CheckFailed(Vec<String>),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fluxchain: {e}");
            e.exit_code()
        }
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn execute(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let started = Instant::now();
    let out = commands::dispatch(&cli.global, &cli.command)?;
    if let Some(note) = &out.note {
        eprintln!("{note}");
    }

    let Some(target) = &cli.global.out else {
        if cli.global.check {
            return Err(CliError::Usage("--check needs --out".into()));
        }
        // Secondary artifacts only exist as files.
        if let Some(a) = out.artifacts.first() {
            std::io::stdout().lock().write_all(&a.bytes).map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
        }
        return Ok(());
    };

    let placement = place(target, &out.stem, &out.artifacts)?;
    let paths: Vec<PathBuf> = placement
        .files
        .iter()
        .chain(std::iter::once(&placement.manifest))
        .map(|f| placement.dir.join(f))
        .collect();
    if let Some(clash) = paths.iter().find(|p| out.inputs.iter().any(|i| same_file(i, p))) {
        return Err(CliError::Usage(format!("{} is an input of this run; refusing to overwrite it", clash.display())));
    }
    let fresh = entries(&placement, &out.artifacts);

    if cli.global.check {
        let _lock = DirLock::acquire(&placement.dir)?;
        let problems = check(&placement, &fresh)?;
        if !problems.is_empty() {
            return Err(CliError::CheckFailed(problems));
        }
        println!("check passed: {} output(s) match {}", fresh.len(), placement.manifest);
        return Ok(());
    }

    std::fs::create_dir_all(&placement.dir).map_err(|e| CliError::io(&placement.dir, e))?;
    let _lock = DirLock::acquire(&placement.dir)?;
    for (path, a) in paths.iter().zip(&out.artifacts) {
        write_atomic(path, &a.bytes)?;
    }
    let manifest = RunManifest {
        subcommand: out.stem.replace('-', " "),
        arguments: argv.iter().skip(1).filter(|a| *a != "--check").cloned().collect(),
        config_paths: out.configs,
        seed: cli.global.seed,
        output_directory: placement.dir.canonicalize().unwrap_or_else(|_| placement.dir.clone()).display().to_string(),
        outputs: fresh,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push(b'\n');
    write_atomic(&placement.dir.join(&placement.manifest), &text)
}
