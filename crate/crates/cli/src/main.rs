//! `spin-anneal` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical divergence,
//! 4 I/O or parse failure.

mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use spin_anneal::Error;

use args::Cli;
use config::{read_config, ConfigFile};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Dimension { .. } | Error::TooLarge { .. } => 2,
        Error::Divergence(_) => 3,
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) => 4,
    }
}

/// Path given to `--config`, found before clap runs so that file defaults
/// can be spliced in ahead of the command-line flags.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().filter_map(|a| a.to_str());
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Inserts `--key value` for every global config key the subcommand
/// accepts, right after the subcommand name; later command-line flags win.
fn splice_defaults(argv: Vec<OsString>, file: &ConfigFile) -> Vec<OsString> {
    let cmd = Cli::command();
    let Some(pos) = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| cmd.find_subcommand(s).is_some()))
    else {
        return argv;
    };
    let sub = cmd.find_subcommand(argv[pos].to_str().unwrap_or_default()).expect("found above");
    let mut injected = Vec::new();
    for (key, value) in &file.global {
        let wanted = key.replace('_', "-");
        let arg = sub.get_arguments().find(|a| {
            a.get_long().is_some_and(|l| l == wanted || l.eq_ignore_ascii_case(&wanted))
                || a.get_visible_aliases().is_some_and(|al| al.contains(&wanted.as_str()))
        });
        match arg {
            Some(a) => {
                injected.push(OsString::from(format!("--{}", a.get_long().unwrap_or(&wanted))));
                injected.push(OsString::from(value));
            }
            None => log::debug!("config key '{key}' is not used by this command"),
        }
    }
    let mut out = argv;
    out.splice(pos + 1..pos + 1, injected);
    out
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let file = match config_path(&argv).map(|p| read_config(&p)).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = Cli::parse_from(splice_defaults(argv, &file));

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let outcome = commands::resolve_solvers(&cli.command, &file).and_then(|s| commands::run(&cli.command, s));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
