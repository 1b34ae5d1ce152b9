//! Argument parsing. Every configuration key is also a long flag
//! (`--rho-test`, `--c-grid`, ...), so flags and config files share one
//! vocabulary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches};

use crate::config::read_config;
use crate::error::CliError;
use crate::run::execute;
use crate::spec::{Command, RunSpec, KEYS};

const ABOUT: &[(Command, &str)] = &[
    (Command::Se, "state-evolution predictions of the trained GCN"),
    (Command::Bo, "Bayes-optimal accuracy"),
    (Command::Sim, "train GCNs on sampled graphs and measure them"),
    (Command::Sweep, "se, bo and sim over the same grid"),
    (Command::Rates, "asymptotic learning rates of the GCN and the Bayes-optimal classifier"),
    (Command::Cstar, "optimal self-loop strength"),
    (Command::Plot, "draw a result table as SVG"),
];

const SWITCHES: &[&str] = &["symmetrize", "c_opt"];
const GRID_KEYS: &[&str] = &["alpha", "lambda", "mu", "rho", "rho_test", "d", "n", "r", "c"];

fn key_arg(key: &'static str) -> Arg {
    let long = key.replace('_', "-");
    let mut arg = Arg::new(key)
        .long(long.clone())
        .value_name("VALUE")
        .action(ArgAction::Append)
        .allow_hyphen_values(true);
    if long != key {
        arg = arg.alias(key);
    }
    if GRID_KEYS.contains(&key) {
        arg = arg.alias(format!("{long}-grid")).alias(format!("{key}_grid"));
    }
    if SWITCHES.contains(&key) {
        arg = arg.num_args(0..=1).default_missing_value("true");
    }
    arg
}

pub fn command() -> clap::Command {
    let mut cmd = clap::Command::new("gcnsbm")
        .about("Exact asymptotics and simulations of a one-layer GCN on attributed block models")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (c, about) in ABOUT {
        let mut sub = clap::Command::new(c.name()).about(*about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("read keys from FILE; flags override it"),
        );
        for key in KEYS {
            sub = sub.arg(key_arg(key));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// `(key, value)` pairs in command-line order.
fn flag_pairs(m: &ArgMatches) -> Vec<(String, String)> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for key in KEYS {
        if let (Some(vals), Some(idx)) = (m.get_many::<String>(key), m.indices_of(key)) {
            for (v, i) in vals.zip(idx) {
                pairs.push((i, key.to_string(), v.clone()));
            }
        }
    }
    pairs.sort_by_key(|p| p.0);
    pairs.into_iter().map(|(_, k, v)| (k, v)).collect()
}

/// The run described by parsed arguments.
pub fn spec_from(m: &ArgMatches) -> Result<RunSpec, CliError> {
    let (name, sub) = m.subcommand().ok_or_else(|| CliError::Usage("missing command".into()))?;
    let cmd: Command = name.parse().map_err(CliError::Usage)?;
    let config = match sub.get_one::<PathBuf>("config") {
        Some(p) => read_config(p)?,
        None => Vec::new(),
    };
    RunSpec::build(cmd, &config, &flag_pairs(sub))
}

/// Runs the program on `args` (program name first) and returns the exit
/// status: 0 on success, 1 when a grid point failed or the run broke, 2 on
/// usage errors.
pub fn main_with(args: Vec<OsString>) -> i32 {
    let m = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let spec = match spec_from(&m) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(&spec) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            if spec.command != Command::Plot {
                if let Some(p) = &report.output {
                    eprintln!("{} rows written to {}", report.rows.len(), p.display());
                }
            }
            let failed: Vec<_> = report.rows.iter().filter(|r| r.failed()).collect();
            for r in &failed {
                eprintln!("failed: {}", r.failure);
            }
            i32::from(!failed.is_empty())
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
