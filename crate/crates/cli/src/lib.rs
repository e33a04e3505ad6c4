//! Command-line front end for the pairspin simulator.
//!
//! Every subcommand reads typed parameters from flags and an optional config
//! file, runs one pipeline and writes `<command>.csv`, `<command>.json` and a
//! `run.json` manifest into the output directory. Frequencies are plain Hz.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use clap::{Arg, ArgAction, ArgMatches, Command as ClapCommand};
use commands::{Context, COMMANDS};
use config::{parse_config, resolve, Entry, Kind, ParamSpec, Params};
use serde_json::json;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<pairspin::Error> for CliError {
    fn from(e: pairspin::Error) -> Self {
        use pairspin::Error::*;
        match e {
            Numerical(_) | NotHermitian(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

const GLOBALS: &[ParamSpec] = &[
    config::param("seed", Kind::Count, None, "master seed"),
    config::param("out", Kind::Text, None, "output directory"),
    config::param("threads", Kind::Count, None, "worker threads"),
];

fn value_arg(spec: &ParamSpec) -> Arg {
    let mut help = format!("{} [{}]", spec.help, spec.kind.unit());
    if let Some(d) = spec.default {
        help.push_str(&format!(" (default: {d})"));
    }
    let arg = Arg::new(spec.name).long(spec.name).help(help);
    match spec.kind {
        Kind::Flag => arg.action(ArgAction::SetTrue),
        Kind::Choice(options) => {
            arg.value_name(spec.kind.unit()).value_parser(options.to_vec()).allow_hyphen_values(true)
        }
        kind => arg.value_name(kind.unit()).allow_hyphen_values(true),
    }
}

pub fn cli() -> ClapCommand {
    let mut app = ClapCommand::new("pairspin")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Nuclear spin pair experiments: noise, decay, readout and entanglement")
        .after_help(
            "All frequencies are ordinary frequencies in Hz (never multiplied by 2π). \
             Numeric values accept unit suffixes such as kHz, ms, G or um.",
        )
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("key = value config file with [command] sections"),
        )
        .arg(
            Arg::new("out").long("out").global(true).value_name("DIR").help("output directory (default: pairspin-out)"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_name("N")
                .help("master seed (default: $PAIRSPIN_SEED, else 1)"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .help("worker threads (default: all cores)"),
        );
    for c in COMMANDS {
        let mut sub = ClapCommand::new(c.name).about(c.about);
        for spec in c.params {
            sub = sub.arg(value_arg(spec));
        }
        app = app.subcommand(sub);
    }
    app
}

fn cli_values(specs: &'static [ParamSpec], m: &ArgMatches) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    for s in specs {
        if s.kind == Kind::Flag {
            if m.get_flag(s.name) {
                out.push((s.name, "true".to_string()));
            }
        } else if let Some(v) = m.get_one::<String>(s.name) {
            out.push((s.name, v.clone()));
        }
    }
    out
}

struct Globals {
    seed: u64,
    out: PathBuf,
    threads: usize,
}

fn globals(file: &[Entry], m: &ArgMatches) -> Result<Globals, CliError> {
    let mut cli = cli_values(GLOBALS, m);
    if !cli.iter().any(|(k, _)| *k == "seed") && !file.iter().any(|e| e.key == "seed") {
        if let Ok(env) = std::env::var("PAIRSPIN_SEED") {
            cli.push(("seed", env));
        }
    }
    let p = resolve(GLOBALS, file, &cli)?;
    Ok(Globals {
        seed: if p.has("seed") { p.u("seed") as u64 } else { 1 },
        out: PathBuf::from(if p.has("out") { p.s("out") } else { "pairspin-out" }),
        threads: if p.has("threads") { p.u("threads") } else { 0 },
    })
}

fn execute(m: &ArgMatches) -> Result<(), CliError> {
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let command = commands::find(name).expect("clap only accepts known subcommands");
    let file = match sub.get_one::<String>("config") {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            let cfg = parse_config(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
            if let Some(bad) = cfg.sections.keys().find(|s| commands::find(s).is_none()) {
                return Err(CliError::Config(format!("{path}: unknown section [{bad}]")));
            }
            cfg
        }
        None => Default::default(),
    };
    let g = globals(&file.global, sub)?;
    // a second call in the same process keeps the first pool; the cap never changes results
    let _ = rayon::ThreadPoolBuilder::new().num_threads(g.threads).build_global();
    let section = file.sections.get(name).map(Vec::as_slice).unwrap_or(&[]);
    let mut params: Params = resolve(command.params, section, &cli_values(command.params, sub))?;
    let outcome = (command.run)(&Context { seed: g.seed }, &mut params)?;

    std::fs::create_dir_all(&g.out).map_err(io)?;
    let mut files = Vec::new();
    for t in &outcome.tables {
        files.push(output::write_file(&g.out, &format!("{}.csv", t.name), &t.to_csv()).map_err(io)?);
    }
    let summary = serde_json::to_string_pretty(&outcome.summary).map_err(|e| CliError::Io(e.to_string()))?;
    files.push(output::write_file(&g.out, &format!("{name}.json"), &summary).map_err(io)?);
    let units: serde_json::Map<String, serde_json::Value> =
        command.params.iter().map(|s| (s.name.to_string(), json!(s.kind.unit()))).collect();
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": g.seed,
        "threads": g.threads,
        "params": params,
        "units": units,
        "outputs": files,
    });
    let manifest = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    output::write_file(&g.out, "run.json", &manifest).map_err(io)?;
    // a closed pipe on stdout is not a failure; the files are already written
    let _ = writeln!(std::io::stdout(), "{summary}");
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&matches) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Config(_) = e {
                eprintln!("run `pairspin help` for usage");
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn every_numeric_flag_documents_its_unit() {
        for c in COMMANDS {
            let sub = cli().find_subcommand(c.name).unwrap().clone();
            for spec in c.params {
                let arg = sub.get_arguments().find(|a| a.get_id() == spec.name).unwrap();
                let help = arg.get_help().unwrap().to_string();
                assert!(help.contains(&format!("[{}]", spec.kind.unit())), "{}/{}: {help}", c.name, spec.name);
            }
        }
    }

    #[test]
    fn defaults_parse() {
        for c in COMMANDS {
            resolve(c.params, &[], &[]).unwrap_or_else(|e| panic!("{}: {e}", c.name));
        }
        let census = commands::find("census").unwrap();
        let p = resolve(census.params, &[], &[]).unwrap();
        assert_eq!(p.f("larmor"), pairspin::consts::LARMOR_HZ);
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(pairspin::Error::Domain("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(pairspin::Error::Numerical("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(pairspin::Error::NotHermitian(1.0)).exit_code(), 3);
    }
}
