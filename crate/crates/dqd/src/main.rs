use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgMatches, Command};

use dqd::commands::{cmd_dynamics, cmd_fit_bath, cmd_sweep, cmd_validate};
use dqd::config::{OPTIONAL_KEYS, REQUIRED_KEYS};
use dqd::{CliError, RawConfig};

const DEFAULT_CACHE_DIR: &str = ".dqd-cache";

fn with_config_args(cmd: Command) -> Command {
    let cmd = cmd
        .arg(Arg::new("config").long("config").value_name("PATH").help("key = value configuration file"))
        .arg(
            Arg::new("cache-dir")
                .long("cache-dir")
                .value_name("DIR")
                .default_value(DEFAULT_CACHE_DIR)
                .help("directory of cached bath fits"),
        );
    REQUIRED_KEYS.iter().chain(OPTIONAL_KEYS.iter()).fold(cmd, |cmd, key| {
        cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").help("overrides the configuration file"))
    })
}

fn cli() -> Command {
    Command::new("dqd")
        .about("Steady states of a driven double quantum dot in a phonon bath")
        .subcommand_required(true)
        .subcommand(with_config_args(Command::new("fit-bath").about("fit and cache the bath kernels")))
        .subcommand(with_config_args(Command::new("sweep").about("steady-state populations over a bias grid")))
        .subcommand(
            with_config_args(Command::new("dynamics").about("trajectory from the left dot at the configured bias"))
                .arg(Arg::new("t-end").long("t-end").required(true).value_parser(value_parser!(f64)))
                .arg(Arg::new("samples").long("samples").required(true).value_parser(value_parser!(usize))),
        )
        .subcommand(with_config_args(Command::new("validate").about("run the consistency checks")))
}

fn raw_config(m: &ArgMatches) -> Result<RawConfig, CliError> {
    let mut raw = match m.get_one::<String>("config") {
        Some(path) => RawConfig::load(path.as_ref())?,
        None => RawConfig::default(),
    };
    for key in REQUIRED_KEYS.iter().chain(OPTIONAL_KEYS.iter()) {
        if let Some(v) = m.get_one::<String>(key) {
            raw.set(key, v.clone())?;
        }
    }
    Ok(raw)
}

fn run(name: &str, m: &ArgMatches) -> Result<String, CliError> {
    let cfg = raw_config(m)?.into_config()?;
    let cache = PathBuf::from(m.get_one::<String>("cache-dir").expect("has default"));
    match name {
        "fit-bath" => cmd_fit_bath(&cfg, &cache),
        "sweep" => cmd_sweep(&cfg, &cache),
        "dynamics" => {
            let t_end = *m.get_one::<f64>("t-end").expect("required");
            let samples = *m.get_one::<usize>("samples").expect("required");
            cmd_dynamics(&cfg, &cache, t_end, samples)
        }
        "validate" => cmd_validate(&cfg, &cache),
        _ => unreachable!("unknown subcommand"),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match run(name, sub) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
