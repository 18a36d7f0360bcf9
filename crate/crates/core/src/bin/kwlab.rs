use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use kwlab::cli::{run, ExperimentConfig, Mode, RawConfig, EXIT_ERROR, KEYS};

fn command() -> Command {
    let mut cmd = Command::new("kwlab")
        .about("Prescribed-curvature experiments on flat tori")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("PATH")
                .value_parser(clap::value_parser!(PathBuf))
                .help("key = value file; command-line flags override it"),
        );
    for &key in KEYS {
        if key == "mode" {
            continue;
        }
        let long: &'static str = key;
        let mut arg = Arg::new(key).long(long).global(true);
        if key == "single_thread" {
            arg = arg.action(ArgAction::SetTrue).help("one worker thread, bit-exact output");
        } else {
            arg = arg.value_name("VALUE").allow_negative_numbers(true);
        }
        if key.contains('_') {
            let kebab: &'static str = Box::leak(key.replace('_', "-").into_boxed_str());
            arg = arg.alias(kebab);
        }
        cmd = cmd.arg(arg);
    }
    for &name in Mode::NAMES {
        cmd = cmd.subcommand(Command::new(name));
    }
    cmd
}

fn raw_config(matches: &ArgMatches) -> Result<RawConfig, kwlab::Error> {
    let mut raw = match matches.get_one::<PathBuf>("config") {
        Some(path) => RawConfig::read(path)?,
        None => RawConfig::default(),
    };
    let (mode, sub) = matches.subcommand().expect("subcommand is required");
    raw.set("mode", mode);
    for &key in KEYS {
        if key == "mode" {
            continue;
        }
        if key == "single_thread" {
            if sub.get_flag(key) {
                raw.set(key, "true");
            }
        } else if let Some(v) = sub.get_one::<String>(key) {
            raw.set(key, v.clone());
        }
    }
    Ok(raw)
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let result = raw_config(&matches)
        .and_then(|raw| ExperimentConfig::from_raw(&raw))
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("kwlab: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
