//! Config-driven scenario runner around `rotor_core`.
//!
//! `rotorctl <command> --config <path> [--set section.key=value]...` parses an
//! INI-style configuration, dispatches to the library, and writes plot-ready
//! CSV files plus a manifest that can be re-fed as a config to reproduce the
//! run byte for byte.

pub mod config;
pub mod csvio;
pub mod scenario;

use scenario::{CliError, Command};

const USAGE: &str = "\
usage: rotorctl <command> --config <path> [--set section.key=value]... [--field-file <path>]

commands:
  classical-scan   classical optimum of cosθ − a·cos²θ over a grid of a
  target-scan      target-state expectations over (a, j_max)
  target-state     one target state: coefficients and angular density
  free-evolve      field-free trajectory starting from a target state
  optimize         THz field optimization toward a target state
  bipulse          thermal laser + THz-kick trajectory
  train            thermal laser + kick-train trajectory
  propagate        pure-state trajectory from |0,0⟩ (optionally under a
                   field file exported by `optimize`)

exit codes: 0 success, 2 configuration error, 3 numeric/convergence error";

/// Run the CLI on pre-split arguments (without the program name);
/// returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    match run_inner(args) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}\n\n{USAGE}");
            2
        }
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            2
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric error: {msg}");
            3
        }
    }
}

fn run_inner(args: &[String]) -> Result<Vec<std::path::PathBuf>, CliError> {
    if args.is_empty() || args[0] == "--help" || args[0] == "help" || args[0] == "-h" {
        return Err(CliError::Usage("missing command".into()));
    }
    let command = Command::parse(&args[0])?;
    let mut config_path: Option<String> = None;
    let mut field_file: Option<String> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--config" => {
                i += 1;
                config_path = Some(
                    args.get(i)
                        .ok_or_else(|| CliError::Usage("--config needs a path".into()))?
                        .clone(),
                );
            }
            "--set" => {
                i += 1;
                let kv = args
                    .get(i)
                    .ok_or_else(|| CliError::Usage("--set needs section.key=value".into()))?;
                let (key, value) = kv
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("malformed --set '{kv}'")))?;
                overrides.push((key.trim().to_string(), value.trim().to_string()));
            }
            "--field-file" => {
                i += 1;
                field_file = Some(
                    args.get(i)
                        .ok_or_else(|| CliError::Usage("--field-file needs a path".into()))?
                        .clone(),
                );
            }
            other => {
                return Err(CliError::Usage(format!("unknown argument '{other}'")));
            }
        }
        i += 1;
    }
    let config_path =
        config_path.ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let mut cfg = config::Config::load(std::path::Path::new(&config_path))
        .map_err(CliError::Config)?;
    for (key, value) in &overrides {
        cfg.set(key, value).map_err(CliError::Config)?;
    }
    scenario::execute(command, &cfg, field_file.as_deref())
}
