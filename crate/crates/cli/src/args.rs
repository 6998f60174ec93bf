//! Command-line definitions and config-file merging.
//!
//! A config file is TOML. Top-level keys and keys under a table named after
//! the subcommand are turned into `--key=value` flags placed ahead of the
//! real arguments, so anything given on the command line wins. Top-level keys
//! the subcommand has no flag for are skipped.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use healthchain_core::SchemeKind;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "healthchain",
    version,
    about = "Health-record ledger toolkit: capacity tables, backlog sweeps, network demo, chain verification"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file of default flag values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expected and simulated end-of-day backlog for a list of sealing rates
    Sweep(SweepArgs),
    /// Sidechains needed per patient population and chain technology
    Capacity(CapacityArgs),
    /// Run a seeded end-to-end network and check its invariants
    Demo(DemoArgs),
    /// Verify a chain file or every chain file in a directory
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Transactions arriving per horizon
    #[arg(long)]
    pub lambda_day: f64,
    /// Sealing rates in tps, comma separated
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub mu: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Horizon length in seconds
    #[arg(long, default_value_t = 86_400)]
    pub horizon: u64,
    /// CSV destination; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    /// Patient counts, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1..,
          default_values_t = [1u64, 1_000, 10_000, 50_000, 100_000, 200_000, 300_000])]
    pub patients: Vec<u64>,
    /// Chain names (bitcoin, ethereum, iota, cardano) or name:tps pairs
    #[arg(long, value_delimiter = ',', num_args = 1..,
          default_values_t = ["bitcoin".to_string(), "ethereum".into(), "iota".into(), "cardano".into()])]
    pub chains: Vec<String>,
    /// Transactions per patient per day
    #[arg(long, default_value_t = 110.0)]
    pub rate_per_patient: f64,
    #[arg(long, default_value_t = 257.0)]
    pub cardano_tps: f64,
    /// CSV destination in addition to the printed table
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Ed25519,
    Stub,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Ed25519 => SchemeKind::Ed25519,
            SchemeArg::Stub => SchemeKind::Stub,
        }
    }
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 3)]
    pub hospitals: usize,
    #[arg(long, default_value_t = 10)]
    pub patients: usize,
    #[arg(long, default_value_t = 1000)]
    pub txs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Transactions submitted between sealing slots
    #[arg(long, default_value_t = 50)]
    pub txs_per_slot: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Ed25519)]
    pub scheme: SchemeArg,
    /// Directory to persist the network into
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// A `.chain` file or a network directory
    pub path: PathBuf,
}

const SUBCOMMANDS: [&str; 4] = ["sweep", "capacity", "demo", "verify"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn scalar(key: &str, value: &toml::Value) -> Result<String, CliError> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| scalar(key, v))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        _ => Err(CliError::usage(format!(
            "config key `{key}` has an unsupported value"
        ))),
    }
}

fn accepts(subcommand: &str, flag: &str) -> bool {
    Cli::command()
        .find_subcommand(subcommand)
        .is_some_and(|c| c.get_arguments().any(|a| a.get_long() == Some(flag)))
}

fn config_flags(path: &Path, subcommand: &str) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    let mut flags = Vec::new();
    let mut push = |key: &str, value: &toml::Value| -> Result<(), CliError> {
        if key == "config" {
            return Err(CliError::usage("config files cannot nest"));
        }
        flags.push(OsString::from(format!(
            "--{}={}",
            key.replace('_', "-"),
            scalar(key, value)?
        )));
        Ok(())
    };
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) if key == subcommand => {
                for (k, v) in section {
                    push(k, v)?;
                }
            }
            toml::Value::Table(_) if SUBCOMMANDS.contains(&key.as_str()) => {}
            toml::Value::Table(_) => {
                return Err(CliError::usage(format!("unknown config section `{key}`")))
            }
            v => {
                let flag = key.replace('_', "-");
                if accepts(subcommand, &flag) {
                    push(key, v)?;
                } else if !SUBCOMMANDS.iter().any(|s| accepts(s, &flag)) {
                    return Err(CliError::usage(format!("unknown config key `{key}`")));
                }
            }
        }
    }
    Ok(flags)
}

/// Splices config-file flags in right after the subcommand name.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(pos) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let sub = args[pos].to_string_lossy().into_owned();
    let flags = config_flags(&path, &sub)?;
    let mut merged = args[..=pos].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_values_precede_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 9\n[sweep]\nlambda_day = 10000000\nmu = [7, 25]\n[demo]\ntxs = 5\n",
        )
        .unwrap();
        let args = os(&[
            "healthchain",
            "--config",
            path.to_str().unwrap(),
            "sweep",
            "--seed",
            "3",
        ]);
        let merged = merge_config(args).unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        match cli.command {
            Command::Sweep(s) => {
                assert_eq!(s.seed, 3);
                assert_eq!(s.lambda_day, 10_000_000.0);
                assert_eq!(s.mu, vec![7.0, 25.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_section_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[plot]\nx = 1\n").unwrap();
        let args = os(&["healthchain", "sweep", "--config", path.to_str().unwrap()]);
        assert!(matches!(merge_config(args), Err(CliError::Usage(_))));
    }

    #[test]
    fn top_level_keys_apply_where_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 9\nout = \"x.csv\"\n").unwrap();
        let args = os(&[
            "healthchain",
            "--config",
            path.to_str().unwrap(),
            "capacity",
        ]);
        let merged = merge_config(args).unwrap();
        assert!(merged.iter().all(|a| a != "--seed=9"));
        assert!(merged.iter().any(|a| a == "--out=x.csv"));
        std::fs::write(&path, "sede = 9\n").unwrap();
        let args = os(&[
            "healthchain",
            "--config",
            path.to_str().unwrap(),
            "capacity",
        ]);
        assert!(matches!(merge_config(args), Err(CliError::Usage(_))));
    }

    #[test]
    fn missing_config_is_io_error() {
        let args = os(&["healthchain", "--config=/nonexistent/x.toml", "demo"]);
        assert!(matches!(merge_config(args), Err(CliError::Io { .. })));
    }

    #[test]
    fn no_config_passes_through() {
        let args = os(&["healthchain", "verify", "x"]);
        assert_eq!(merge_config(args.clone()).unwrap(), args);
    }
}
