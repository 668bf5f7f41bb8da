//! `--config` support.
//!
//! The file is a flat JSON or TOML table keyed by long flag names (dashes or
//! underscores), optionally with one sub-table per subcommand. Its entries
//! are spliced into the argument list right after the subcommand, ahead of
//! the user's own flags, so that anything on the command line overrides the
//! file. Flags backed by an environment variable that is set are skipped, so
//! the precedence is: command line, environment, file, built-in default.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, CommandFactory};
use serde_json::{Map, Value};

use crate::cli::Cli;
use crate::error::CliError;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter().skip(1);
    while let Some(arg) = iter.next() {
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            return iter.next().cloned();
        }
        if let Some(path) = arg.to_str().and_then(|a| a.strip_prefix("--config=")) {
            return Some(path.into());
        }
    }
    None
}

fn load(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: Value = if is_toml {
        let parsed: toml::Value = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(parsed).map_err(|e| bad(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(bad("expected a table of flag = value entries".into())),
    }
}

fn scalar(key: &str, value: &Value) -> Result<String, CliError> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(CliError::Config(format!("{key}: expected a string, number or boolean"))),
    }
}

/// Returns `args` with the config file's entries spliced in.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let mut command = Cli::command();
    command.build();
    let subcommands: Vec<String> = command
        .get_subcommands()
        .map(|s| s.get_name().to_owned())
        .collect();
    let Some(position) = args
        .iter()
        .position(|a| a.to_str().is_some_and(|a| subcommands.iter().any(|s| s == a)))
    else {
        // no subcommand: let clap report it
        return Ok(args);
    };
    let name = args[position].to_str().unwrap_or_default().to_owned();
    let sub = command.find_subcommand(&name).expect("matched above");

    let file = load(Path::new(&path))?;
    let mut entries: Vec<(String, Value)> = Vec::new();
    let mut section: Vec<(String, Value)> = Vec::new();
    for (key, value) in file {
        match value {
            Value::Object(inner) if subcommands.contains(&key) => {
                if key == name {
                    section.extend(inner);
                }
            }
            Value::Object(_) => {
                return Err(CliError::Config(format!("{key}: unexpected table")));
            }
            other => entries.push((key, other)),
        }
    }
    // subcommand sections override top-level keys by coming later
    entries.extend(section);

    let known_anywhere = |long: &str| {
        command
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(long)))
    };

    let mut injected = Vec::new();
    for (key, value) in entries {
        let long = key.replace('_', "-");
        if long == "config" {
            return Err(CliError::Config("config files cannot include other config files".into()));
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(long.as_str())) else {
            if sub.get_arguments().any(|a| a.get_id() == long.as_str() && a.is_positional()) {
                return Err(CliError::Config(format!(
                    "{key}: positional arguments must be given on the command line"
                )));
            }
            if known_anywhere(&long) {
                continue;
            }
            return Err(CliError::Config(format!("unknown setting {key:?}")));
        };
        if arg.get_env().is_some_and(|var| std::env::var_os(var).is_some()) {
            continue;
        }
        let flag = format!("--{long}");
        match (arg.get_action(), &value) {
            (_, Value::Null) => {}
            (ArgAction::SetTrue, Value::Bool(true)) => injected.push(flag),
            (ArgAction::SetTrue, Value::Bool(false)) => {}
            (ArgAction::SetTrue, _) => {
                return Err(CliError::Config(format!("{key}: expected true or false")));
            }
            (ArgAction::Count, Value::Number(n)) => {
                let times = n.as_u64().ok_or_else(|| CliError::Config(format!("{key}: expected a count")))?;
                injected.extend((0..times).map(|_| flag.clone()));
            }
            (_, Value::Array(items)) => {
                for item in items {
                    injected.push(format!("{flag}={}", scalar(&key, item)?));
                }
            }
            (_, other) => injected.push(format!("{flag}={}", scalar(&key, other)?)),
        }
    }

    let mut out = args;
    out.splice(position + 1..position + 1, injected.into_iter().map(OsString::from));
    Ok(out)
}
