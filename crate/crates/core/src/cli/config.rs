//! Flat `key = value` run-config files and the resolved-config echo.
//!
//! A config file supplies defaults for the long flags of one subcommand.
//! Keys are flag names with either `-` or `_`; lists are whitespace
//! separated; switches take `true` / `false`. The file's arguments are placed
//! before the ones typed on the command line, and every subcommand lets a
//! later occurrence of a flag override an earlier one, so flags win.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, ArgMatches, Command};

use crate::error::{Error, Result};

/// Parses a config file into `(key, values)` pairs in file order.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected `key = value`, got {line:?}",
                path.display(),
                i + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("{}:{}: empty key", path.display(), i + 1)));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!(
                "{}:{}: key {key:?} given twice",
                path.display(),
                i + 1
            )));
        }
        let value = value.trim().trim_matches('"');
        out.push((key, value.split_whitespace().map(str::to_string).collect()));
    }
    Ok(out)
}

/// Turns config entries into command-line arguments for `sub`, rejecting
/// keys that are not flags of that subcommand (or global flags).
pub fn config_to_args(
    entries: &[(String, Vec<String>)],
    root: &Command,
    sub: &Command,
    path: &Path,
) -> Result<Vec<OsString>> {
    let mut args = Vec::new();
    for (key, values) in entries {
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments().filter(|a| a.is_global_set()))
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "config")
            .ok_or_else(|| {
                Error::Config(format!(
                    "{}: unknown key {key:?} for `{}`",
                    path.display(),
                    sub.get_name()
                ))
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match values.as_slice() {
                [v] if v == "true" => args.push(OsString::from(format!("--{key}"))),
                [v] if v == "false" => {}
                _ => {
                    return Err(Error::Config(format!(
                        "{}: key {key:?} takes true or false",
                        path.display()
                    )))
                }
            }
        } else {
            if values.is_empty() {
                return Err(Error::Config(format!("{}: key {key:?} has no value", path.display())));
            }
            args.push(OsString::from(format!("--{key}")));
            args.extend(values.iter().map(OsString::from));
        }
    }
    Ok(args)
}

/// Every resolved option of a subcommand (defaults included) as config-file
/// text that can be fed back through `--config`.
pub fn echo(command: &str, matches: &ArgMatches, sub: &Command) -> String {
    let mut out = format!(
        "# {} {}\n# command: {command}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    for arg in sub.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if id == "config" || id == "help" || id == "version" {
            continue;
        }
        let Ok(Some(raw)) = matches.try_get_raw(id) else { continue };
        let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        out.push_str(&format!("{long} = {}\n", values.join(" ")));
    }
    out
}
