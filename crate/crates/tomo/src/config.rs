//! TOML config files whose keys are the command-line flag names.
//!
//! Top-level keys apply to every subcommand that has a flag of that name;
//! a table named after a subcommand (`[train]`) applies to that subcommand
//! only. Values from the file are inserted ahead of the real arguments, so
//! flags given on the command line win.
//!
//! ```toml
//! seed = 7
//!
//! [train]
//! n-aux = 2
//! epochs = 200
//! ```

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::cli::Cli;
use crate::error::{read_file, Result, TomoError};

fn flag_names(cmd: &clap::Command) -> BTreeSet<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

fn value_text(key: &str, v: &toml::Value) -> Result<Option<String>> {
    Ok(Some(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(true) => return Ok(None),
        toml::Value::Boolean(false) => return Ok(Some(String::new())),
        toml::Value::Array(items) => items
            .iter()
            .map(|x| match value_text(key, x)? {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(TomoError::Usage(format!(
                    "config key '{key}': unsupported list element"
                ))),
            })
            .collect::<Result<Vec<_>>>()?
            .join(","),
        _ => return Err(TomoError::Usage(format!("config key '{key}': unsupported value type"))),
    }))
}

/// Flag arguments contributed by `table` for `subcommand`.
pub fn config_args(table: &toml::Table, subcommand: &str) -> Result<Vec<OsString>> {
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(subcommand) else {
        return Ok(Vec::new());
    };
    let own = flag_names(sub);
    let any: BTreeSet<String> = root.get_subcommands().flat_map(flag_names).collect();
    let sub_names: BTreeSet<&str> = root.get_subcommands().map(|c| c.get_name()).collect();

    let mut out = Vec::new();
    let mut push = |key: &str, v: &toml::Value, strict: bool| -> Result<()> {
        if key == "config" {
            return Err(TomoError::Usage(
                "config files cannot include other config files".into(),
            ));
        }
        if !own.contains(key) {
            if strict || !any.contains(key) {
                return Err(TomoError::Usage(format!(
                    "unknown config key '{key}' for '{subcommand}'"
                )));
            }
            return Ok(());
        }
        match value_text(key, v)? {
            None => out.push(OsString::from(format!("--{key}"))),
            Some(s) if s.is_empty() => {}
            Some(s) => out.push(OsString::from(format!("--{key}={s}"))),
        }
        Ok(())
    };
    for (k, v) in table {
        match v {
            toml::Value::Table(_) if sub_names.contains(k.as_str()) => {}
            toml::Value::Table(_) => return Err(TomoError::Usage(format!("unknown config section '[{k}]'"))),
            _ => push(k, v, false)?,
        }
    }
    if let Some(toml::Value::Table(section)) = table.get(subcommand) {
        for (k, v) in section {
            push(k, v, true)?;
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<toml::Table> {
    let text = read_file(path)?;
    text.parse::<toml::Table>()
        .map_err(|e| TomoError::Usage(format!("{}: {e}", path.display())))
}

/// Locates `--config PATH` / `--config=PATH` after the subcommand.
fn find_config(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(OsString::from(p));
        }
    }
    None
}

/// Rewrites `argv` so that config-file values precede the explicit flags.
pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = argv.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(argv);
    };
    let sub_at = pos + 1;
    let Some(path) = find_config(&argv[sub_at + 1..]) else {
        return Ok(argv);
    };
    let table = load_config(Path::new(&path))?;
    let sub = argv[sub_at].to_string_lossy().into_owned();
    let extra = config_args(&table, &sub)?;
    let mut out = argv[..=sub_at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub_at + 1..]);
    Ok(out)
}
