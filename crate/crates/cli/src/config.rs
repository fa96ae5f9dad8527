//! Structured-text overrides: a TOML file whose `[command]` table supplies
//! default values for that command's flags. Flags given on the command line
//! win because they are placed after the expanded ones.

use std::path::Path;

use crate::error::{CliError, CliResult};

fn value_to_arg(v: &toml::Value) -> CliResult<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(a) => a
            .iter()
            .map(value_to_arg)
            .collect::<CliResult<Vec<_>>>()?
            .join(","),
        other => {
            return Err(CliError::Usage(format!(
                "config value {other} cannot be expressed as a flag"
            )))
        }
    })
}

/// Flags for `command` from the config text, as `--key=value` tokens.
/// Boolean `true` becomes a bare switch and `false` is dropped.
pub fn config_flags(text: &str, command: &str) -> CliResult<Vec<String>> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {e}")))?;
    let Some(table) = doc.get(command) else {
        return Ok(Vec::new());
    };
    let table = table
        .as_table()
        .ok_or_else(|| CliError::Usage(format!("config: `{command}` must be a table")))?;
    let mut out = Vec::new();
    for (k, v) in table {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            _ => out.push(format!("{flag}={}", value_to_arg(v)?)),
        }
    }
    Ok(out)
}

/// Rewrites `argv` so that `--config FILE` is replaced by the flags it
/// defines for the chosen subcommand.
pub fn expand_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let mut config: Option<String> = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(
                it.next()
                    .ok_or_else(|| CliError::Usage("--config needs a file".into()))?,
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    // First non-flag token after the program name is the subcommand.
    let Some(pos) = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(rest);
    };
    let flags = config_flags(&text, &rest[pos])?;
    let mut out = rest[..=pos].to_vec();
    out.extend(flags);
    out.extend(rest[pos + 1..].iter().cloned());
    Ok(out)
}
