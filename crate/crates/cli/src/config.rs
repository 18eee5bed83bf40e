//! `--config FILE` support: `key = value` lines become `--key value` flags.
//!
//! Config flags are inserted right after the subcommand, ahead of the flags
//! given on the command line, and every argument overrides itself, so the
//! command line wins.

use std::ffi::OsString;
use std::path::Path;

use clap::Command;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("config key `{key}` is not an option of this command")]
    UnknownKey { key: String },
    #[error("config key `{key}`: expected true or false, got `{value}`")]
    NotABool { key: String, value: String },
    #[error("--config needs a file name")]
    MissingPath,
}

/// Remove `--config FILE` / `--config=FILE` from `args`, returning the path.
pub fn take_config_path(args: &mut Vec<OsString>) -> Result<Option<OsString>, ConfigError> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--" {
            break;
        }
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err(ConfigError::MissingPath);
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(path)
}

/// Parse `key = value` pairs; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                line: n + 1,
                text: line.to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Malformed {
                line: n + 1,
                text: line.to_string(),
            });
        }
        pairs.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(pairs)
}

/// Number of leading subcommand names in `args` (after the program name).
fn subcommand_depth(cmd: &Command, args: &[OsString]) -> usize {
    let mut cur = cmd;
    let mut depth = 0;
    while let Some(name) = args.get(1 + depth).and_then(|a| a.to_str()) {
        match cur.find_subcommand(name) {
            Some(sub) => {
                cur = sub;
                depth += 1;
            }
            None => break,
        }
    }
    depth
}

/// Insert the flags from `config_file` after the subcommand path in `args`.
pub fn apply(
    cmd: &Command,
    args: &mut Vec<OsString>,
    config_file: &Path,
) -> Result<(), ConfigError> {
    let text = std::fs::read_to_string(config_file).map_err(|source| ConfigError::Read {
        path: config_file.display().to_string(),
        source,
    })?;
    let pairs = parse(&text)?;
    let depth = subcommand_depth(cmd, args);
    let mut leaf = cmd;
    for a in &args[1..1 + depth] {
        leaf = leaf
            .find_subcommand(a.to_str().expect("matched subcommand names are UTF-8"))
            .expect("subcommand found above");
    }
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in pairs {
        let arg = leaf
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| ConfigError::UnknownKey { key: key.clone() })?;
        if arg.get_action().takes_values() {
            extra.push(format!("--{key}").into());
            extra.extend(value.split_whitespace().map(OsString::from));
        } else {
            match value.as_str() {
                "true" => extra.push(format!("--{key}").into()),
                "false" => {}
                _ => return Err(ConfigError::NotABool { key, value }),
            }
        }
    }
    let at = 1 + depth;
    args.splice(at..at, extra);
    Ok(())
}
