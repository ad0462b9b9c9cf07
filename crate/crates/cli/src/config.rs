//! Flat `key = value` config files, merged into the argument list so that
//! clap validates them exactly like flags. Keys are long flag names.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

/// Parses a config file into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got {line:?}", no + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", no + 1);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Rewrites `args` so that settings from a `--config` file come right after
/// the subcommand, ahead of the explicit flags (which therefore win).
pub fn expand(cmd: &Command, args: Vec<String>) -> Result<Vec<String>> {
    let Some(sub_pos) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let Some(sub) = cmd.find_subcommand(&args[sub_pos]) else {
        return Ok(args);
    };
    let mut path = None;
    let mut rest = Vec::new();
    let mut iter = args[sub_pos + 1..].iter();
    while let Some(a) = iter.next() {
        if a == "--config" {
            path = Some(iter.next().context("--config needs a file path")?.clone());
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let mut injected = Vec::new();
    let mut unknown = Vec::new();
    for (key, value) in parse(&text)? {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            unknown.push(key);
            continue;
        };
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => bail!("config key {key}: expected true or false, got {other:?}"),
            },
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value);
            }
        }
    }
    if !unknown.is_empty() {
        bail!("unknown config keys for {}: {}", sub.get_name(), unknown.join(", "));
    }
    let mut out = args[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs() {
        let pairs = parse("# sweep\nlambda = 0.7\n\nmax_epochs=3\n").unwrap();
        assert_eq!(
            pairs,
            vec![("lambda".into(), "0.7".into()), ("max-epochs".into(), "3".into())]
        );
        assert!(parse("novalue\n").is_err());
    }
}
