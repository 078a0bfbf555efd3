//! Flat `key = value` config files mirroring the CLI flags.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Parse `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty key", i + 1)));
        }
        out.push((key.replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Flag tokens for config pairs: `true` switches a flag on, `false` leaves it off.
pub fn config_args(pairs: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}

fn config_flag(argv: &[String]) -> Result<Option<(usize, usize, String)>> {
    for (i, a) in argv.iter().enumerate() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            let path = argv.get(i + 1).ok_or_else(|| Error::Parse("--config needs a path".into()))?;
            return Ok(Some((i, 2, path.clone())));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some((i, 1, p.to_string())));
        }
    }
    Ok(None)
}

/// Expand `--config FILE` into flags placed right after the subcommand, so
/// that flags given on the command line come later and win.
pub fn inject_config(argv: Vec<String>) -> Result<Vec<String>> {
    let Some((at, len, path)) = config_flag(&argv)? else { return Ok(argv) };
    let text = fs::read_to_string(Path::new(&path)).map_err(|e| Error::io(&path, e))?;
    let injected = config_args(&parse_config(&text)?);
    let mut rest = argv;
    rest.drain(at..at + len);
    // argv[0] is the program, argv[1] the subcommand
    let split = rest.len().min(2);
    let mut out: Vec<String> = rest[..split].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[split..]);
    Ok(out)
}
