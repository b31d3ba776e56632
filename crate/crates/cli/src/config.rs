//! Config files and the thread-count override.
//!
//! A config file holds `key=value` lines whose keys are flag names
//! (`q_max` and `q-max` both mean `--q-max`); `command=` names the
//! subcommand. Keys also given on the command line are dropped from the
//! file, so the command line wins.

use std::fmt;

const COMMANDS: [&str; 8] = ["bands", "butterfly", "ids", "lyapunov", "pq", "x-set", "orbit", "verify"];
const GLOBALS_WITH_VALUE: [&str; 5] = ["--config", "--threads", "--format", "--out", "--seed"];

#[derive(Debug, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parsed file: optional subcommand and flags in file order.
pub fn parse(text: &str) -> Result<(Option<String>, Vec<String>), ConfigError> {
    let mut command = None;
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected key=value", n + 1)))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if k.is_empty() {
            return Err(ConfigError(format!("line {}: empty key", n + 1)));
        }
        match k.as_str() {
            "command" => command = Some(v.to_string()),
            "config" => return Err(ConfigError("config files cannot include other config files".into())),
            _ if v == "true" => flags.push(format!("--{k}")),
            _ if v == "false" => {}
            _ => flags.push(format!("--{k}={v}")),
        }
    }
    Ok((command, flags))
}

/// Index of the subcommand in `args` (after the program name), if any.
fn command_position(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].as_str();
        if COMMANDS.contains(&a) {
            return Some(i);
        }
        i += if GLOBALS_WITH_VALUE.contains(&a) { 2 } else { 1 };
    }
    None
}

/// Removes `--config FILE` from `args` and splices the file's flags in.
pub fn expand(args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| ConfigError("--config needs a file".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| ConfigError(format!("{path}: {e}")))?;
    Ok(splice(rest, parse(&text)?))
}

fn flag_name(a: &str) -> Option<&str> {
    a.strip_prefix("--").map(|f| f.split_once('=').map_or(f, |(k, _)| k))
}

fn splice(mut args: Vec<String>, (command, flags): (Option<String>, Vec<String>)) -> Vec<String> {
    let given: Vec<String> = args.iter().filter_map(|a| flag_name(a)).map(str::to_string).collect();
    let flags: Vec<String> = flags.into_iter().filter(|f| !flag_name(f).is_some_and(|k| given.iter().any(|g| g == k))).collect();
    match command_position(&args) {
        Some(i) => {
            args.splice(i + 1..i + 1, flags);
        }
        None => {
            args.extend(command);
            args.extend(flags);
        }
    }
    args
}

/// `AMO_THREADS` when it parses, else the flag; 0 means all cores.
pub fn thread_count(flag: usize, env: Option<&str>) -> usize {
    env.and_then(|v| v.trim().parse().ok()).unwrap_or(flag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_flags_and_command() {
        let (c, f) = parse("# bands\ncommand = bands\nlambda=0.5\nq_max = 3\nthouless=true\nintervals=false\n\n").unwrap();
        assert_eq!(c.as_deref(), Some("bands"));
        assert_eq!(f, v(&["--lambda=0.5", "--q-max=3", "--thouless"]));
        assert!(parse("lambda 0.5").is_err());
        assert!(parse("=3").is_err());
        assert!(parse("config=x").is_err());
    }

    #[test]
    fn splices_after_the_command() {
        let args = v(&["amo", "--threads", "2", "bands", "--q", "5"]);
        let out = splice(args, (None, v(&["--lambda=0.5", "--q=3"])));
        assert_eq!(out, v(&["amo", "--threads", "2", "bands", "--lambda=0.5", "--q", "5"]));
        let out = splice(v(&["amo", "--format", "json"]), (Some("pq".into()), v(&["--q=8"])));
        assert_eq!(out, v(&["amo", "--format", "json", "pq", "--q=8"]));
        // a global value equal to a command name is not the command
        assert_eq!(command_position(&v(&["amo", "--out", "bands", "pq"])), Some(3));
    }

    #[test]
    fn environment_overrides_flag() {
        assert_eq!(thread_count(3, None), 3);
        assert_eq!(thread_count(3, Some("1")), 1);
        assert_eq!(thread_count(3, Some("x")), 3);
    }
}
