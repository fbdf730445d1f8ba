//! `key=value` configuration files.
//!
//! Keys are the long flag names of the subcommand, with `_` accepted for
//! `-`. The file's entries are spliced in front of the command-line flags,
//! and the parser keeps the last occurrence of a flag, so flags given on the
//! command line win.

use std::ffi::OsString;
use std::path::Path;

use crate::BenchError;

/// Parses a config file into `--key value` argument pairs.
pub fn parse_config(text: &str) -> Result<Vec<OsString>, BenchError> {
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Parse(format!("config line {}: expected key=value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(BenchError::Parse(format!("config line {}: invalid key {key:?}", n + 1)));
        }
        args.push(OsString::from(format!("--{key}")));
        args.push(OsString::from(value.trim()));
    }
    Ok(args)
}

/// Removes `--config PATH` from `args` and splices the file's entries in
/// right after the subcommand name.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, BenchError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        match a.to_str() {
            Some("--config") => {
                let p = iter.next().ok_or_else(|| BenchError::InvalidConfig("--config needs a path".into()))?;
                path = Some(p);
            }
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path))?;
    let extra = parse_config(&text)?;
    let at = rest.len().min(2);
    rest.splice(at..at, extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let args = parse_config("# sweep\nglobal = 8x8x8x16\nmax_iter=50  # short\n\n").unwrap();
        assert_eq!(args, os(&["--global", "8x8x8x16", "--max-iter", "50"]));
        assert!(parse_config("global 8x8").is_err());
    }

    #[test]
    fn file_entries_precede_flags() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), "seed=3\nkappa=0.1\n").unwrap();
        let path = file.path().to_str().unwrap();
        let out = expand_config(os(&["bench", "run", "--config", path, "--seed", "9"])).unwrap();
        assert_eq!(out, os(&["bench", "run", "--seed", "3", "--kappa", "0.1", "--seed", "9"]));
    }
}
