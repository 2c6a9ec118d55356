//! Flat key=value configuration files with command-line override semantics.
//!
//! A config file supplies defaults for any long flag of the invoked
//! subcommand; a flag given on the command line wins. Lines are
//! `key = value` (spaces optional), `#` starts a comment.

use anyhow::{bail, Context};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut entries = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("config file {}", path.display()))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    bail!(
                        "config file {} line {}: expected key=value, got '{raw}'",
                        path.display(),
                        lineno + 1
                    );
                };
                entries.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Config { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Flag value if given, else config entry, else `default`. Errors name
    /// the field.
    pub fn resolve<T>(&self, field: &str, flag: Option<T>, default: Option<T>) -> anyhow::Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(raw) = self.get(field) {
            return raw
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("invalid value for field '{field}': {e}"));
        }
        default.ok_or_else(|| anyhow::anyhow!("missing required field '{field}'"))
    }
}

/// Seed list grammar: a count `n` (meaning 0..n) or an explicit `s1,s2,...`.
pub fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    if let Ok(n) = s.parse::<u64>() {
        if n == 0 {
            bail!("invalid value for field 'seeds': need at least one seed");
        }
        return Ok((0..n).collect());
    }
    let list: Result<Vec<u64>, _> = s.split(',').map(|t| t.trim().parse::<u64>()).collect();
    match list {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => bail!("invalid value for field 'seeds': expected a count or a comma list"),
    }
}

/// Accepts `golden` as the inverse golden ratio, otherwise parses a float.
pub fn parse_theta(s: &str) -> anyhow::Result<f64> {
    if s == "golden" {
        return Ok((5f64.sqrt() - 1.0) / 2.0);
    }
    s.parse::<f64>()
        .map_err(|_| anyhow::anyhow!("invalid value for field 'theta': '{s}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_grammar() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5,9").unwrap(), vec![5, 9]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("a,b").is_err());
    }

    #[test]
    fn config_resolution_order() {
        let dir = std::env::temp_dir().join("tracelab-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.conf");
        std::fs::write(&path, "p = 101  # prime\nfamily=legendre\n").unwrap();
        let cfg = Config::load(Some(&path)).unwrap();
        // flag wins over file
        assert_eq!(cfg.resolve("p", Some(7u64), None).unwrap(), 7);
        // file fills missing flag
        assert_eq!(cfg.resolve::<u64>("p", None, None).unwrap(), 101);
        // default as last resort; absent everywhere is an error naming the field
        assert_eq!(cfg.resolve("k", None, Some(4u64)).unwrap(), 4);
        let err = cfg.resolve::<u64>("k", None, None).unwrap_err();
        assert!(err.to_string().contains("'k'"));
    }
}
