//! Line-based `key = value` configuration, located via `EKGW_CONFIG`.
//! Precedence: command-line flag, then config file, then built-in default.

use std::collections::BTreeMap;
use std::path::Path;

pub const ENV_VAR: &str = "EKGW_CONFIG";

const KEYS: [&str; 9] = ["tau", "seed", "profile", "nodes", "samples", "grid", "timings", "w", "hat"];

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Reads the file named by `EKGW_CONFIG`, or returns an empty config.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var_os(ENV_VAR) {
            Some(p) => Self::load(Path::new(&p)),
            None => Ok(Config::default()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// Blank lines and `#` comments are ignored; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key = value", no + 1))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(format!("config line {}: unknown key '{k}'", no + 1));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parses `key` with `f` when present.
    pub fn parsed<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, String> {
        self.get(key).map(|v| f(v).map_err(|e| format!("config key '{key}': {e}"))).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let c = Config::parse("# defaults\ntau = 0.1+1.05i\nseed=7  # trailing\n\n").unwrap();
        assert_eq!(c.get("tau"), Some("0.1+1.05i"));
        assert_eq!(c.get("seed"), Some("7"));
        assert!(Config::parse("bogus = 1").is_err());
        assert!(Config::parse("tau").is_err());
    }
}
