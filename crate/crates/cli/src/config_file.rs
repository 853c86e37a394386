//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. A
//! `preset = <name>` entry selects the base configuration; every other key is
//! a dotted scenario key applied on top of it. Relative paths in file-valued
//! keys resolve against the directory of the configuration file.

use std::fmt;
use std::path::{Path, PathBuf};

use dra_core::scenario::{apply_overrides, config_entries, preset, ScenarioConfig};

const FILE_KEYS: [&str; 2] = ["topology.file", "costs.file"];

/// A configuration problem, located at a 1-based line when one applies.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { path: None, line: Some(line), message: message.into() }
    }

    fn plain(message: impl Into<String>) -> Self {
        Self { path: None, line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.path, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{l}: {}", p.display(), self.message),
            (Some(p), None) => write!(f, "{}: {}", p.display(), self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// An entry with the line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `text` into entries. Duplicate keys are rejected.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::at(line, format!("malformed line `{content}`: expected `key = value`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::at(line, format!("malformed key `{key}`")));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("{key}: missing value")));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(ConfigError::at(line, format!("{key}: duplicate key (first set on line {})", prev.line)));
        }
        entries.push(Entry { line, key: key.to_string(), value: value.to_string() });
    }
    Ok(entries)
}

/// Builds a configuration from entries. `preset` picks the base (default
/// configuration otherwise); relative file paths are joined to `base_dir`.
pub fn config_from_entries(entries: &[Entry], base_dir: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match entries.iter().find(|e| e.key == "preset") {
        Some(e) => preset(&e.value).map_err(|err| ConfigError::at(e.line, format!("preset: {err}")))?.config,
        None => ScenarioConfig::default(),
    };
    let rest: Vec<&Entry> = entries.iter().filter(|e| e.key != "preset").collect();
    let pairs: Vec<(String, String)> = rest
        .iter()
        .map(|e| {
            let value = match base_dir {
                Some(dir) if FILE_KEYS.contains(&e.key.as_str()) && Path::new(&e.value).is_relative() => {
                    dir.join(&e.value).to_string_lossy().into_owned()
                }
                _ => e.value.clone(),
            };
            (e.key.clone(), value)
        })
        .collect();
    apply_overrides(&mut cfg, &pairs).map_err(|(idx, err)| ConfigError::at(rest[idx].line, strip_prefix(err)))?;
    cfg.validate().map_err(|err| ConfigError::plain(strip_prefix(err)))?;
    Ok(cfg)
}

fn strip_prefix(err: dra_core::Error) -> String {
    match err {
        dra_core::Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

/// Parses configuration text whose relative file paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    config_from_entries(&parse_entries(text)?, base_dir)
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let with_path = |mut e: ConfigError| {
        e.path = Some(path.to_path_buf());
        e
    };
    let text = std::fs::read_to_string(path).map_err(|e| with_path(ConfigError::plain(format!("cannot read: {e}"))))?;
    parse_config_str(&text, path.parent()).map_err(with_path)
}

/// Writes every key of `cfg`, one per line, in a form [`parse_config_str`] reads back.
pub fn serialize(cfg: &ScenarioConfig) -> String {
    config_entries(cfg).into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let e = parse_entries("# header\n\nn = 12  # trailing\n eta=0.05\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].line, e[0].key.as_str(), e[0].value.as_str()), (3, "n", "12"));
        assert_eq!((e[1].line, e[1].key.as_str(), e[1].value.as_str()), (4, "eta", "0.05"));
    }

    #[test]
    fn malformed_and_duplicate_lines_name_the_line() {
        assert_eq!(parse_entries("n = 3\nnonsense\n").unwrap_err().line, Some(2));
        assert_eq!(parse_entries("n = 3\nb =\n").unwrap_err().line, Some(2));
        let dup = parse_entries("n = 3\n\nn = 4\n").unwrap_err();
        assert_eq!(dup.line, Some(3));
        assert!(dup.message.contains("line 1"));
    }

    #[test]
    fn preset_entry_selects_the_base() {
        let cfg = parse_config_str("preset = fig_delay\nseed = 4\n", None).unwrap();
        let mut expect = preset("fig_delay").unwrap().config;
        expect.seed = 4;
        assert_eq!(cfg, expect);
        assert_eq!(parse_config_str("\npreset = nope\n", None).unwrap_err().line, Some(2));
    }

    #[test]
    fn errors_carry_the_line_of_the_offending_key() {
        let err = parse_config_str("n = 10\n\nadversity.p_fail = 1.5\n", None).unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("adversity.p_fail"), "{err}");
        let err = parse_config_str("n = 10\ntopology.pp = 0.2\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("unknown key"), "{err}");
    }
}
