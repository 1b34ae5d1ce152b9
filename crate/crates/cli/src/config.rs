//! Plain-text run configuration.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment (also after a value)
//! key = value          # applies to every command
//! [sim]                # following keys apply to `sim` only
//! reps = 10
//! ```
//!
//! Keys are the long flag names with `-` or `_`; values use the flag syntax,
//! including grids (`c = 0:2:0.1`). Unknown keys, malformed values and a key
//! repeated within one section are errors carrying the line number.

use std::collections::HashMap;
use std::path::Path;

use crate::error::CliError;
use crate::spec::{canonical_key, unknown_key, Command, RunSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub path: String,
    pub line: usize,
    pub section: Option<String>,
    /// Canonical key.
    pub key: String,
    pub value: String,
}

pub fn parse_config(text: &str, path: &str) -> Result<Vec<ConfigEntry>, CliError> {
    let at = |line: usize, e: CliError| CliError::AtLine {
        path: path.to_string(),
        line,
        source: Box::new(e),
    };
    let mut out = Vec::new();
    let mut seen: HashMap<(Option<String>, String), usize> = HashMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| at(line, CliError::Syntax(format!("unterminated section header `{body}`"))))?
                .trim();
            if name.parse::<Command>().is_err() {
                let suggestion = Command::ALL
                    .iter()
                    .map(|c| (strsim::levenshtein(name, c.name()), c.name()))
                    .filter(|(d, _)| *d <= 2)
                    .min()
                    .map(|(_, c)| c.to_string());
                return Err(at(
                    line,
                    CliError::UnknownSection {
                        section: name.to_string(),
                        suggestion,
                    },
                ));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| at(line, CliError::Syntax(format!("expected `key = value`, found `{body}`"))))?;
        let key = canonical_key(k).ok_or_else(|| at(line, unknown_key(k.trim())))?;
        let value = v.trim();
        if value.is_empty() {
            return Err(at(line, CliError::Syntax(format!("no value for `{}`", k.trim()))));
        }
        if let Some(first) = seen.insert((section.clone(), key.clone()), line) {
            return Err(at(line, CliError::Duplicate { key, first }));
        }
        out.push(ConfigEntry {
            path: path.to_string(),
            line,
            section: section.clone(),
            key,
            value: value.to_string(),
        });
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<ConfigEntry>, CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

/// The spec described by a config file alone, for `command`.
pub fn load_config(path: &Path, command: Command) -> Result<RunSpec, CliError> {
    RunSpec::build(command, &read_config(path)?, &[])
}
