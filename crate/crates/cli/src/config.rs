use std::collections::HashMap;
use std::path::Path;

use crate::CliError;

/// Plain-text `key=value` run configuration; one pair per line, `#` comments.
/// Command-line flags override file values, so a config file captures a run
/// and the flags tweak it.
pub struct FileConfig {
    values: HashMap<String, String>,
    consumed: std::cell::RefCell<Vec<String>>,
}

impl FileConfig {
    pub fn empty() -> FileConfig {
        FileConfig {
            values: HashMap::new(),
            consumed: std::cell::RefCell::new(Vec::new()),
        }
    }

    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("reading config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!(
                    "config {} line {}: expected key=value, got {line:?}",
                    path.display(),
                    idx + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig {
            values,
            consumed: std::cell::RefCell::new(Vec::new()),
        })
    }

    /// Fill `slot` from the config when the flag did not set it.
    pub fn fill<T: std::str::FromStr>(
        &self,
        slot: &mut Option<T>,
        key: &str,
    ) -> Result<(), CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.consumed.borrow_mut().push(key.to_string());
        if slot.is_none() {
            if let Some(raw) = self.values.get(key) {
                let parsed = raw
                    .parse::<T>()
                    .map_err(|e| CliError::config(format!("config key {key}={raw}: {e}")))?;
                *slot = Some(parsed);
            }
        }
        Ok(())
    }

    /// Append config values to a repeatable flag (flag occurrences keep
    /// priority by coming first).
    pub fn extend(&self, slot: &mut Vec<String>, key: &str) {
        self.consumed.borrow_mut().push(key.to_string());
        if let Some(raw) = self.values.get(key) {
            slot.extend(raw.split_whitespace().map(str::to_string));
        }
    }

    /// Reject keys no `fill`/`extend` call asked about — typos should not
    /// silently configure nothing.
    pub fn finish(&self) -> Result<(), CliError> {
        let consumed = self.consumed.borrow();
        for key in self.values.keys() {
            if !consumed.iter().any(|c| c == key) {
                return Err(CliError::config(format!("unknown config key: {key}")));
            }
        }
        Ok(())
    }
}

/// Parse a comma-separated list of floats (grid overrides).
pub fn parse_grid(raw: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let trimmed = part.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed
            .parse()
            .map_err(|e| CliError::config(format!("{flag}: bad number {trimmed:?}: {e}")))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::config(format!("{flag}: empty grid")));
    }
    Ok(out)
}

pub fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}
