//! Flat `key = value` configuration text. `#` starts a comment; blank lines are ignored.

use std::str::FromStr;

use crate::error::{GduError, Result};

/// One `key = value` entry with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>> {
    let mut out: Vec<KvEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            GduError::parse(line, format!("expected `key = value`, got `{content}`"))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(GduError::parse(line, "empty key"));
        }
        if out.iter().any(|e| e.key == key) {
            return Err(GduError::parse(line, format!("duplicate key `{key}`")));
        }
        out.push(KvEntry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

impl KvEntry {
    pub fn parse<V: FromStr>(&self) -> Result<V>
    where
        V::Err: std::fmt::Display,
    {
        self.value
            .parse()
            .map_err(|e| GduError::parse(self.line, format!("bad value for `{}`: {e}", self.key)))
    }

    pub fn unknown(&self) -> GduError {
        GduError::parse(self.line, format!("unknown key `{}`", self.key))
    }
}
