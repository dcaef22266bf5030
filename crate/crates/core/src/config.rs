//! Plain-text `key = value` files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Keys are case-sensitive; a key may appear at most once.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    pub entries: Vec<Entry>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line,
                    message: "empty key".into(),
                });
            }
            if entries.iter().any(|e| e.key == key) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

impl Entry {
    pub fn as_f64(&self) -> Result<f64> {
        self.value.parse::<f64>().map_err(|_| Error::Config {
            line: self.line,
            message: format!("`{}` is not a number for key `{}`", self.value, self.key),
        })
    }

    pub fn as_usize(&self) -> Result<usize> {
        self.value.parse::<usize>().map_err(|_| Error::Config {
            line: self.line,
            message: format!(
                "`{}` is not a non-negative integer for key `{}`",
                self.value, self.key
            ),
        })
    }

    pub fn as_f64_list(&self) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Config {
                    line: self.line,
                    message: format!("`{s}` is not a number in list `{}`", self.key),
                })
            })
            .collect()
    }
}
