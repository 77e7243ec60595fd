//! Flat `key = value` configuration files. `#` starts a comment line; keys
//! are case-sensitive; a repeated key is an error. Command-line flags take
//! precedence over file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Result, ToolError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    source: PathBuf,
    values: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str, source: &Path) -> Result<KeyValues> {
        let mut values = BTreeMap::new();
        for (i, l) in text.lines().enumerate() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| ToolError::parse(source, i + 1, "expected key = value"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ToolError::parse(source, i + 1, "empty key"));
            }
            if values
                .insert(k.to_string(), (i + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(ToolError::parse(
                    source,
                    i + 1,
                    format!("duplicate key '{k}'"),
                ));
            }
        }
        Ok(KeyValues {
            source: source.to_path_buf(),
            values,
        })
    }

    pub fn load(path: &Path) -> Result<KeyValues> {
        let text = std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
        KeyValues::parse(&text, path)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| {
                ToolError::parse(
                    &self.source,
                    *line,
                    format!("invalid value '{v}' for '{key}'"),
                )
            }),
        }
    }

    /// `flag`, else the file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Keys not in `known`, so typos are reported instead of ignored.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.values
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .cloned()
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let kv = KeyValues::parse("# c\ndim = 50\n\nmode=shuffled\n", Path::new("x.conf")).unwrap();
        assert_eq!(kv.get::<usize>("dim").unwrap(), Some(50));
        assert_eq!(kv.get_str("mode"), Some("shuffled"));
        assert_eq!(kv.pick(Some(10usize), "dim", 1).unwrap(), 10);
        assert_eq!(kv.pick(None, "dim", 1usize).unwrap(), 50);
        assert_eq!(kv.pick(None, "runs", 2usize).unwrap(), 2);
        assert_eq!(kv.unknown_keys(&["dim"]), ["mode"]);
    }

    #[test]
    fn errors_name_the_line() {
        let e = KeyValues::parse("a = 1\nb\n", Path::new("x.conf")).unwrap_err();
        assert!(matches!(e, ToolError::Parse { line: 2, .. }));
        let e = KeyValues::parse("a = 1\na = 2\n", Path::new("x.conf")).unwrap_err();
        assert!(matches!(e, ToolError::Parse { line: 2, .. }));
        let kv = KeyValues::parse("dim = x\n", Path::new("x.conf")).unwrap();
        assert!(matches!(
            kv.get::<usize>("dim").unwrap_err(),
            ToolError::Parse { line: 1, .. }
        ));
    }
}
