//! Flat `key = value` text used by configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed entries, each remembering its source line.
#[derive(Debug, Default, Clone)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    /// Blank lines and lines starting with `#` are ignored. Keys may appear
    /// once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected `key = value`".into(),
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: n + 1,
                    message: "empty key".into(),
                });
            }
            if entries.insert(key.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|(l, _)| *l).unwrap_or(0)
    }

    /// Parses `key` into `T` when present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                message: format!("invalid value {v:?} for {key}"),
            }),
        }
    }

    /// Parses `lo, hi` or a single value (meaning `lo = hi`).
    pub fn get_range<T: FromStr + Copy>(&self, key: &str) -> Result<Option<(T, T)>> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        let bad = || Error::Parse {
            line: *line,
            message: format!("invalid range {v:?} for {key}"),
        };
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [one] => {
                let x: T = one.parse().map_err(|_| bad())?;
                Ok(Some((x, x)))
            }
            [lo, hi] => Ok(Some((
                lo.parse().map_err(|_| bad())?,
                hi.parse().map_err(|_| bad())?,
            ))),
            _ => Err(bad()),
        }
    }

    /// Errors on the first key not accepted by `known`.
    pub fn reject_unknown(&self, known: impl Fn(&str) -> bool) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known(k) {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("unknown key {k:?}"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_get() {
        let kv = KeyValues::parse("# c\n a = 3 \nrange = 1.5, 2\nsingle=4\n").unwrap();
        assert_eq!(kv.get::<u32>("a").unwrap(), Some(3));
        assert_eq!(kv.get_range::<f64>("range").unwrap(), Some((1.5, 2.0)));
        assert_eq!(kv.get_range::<u32>("single").unwrap(), Some((4, 4)));
        assert_eq!(kv.get::<u32>("missing").unwrap(), None);
        assert!(kv.get::<u32>("range").is_err());
        assert_eq!(kv.line_of("range"), 3);
    }

    #[test]
    fn errors() {
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
        assert!(KeyValues::parse("just words").is_err());
        assert!(KeyValues::parse(" = 2").is_err());
        let kv = KeyValues::parse("a = 1\nb = 2").unwrap();
        assert!(kv.reject_unknown(|k| k == "a").is_err());
        assert!(kv.reject_unknown(|k| k == "a" || k == "b").is_ok());
    }
}
