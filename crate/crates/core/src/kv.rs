//! `key = value` text files: one pair per line, `#` comments, blank lines ignored.

use indexmap::IndexMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
}

/// Pairs in file order.
pub fn parse(text: &str) -> Result<IndexMap<String, String>, KvError> {
    let mut out = IndexMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(KvError::Syntax { line: i + 1 });
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(KvError::Duplicate { line: i + 1, key: k.to_string() });
        }
    }
    Ok(out)
}
