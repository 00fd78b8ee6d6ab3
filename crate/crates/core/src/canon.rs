//! Canonical line records: `tag key=value key=value`, keys in ascending order,
//! fields separated by single spaces, one record per line with a trailing
//! newline. Parsing accepts only canonical text, so `to_text(parse(x)) == x`.

use std::collections::BTreeMap;
use std::fmt::{self, Display};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct CanonError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    tag: String,
    fields: BTreeMap<String, String>,
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn is_value(s: &str) -> bool {
    s.bytes().all(|b| b.is_ascii_graphic() && b != b'=')
}

impl Record {
    /// Panics if `tag` is not a lowercase identifier.
    pub fn new(tag: &str) -> Self {
        assert!(is_name(tag), "invalid record tag {tag:?}");
        Record { tag: tag.to_owned(), fields: BTreeMap::new() }
    }

    /// Adds a field. Panics on an invalid key, an invalid value or a repeated key.
    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        let value = value.to_string();
        assert!(is_name(key), "invalid record key {key:?}");
        assert!(is_value(&value), "invalid value {value:?} for key {key:?}");
        let prev = self.fields.insert(key.to_owned(), value);
        assert!(prev.is_none(), "repeated record key {key:?}");
        self
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &str)> {
        self.fields.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parse_line(line: &str) -> Result<Self, String> {
        let mut parts = line.split(' ');
        let tag = parts.next().unwrap_or_default();
        if !is_name(tag) {
            return Err(format!("invalid tag {tag:?}"));
        }
        let mut fields = BTreeMap::new();
        let mut last: Option<&str> = None;
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("field {part:?} has no '='"))?;
            if !is_name(k) || !is_value(v) {
                return Err(format!("invalid field {part:?}"));
            }
            if last.is_some_and(|l| l >= k) {
                return Err(format!("key {k:?} out of order"));
            }
            last = Some(k);
            fields.insert(k.to_owned(), v.to_owned());
        }
        Ok(Record { tag: tag.to_owned(), fields })
    }
}

impl Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

pub fn to_text(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<Record>, CanonError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| CanonError { line: text.lines().count(), message: "missing final newline".into() })?;
    body.split('\n')
        .enumerate()
        .map(|(i, line)| Record::parse_line(line).map_err(|message| CanonError { line: i + 1, message }))
        .collect()
}
