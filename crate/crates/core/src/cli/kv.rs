//! Line-oriented `key = value` text with `[section]` headers and `#` comments.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, or `line N` for syntax errors.
    pub at: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(at: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            at: at.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.at, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// Empty for keys before the first section header.
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl Entry {
    pub fn path(&self) -> String {
        if self.section.is_empty() {
            self.key.clone()
        } else {
            format!("{}.{}", self.section, self.key)
        }
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !s.starts_with(|c: char| c.is_ascii_digit())
}

/// Splits `text` into entries. Rejects malformed lines and repeated keys.
pub fn lex(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section = String::new();
    let mut out: Vec<Entry> = Vec::new();
    let mut seen_sections: Vec<String> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(format!("line {line}"), "unterminated section header"))?
                .trim();
            if !is_ident(name) {
                return Err(ConfigError::new(
                    format!("line {line}"),
                    format!("invalid section name `{name}`"),
                ));
            }
            if seen_sections.iter().any(|s| s == name) {
                return Err(ConfigError::new(name, "section appears twice"));
            }
            seen_sections.push(name.to_string());
            section = name.to_string();
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::new(format!("line {line}"), "expected `key = value`"))?;
        let key = k.trim();
        if !is_ident(key) {
            return Err(ConfigError::new(format!("line {line}"), format!("invalid key `{key}`")));
        }
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        let entry = Entry {
            section: section.clone(),
            key: key.to_string(),
            value: value.to_string(),
            line,
        };
        if out.iter().any(|e| e.section == entry.section && e.key == entry.key) {
            return Err(ConfigError::new(entry.path(), "key appears twice"));
        }
        out.push(entry);
    }
    Ok(out)
}

/// Typed access to one section's entries; every key must be consumed.
pub struct Section<'a> {
    pub name: &'a str,
    entries: Vec<&'a Entry>,
    used: Vec<bool>,
}

impl<'a> Section<'a> {
    pub fn new(name: &'a str, all: &'a [Entry]) -> Self {
        let entries: Vec<&Entry> = all.iter().filter(|e| e.section == name).collect();
        let used = vec![false; entries.len()];
        Self {
            name,
            entries,
            used,
        }
    }

    pub fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.name, key)
        }
    }

    pub fn is_present(&self) -> bool {
        !self.entries.is_empty()
    }

    pub fn raw(&mut self, key: &str) -> Option<&'a str> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some(self.entries[i].value.as_str())
    }

    pub fn required(&mut self, key: &str) -> Result<&'a str, ConfigError> {
        self.raw(key)
            .ok_or_else(|| ConfigError::new(self.path(key), "missing required key"))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str, raw: &str, what: &str) -> Result<T, ConfigError> {
        raw.trim()
            .parse()
            .map_err(|_| ConfigError::new(self.path(key), format!("expected {what}, got `{raw}`")))
    }

    pub fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(r) => {
                let x: f64 = self.parse(key, r, "a number")?;
                if x.is_finite() {
                    Ok(Some(x))
                } else {
                    Err(ConfigError::new(self.path(key), "must be finite"))
                }
            }
        }
    }

    pub fn usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(r) => self.parse(key, r, "a nonnegative integer").map(Some),
        }
    }

    pub fn list<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(r) => {
                if r.trim().is_empty() {
                    return Err(ConfigError::new(self.path(key), "empty list"));
                }
                r.split(',').map(|p| self.parse(key, p, what)).collect::<Result<Vec<T>, _>>().map(Some)
            }
        }
    }

    /// Fails on the first entry that was never read.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.used.iter().position(|u| !u) {
            Some(i) => Err(ConfigError::new(self.entries[i].path(), "unknown key")),
            None => Ok(()),
        }
    }
}

/// Fails on sections outside `known`.
pub fn check_sections(entries: &[Entry], known: &[&str]) -> Result<(), ConfigError> {
    match entries.iter().find(|e| !known.contains(&e.section.as_str())) {
        Some(e) => Err(ConfigError::new(e.section.clone(), "unknown section")),
        None => Ok(()),
    }
}

/// Shortest round-trip text of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_list<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn fmt_f64_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", ")
}
