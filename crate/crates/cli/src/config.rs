//! `key = value` lines, `#` comments, and `[experiment]` section headers.
//! Keys before the first section are global.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// One block of keys. Every key must be read exactly once by someone; leftovers are
/// reported by [`Section::finish`].
#[derive(Debug, Default, Clone)]
pub struct Section {
    pub line: usize,
    values: BTreeMap<String, (usize, String)>,
}

impl Section {
    pub fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.values.remove(key)
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.values.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| err(line, format!("cannot parse `{key} = {v}`"))),
        }
    }

    pub fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        let line = self.line;
        self.get(key)?
            .ok_or_else(|| err(line, format!("missing key `{key}`")))
    }

    /// `a..b` inclusive.
    pub fn range(&mut self, key: &str, default: (u32, u32)) -> Result<(u32, u32), ConfigError> {
        let Some((line, v)) = self.values.remove(key) else {
            return Ok(default);
        };
        let bad = || err(line, format!("`{key}` must look like 6..10, got `{v}`"));
        let (a, b) = v.split_once("..").ok_or_else(bad)?;
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        Ok((a, b))
    }

    pub fn finish(self) -> Result<(), ConfigError> {
        match self.values.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(err(line, format!("unknown key `{k}`"))),
        }
    }

    /// Everything still unread, for the summary's parameter echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(k, (_, v))| (k.clone(), v.clone())).collect()
    }
}

#[derive(Debug, Default)]
pub struct Config {
    pub global: Section,
    pub experiments: Vec<Section>,
}

pub fn parse(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut current: Option<Section> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            if name.trim() != "experiment" {
                return Err(err(line, format!("unknown section `[{}]`", name.trim())));
            }
            if let Some(done) = current.take() {
                cfg.experiments.push(done);
            }
            current = Some(Section {
                line,
                ..Section::default()
            });
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{body}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(err(line, "empty key or value"));
        }
        let target = current.as_mut().unwrap_or(&mut cfg.global);
        if target.values.insert(k.to_string(), (line, v.to_string())).is_some() {
            return Err(err(line, format!("duplicate key `{k}`")));
        }
    }
    if let Some(done) = current {
        cfg.experiments.push(done);
    }
    Ok(cfg)
}
