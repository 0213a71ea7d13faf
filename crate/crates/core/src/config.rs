//! Analysis configuration: keyword/API lists, the token limit and the
//! sequential-edge window.
//!
//! The on-disk form is a plain key-value text file:
//!
//! ```text
//! # lines starting with '#' are comments
//! max_tokens     = 400
//! truncate       = false
//! window         = 1
//! unsafe_apis    = strcpy, strcat, gets, sprintf
//! execution_apis = system, popen, exec*
//! free_apis      = free, kfree
//! resource_pair  = malloc:free
//! resource_pair  = mutex_lock:mutex_unlock
//! ```
//!
//! List values are comma separated; a trailing `*` matches any name with that
//! prefix. A list key present in the file replaces the built-in default for
//! that list. `resource_pair` may repeat; the first occurrence discards the
//! default pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_TOKENS: usize = 400;

const DEFAULT_UNSAFE_APIS: &[&str] = &[
    "strcpy", "strncpy", "strcat", "strncat", "sprintf", "vsprintf", "gets", "scanf", "sscanf",
    "fscanf", "memcpy", "memmove", "read", "write", "recv", "alloca",
];

const DEFAULT_EXECUTION_APIS: &[&str] = &[
    "system",
    "popen",
    "exec*",
    "ShellExecute*",
    "WinExec",
    "CreateProcess*",
    "mysql_query",
    "sqlite3_exec",
    "PQexec",
];

const DEFAULT_FREE_APIS: &[&str] = &["free", "kfree", "vfree", "g_free", "cfree"];

const DEFAULT_RESOURCE_PAIRS: &[(&str, &str)] = &[
    ("malloc", "free"),
    ("calloc", "free"),
    ("kmalloc", "kfree"),
    ("mutex_lock", "mutex_unlock"),
    ("pthread_mutex_lock", "pthread_mutex_unlock"),
    ("spin_lock", "spin_unlock"),
    ("fopen", "fclose"),
];

/// A list of function names; entries ending in `*` are prefix patterns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiList(Vec<String>);

impl ApiList {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ApiList(names.into_iter().map(Into::into).collect())
    }

    pub fn matches(&self, name: &str) -> bool {
        self.0.iter().any(|pat| match pat.strip_suffix('*') {
            Some(prefix) => name.starts_with(prefix),
            None => pat == name,
        })
    }

    pub fn entries(&self) -> &[String] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourcePair {
    pub acquire: String,
    pub release: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub max_tokens: usize,
    /// Truncate oversize functions instead of rejecting them.
    pub truncate: bool,
    /// Sequential-flow window.
    pub window: usize,
    pub unsafe_apis: ApiList,
    pub execution_apis: ApiList,
    pub free_apis: ApiList,
    pub resource_pairs: Vec<ResourcePair>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            max_tokens: DEFAULT_MAX_TOKENS,
            truncate: false,
            window: 1,
            unsafe_apis: ApiList::new(DEFAULT_UNSAFE_APIS.iter().copied()),
            execution_apis: ApiList::new(DEFAULT_EXECUTION_APIS.iter().copied()),
            free_apis: ApiList::new(DEFAULT_FREE_APIS.iter().copied()),
            resource_pairs: DEFAULT_RESOURCE_PAIRS
                .iter()
                .map(|(a, r)| ResourcePair {
                    acquire: a.to_string(),
                    release: r.to_string(),
                })
                .collect(),
        }
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = AnalysisConfig::default();
        let mut pairs_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("config line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::Format(format!("config line {}: invalid {what} `{value}`", lineno + 1))
            };
            match key {
                "max_tokens" => cfg.max_tokens = value.parse().map_err(|_| bad("max_tokens"))?,
                "truncate" => cfg.truncate = value.parse().map_err(|_| bad("truncate"))?,
                "window" => cfg.window = value.parse().map_err(|_| bad("window"))?,
                "unsafe_apis" => cfg.unsafe_apis = parse_list(value),
                "execution_apis" => cfg.execution_apis = parse_list(value),
                "free_apis" => cfg.free_apis = parse_list(value),
                "resource_pair" => {
                    let (a, r) = value.split_once(':').ok_or_else(|| bad("resource_pair"))?;
                    if !pairs_seen {
                        cfg.resource_pairs.clear();
                        pairs_seen = true;
                    }
                    cfg.resource_pairs.push(ResourcePair {
                        acquire: a.trim().to_string(),
                        release: r.trim().to_string(),
                    });
                }
                other => {
                    return Err(Error::Format(format!(
                        "config line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.max_tokens < 3 {
            return Err(Error::Config("max_tokens must be at least 3".into()));
        }
        Ok(())
    }

    /// Serializes back into the key-value form accepted by [`AnalysisConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("max_tokens = {}\n", self.max_tokens));
        out.push_str(&format!("truncate = {}\n", self.truncate));
        out.push_str(&format!("window = {}\n", self.window));
        out.push_str(&format!("unsafe_apis = {}\n", self.unsafe_apis.entries().join(", ")));
        out.push_str(&format!(
            "execution_apis = {}\n",
            self.execution_apis.entries().join(", ")
        ));
        out.push_str(&format!("free_apis = {}\n", self.free_apis.entries().join(", ")));
        for p in &self.resource_pairs {
            out.push_str(&format!("resource_pair = {}:{}\n", p.acquire, p.release));
        }
        out
    }
}

fn parse_list(value: &str) -> ApiList {
    ApiList::new(
        value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_patterns() {
        let l = ApiList::new(["exec*", "system"]);
        assert!(l.matches("execve"));
        assert!(l.matches("system"));
        assert!(!l.matches("systemd"));
        assert!(!l.matches("popen"));
    }

    #[test]
    fn parse_overrides_and_round_trips() {
        let cfg = AnalysisConfig::parse(
            "# c\nmax_tokens = 50\nwindow=2\nunsafe_apis = foo, bar*\nresource_pair = get:put\n",
        )
        .unwrap();
        assert_eq!(cfg.max_tokens, 50);
        assert_eq!(cfg.window, 2);
        assert!(cfg.unsafe_apis.matches("barrier"));
        assert!(!cfg.unsafe_apis.matches("strcpy"));
        assert_eq!(cfg.resource_pairs.len(), 1);
        let again = AnalysisConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(AnalysisConfig::parse("window = 0").is_err());
        assert!(AnalysisConfig::parse("nonsense").is_err());
        assert!(AnalysisConfig::parse("colour = red").is_err());
        assert!(AnalysisConfig::parse("resource_pair = nocolon").is_err());
    }
}
