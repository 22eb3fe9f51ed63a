//! Run configurations and versioned JSON reports.
//!
//! A configuration file holds one `key = value` pair per line; blank lines
//! and lines starting with `#` are ignored. Every report embeds the fully
//! resolved configuration it was produced from.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LobError, Result};
use crate::estimator::{FitResult, SelectionOutcome};

pub const SCHEMA_VERSION: &str = "lobfit-report/1";

/// Keys holding wall-clock measurements; they are the only fields allowed
/// to differ between reruns of one configuration.
pub const TIMING_KEYS: [&str; 2] = ["wall_time", "timings"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LobError::Input(format!("config line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(LobError::Input(format!("config line {}: empty key", i + 1)));
            }
            cfg.entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| LobError::Input(format!("{}: {e}", p.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Sets `key` only when it is absent.
    pub fn default_to(&mut self, key: &str, value: impl ToString) {
        self.entries.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key).ok_or_else(|| LobError::Input(format!("missing config key {key:?}")))?;
        raw.parse().map_err(|e| LobError::Input(format!("config key {key:?} = {raw:?}: {e}")))
    }

    /// `None` for an absent key or the literal `none`.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None | Some("none") | Some("") => Ok(None),
            Some(_) => self.get(key).map(Some),
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key).ok_or_else(|| LobError::Input(format!("missing config key {key:?}")))?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| LobError::Input(format!("config key {key:?} item {s:?}: {e}"))))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: String,
    pub command: String,
    pub config: RunConfig,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, config: &RunConfig, result: T) -> Self {
        Self { schema_version: SCHEMA_VERSION.into(), command: command.into(), config: config.clone(), result }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| LobError::Input(e.to_string()))
    }
}

/// Removes every timing field, at any depth.
pub fn strip_timing(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            for k in TIMING_KEYS {
                map.remove(k);
            }
            map.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// Significance stars at the 0.05, 0.01 and 0.001 levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Plain-text parameter table of one fit.
pub fn fit_table(fit: &FitResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} ({}), log-lik {:.4}, N = {}", fit.variant, fit.mode, fit.log_lik, fit.n_obs);
    let values = fit.params.to_vec();
    for (i, name) in fit.names.iter().enumerate() {
        let se = fit.std_errors.as_ref().map(|v| format!("{:.6}", v[i])).unwrap_or_else(|| "n/a".into());
        let st = fit.param_pvalues.as_ref().map(|p| stars(p[i])).unwrap_or("");
        let _ = writeln!(s, "  {name:<12} {:>12.6}{st:<3} ({se})", values[i]);
    }
    if fit.timed_out {
        s.push_str("  t (time limit reached)\n");
    } else if !fit.converged {
        s.push_str("  not converged\n");
    }
    s
}

pub fn selection_table(sel: &SelectionOutcome) -> String {
    let mut s = String::new();
    for e in &sel.ladder {
        s.push_str(&fit_table(&e.fit));
        if let Some(p) = e.lr_pvalue {
            let _ = writeln!(s, "  LR vs next: p = {p:.4}");
        }
    }
    let chosen = sel.chosen.map(|v| v.to_string()).unwrap_or_else(|| "none".into());
    let _ = writeln!(s, "chosen: {chosen} ({:?})", sel.stopped_reason);
    s
}
