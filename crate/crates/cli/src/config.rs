//! `key = value` recipe files.
//!
//! Lines before the first `[name]` header apply to every subcommand that
//! accepts the key; lines under `[name]` apply to subcommand `name` only and
//! must be accepted by it. Keys are flag names with `_` or `-`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub global: Vec<(String, String)>,
    pub sections: BTreeMap<String, Vec<(String, String)>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = ConfigFile::default();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                cfg.sections.entry(name.clone()).or_default();
                section = Some(name);
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`, got `{raw}`", n + 1))?;
            let key = k.trim().replace('_', "-");
            let value = v.trim().to_string();
            if key.is_empty() {
                return Err(format!("line {}: empty key", n + 1));
            }
            match &section {
                Some(s) => cfg
                    .sections
                    .entry(s.clone())
                    .or_default()
                    .push((key, value)),
                None => cfg.global.push((key, value)),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// Flags for `subcommand`: global keys it accepts, then its own section.
    pub fn flags_for(
        &self,
        subcommand: &str,
        accepts: impl Fn(&str) -> bool,
    ) -> Result<Vec<String>, String> {
        let mut out = Vec::new();
        for (k, v) in &self.global {
            if accepts(k) {
                out.push(format!("--{k}={v}"));
            }
        }
        for (k, v) in self.sections.get(subcommand).into_iter().flatten() {
            if !accepts(k) {
                return Err(format!("[{subcommand}] does not take `{k}`"));
            }
            out.push(format!("--{k}={v}"));
        }
        Ok(out)
    }
}
