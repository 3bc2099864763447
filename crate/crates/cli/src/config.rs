//! Parameter resolution: defaults < config file < environment (cache dir only) < flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::CliError;

/// Keys every command accepts.
pub const GLOBAL_KEYS: [&str; 3] = ["output_dir", "cache_dir", "threads"];

pub const CACHE_ENV: &str = "CUTLAB_CACHE_DIR";

/// One source of `key = value` settings.
pub type Layer = BTreeMap<String, String>;

pub fn put<T: Display>(layer: &mut Layer, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        layer.insert(key.to_string(), v.to_string());
    }
}

/// Flat `key = value` lines; blank lines and lines starting with `#` are skipped.
pub fn parse_config_text(text: &str) -> Result<Layer, CliError> {
    let mut layer = Layer::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected `key = value`, got `{line}`", i + 1)))?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(CliError::Config(format!("config line {}: empty key", i + 1)));
        }
        if layer.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(layer)
}

pub fn read_config_file(path: &Path) -> Result<Layer, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// A command's parameter list: each key with its default, `None` when the key is required.
pub type ParamSpec = &'static [(&'static str, Option<&'static str>)];

/// The merged settings for one command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: &'static str,
    values: BTreeMap<String, String>,
}

impl Resolved {
    /// `known` lists every key any command accepts; file keys outside it are rejected, file keys
    /// that belong to other commands are ignored with a warning.
    pub fn merge(
        command: &'static str,
        spec: ParamSpec,
        file: &Layer,
        flags: &Layer,
        env_cache_dir: Option<String>,
        known: &[&str],
    ) -> Result<Self, CliError> {
        for key in file.keys() {
            let ours = spec.iter().any(|(k, _)| k == key) || GLOBAL_KEYS.contains(&key.as_str());
            if !ours {
                if known.contains(&key.as_str()) {
                    eprintln!("warning: config key `{key}` is not used by `{command}`; ignored");
                } else {
                    return Err(CliError::Config(format!("unknown config key `{key}`")));
                }
            }
        }
        let mut values = BTreeMap::new();
        let defaults = [("output_dir", Some(".")), ("threads", Some("0")), ("cache_dir", None)];
        for &(key, default) in spec.iter().chain(defaults.iter()) {
            let env = if key == "cache_dir" { env_cache_dir.clone() } else { None };
            let value = flags
                .get(key)
                .cloned()
                .or(env)
                .or_else(|| file.get(key).cloned())
                .or_else(|| default.map(str::to_string));
            match value {
                Some(v) => {
                    values.insert(key.to_string(), v);
                }
                None if key == "cache_dir" => {}
                None => return Err(CliError::Config(format!("missing required parameter `{key}`"))),
            }
        }
        Ok(Self { command, values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self
            .raw(key)
            .ok_or_else(|| CliError::Config(format!("missing parameter `{key}`")))?;
        raw.parse()
            .map_err(|e| CliError::Config(format!("parameter `{key}` = `{raw}`: {e}")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None | Some("") => Ok(None),
            Some(_) => self.get(key).map(Some),
        }
    }

    /// Comma-separated reals.
    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let raw = self
            .raw(key)
            .ok_or_else(|| CliError::Config(format!("missing parameter `{key}`")))?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Config(format!("parameter `{key}` entry `{s}`: {e}")))
            })
            .collect()
    }

    pub fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.raw(key) {
            None | Some("") => Ok(None),
            Some(_) => self.list(key).map(Some),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("output_dir").unwrap_or("."))
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.raw("cache_dir").filter(|s| !s.is_empty()).map(PathBuf::from)
    }

    /// SHA-256 of the command name and every resolved `key=value`, in key order.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("command={}\n", self.command));
        for (k, v) in &self.values {
            h.update(format!("{k}={v}\n"));
        }
        format!("{:x}", h.finalize())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}
