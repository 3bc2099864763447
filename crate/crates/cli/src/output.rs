//! Output files. Every file starts with a provenance line; everything after it is a pure
//! function of the resolved configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::config::Resolved;
use crate::CliError;

pub const TOOL: &str = "cutlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// `# cutlab <version> command=<name> config_sha256=<hex> generated_unix=<secs>`.
pub fn provenance_line(cfg: &Resolved) -> String {
    format!(
        "# {TOOL} {VERSION} command={} config_sha256={} generated_unix={}",
        cfg.command,
        cfg.hash(),
        unix_time()
    )
}

pub fn provenance_json(cfg: &Resolved) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": cfg.command,
        "config_sha256": cfg.hash(),
        "config": cfg.entries(),
        "generated_unix": unix_time(),
    })
}

/// Accumulates CSV rows; fields are written with the shortest round-trip float form.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn body(&self) -> &str {
        &self.text
    }
}

pub struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output dir {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn csv(&mut self, name: &str, cfg: &Resolved, csv: &Csv) -> Result<(), CliError> {
        self.write(name, format!("{}\n{}", provenance_line(cfg), csv.body()))
    }

    /// JSON documents carry their provenance in a top-level `provenance` field.
    pub fn json(&mut self, name: &str, cfg: &Resolved, mut doc: Value) -> Result<String, CliError> {
        if let Value::Object(map) = &mut doc {
            map.insert("provenance".into(), provenance_json(cfg));
        }
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        self.write(name, format!("{text}\n"))?;
        Ok(text)
    }

    fn write(&mut self, name: &str, contents: String) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Shortest round-trip text of `x`; non-finite values as `inf`, `-inf`, `nan`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -1.5, 1e-300, std::f64::consts::PI, 12345.678] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[num(1.0), num(0.25)]);
        assert_eq!(c.body(), "a,b\n1e0,2.5e-1\n");
    }
}
