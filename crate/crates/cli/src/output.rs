use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

/// Writes the artifacts of one run into its output directory.
pub struct Artifacts {
    dir: PathBuf,
    format: Format,
    hash: String,
    seed: u64,
}

impl Artifacts {
    /// Creates the directory and writes the resolved config and its hash.
    pub fn create(cfg: &RunConfig) -> std::io::Result<Self> {
        let dir = cfg.output.dir.clone();
        fs::create_dir_all(&dir)?;
        let hash = cfg.hash();
        fs::write(dir.join("resolved_config.json"), cfg.to_pretty_json())?;
        fs::write(dir.join("config.sha256"), format!("{hash}\n"))?;
        Ok(Artifacts {
            dir,
            format: cfg.output.format,
            hash,
            seed: cfg.seed,
        })
    }

    /// `body` must serialize to an object; the hash and seed are added to it.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> std::io::Result<()> {
        if !self.format.json() {
            return Ok(());
        }
        let mut value = serde_json::to_value(body).map_err(std::io::Error::other)?;
        let header = json!({ "config_sha256": self.hash, "seed": self.seed });
        if let (Value::Object(map), Value::Object(head)) = (&mut value, header) {
            map.extend(head);
        }
        let mut text = serde_json::to_string_pretty(&value).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(self.dir.join(format!("{name}.json")), text)
    }

    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> std::io::Result<()> {
        if !self.format.csv() {
            return Ok(());
        }
        let mut out = Vec::new();
        writeln!(out, "# config_sha256={}", self.hash)?;
        writeln!(out, "# seed={}", self.seed)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header).map_err(std::io::Error::other)?;
            for row in rows {
                w.write_record(row).map_err(std::io::Error::other)?;
            }
            w.flush()?;
        }
        fs::write(self.dir.join(format!("{name}.csv")), out)
    }
}

pub fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Shortest round-trip decimal form, so CSV and JSON agree digit for digit.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
