use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

/// Writes report files into the output directory and a manifest listing
/// them. JSON reports carry a `meta` block and CSV reports a `#` header
/// line, both naming the config hash and versions.
pub struct Reporter {
    dir: PathBuf,
    config: Value,
    meta: Value,
    hash: String,
    outputs: Vec<OutputEntry>,
}

impl Reporter {
    pub fn new(dir: &Path, subcommand: &str, config: Value) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let hash = sha256_hex(serde_json::to_string(&config)?.as_bytes());
        let meta = json!({
            "tool": "twinpsy",
            "subcommand": subcommand,
            "config_hash": hash,
            "versions": {
                "twinpsy": twinpsy::VERSION,
                "twinpsy-cli": env!("CARGO_PKG_VERSION"),
            },
        });
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            meta,
            hash,
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, body: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        log::info!("wrote {}", path.display());
        self.outputs.push(OutputEntry {
            file: name.to_string(),
            bytes: body.len(),
            sha256: sha256_hex(body),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> anyhow::Result<()> {
        let doc = json!({ "meta": self.meta, "config": self.config, "result": result });
        let mut body = serde_json::to_string_pretty(&doc)?;
        body.push('\n');
        self.write(name, body.as_bytes())
    }

    pub fn csv(&mut self, name: &str, table: &str) -> anyhow::Result<()> {
        let body = format!(
            "# twinpsy {} config_hash={}\n{table}",
            twinpsy::VERSION,
            self.hash
        );
        self.write(name, body.as_bytes())
    }

    /// Data files in an interchange format that must stay loadable as is.
    pub fn raw(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        self.write(name, body.as_bytes())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let outputs = std::mem::take(&mut self.outputs);
        let doc = json!({
            "meta": self.meta,
            "config": self.config,
            "outputs": outputs,
            "created_unix": created,
        });
        let path = self.dir.join("manifest.json");
        let mut body = serde_json::to_string_pretty(&doc)?;
        body.push('\n');
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

/// Build a CSV table in memory.
pub fn table<I, R>(header: &[&str], rows: I) -> anyhow::Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Fixed-precision float cell; empty for missing or non-finite values.
pub fn num(v: impl Into<Option<f64>>) -> String {
    match v.into() {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        Some(x) if x.is_nan() => "NA".into(),
        Some(x) => x.to_string(),
        None => String::new(),
    }
}
