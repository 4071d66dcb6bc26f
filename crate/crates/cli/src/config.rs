use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_SEED: u64 = 20_200_404;

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalOpts {
    /// Master seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML run config; command-line flags override its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Parsed `--config` file: top-level globals plus one table per subcommand.
pub struct ConfigFile {
    root: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self { root: toml::Table::new() });
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let root = text
            .parse::<toml::Table>()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(Self { root })
    }

    /// Table at a dotted path such as `twin-gen.render`.
    pub fn section(&self, path: &str) -> Option<toml::Value> {
        let mut cur = &self.root;
        for key in path.split('.') {
            cur = cur.get(key)?.as_table()?;
        }
        Some(toml::Value::Table(cur.clone()))
    }

    pub fn globals(&self) -> toml::Value {
        let t: toml::Table = self
            .root
            .iter()
            .filter(|(_, v)| !v.is_table())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        toml::Value::Table(t)
    }
}

/// Overlay the non-empty command-line values on the config-file values.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, file: Option<toml::Value>, what: &str) -> anyhow::Result<T> {
    let mut base = match file {
        Some(v) => serde_json::to_value(v)?,
        None => Value::Object(Default::default()),
    };
    let Value::Object(over) = serde_json::to_value(cli)? else {
        bail!("{what}: options must serialize to a table");
    };
    let Value::Object(b) = &mut base else {
        bail!("{what}: config section must be a table");
    };
    for (k, v) in over {
        if !v.is_null() {
            b.insert(k, v);
        }
    }
    serde_json::from_value(base).with_context(|| format!("invalid [{what}] configuration"))
}

pub struct Resolved<T> {
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub args: T,
}

impl<T: Serialize> Resolved<T> {
    /// The echoed configuration; hashed into every report. The output
    /// directory is left out so relocating a run does not change its bytes.
    pub fn echo(&self, subcommand: &str) -> Value {
        serde_json::json!({
            "subcommand": subcommand,
            "seed": self.seed,
            "workers": self.workers,
            "options": self.args,
        })
    }
}

pub fn resolve<T: Serialize + DeserializeOwned>(
    global: &GlobalOpts,
    args: &T,
    section: &str,
) -> anyhow::Result<Resolved<T>> {
    let file = ConfigFile::load(global.config.as_deref())?;
    let g: GlobalOpts = merge(global, Some(file.globals()), "global")?;
    let args = merge(args, file.section(section), section)?;
    Ok(Resolved {
        seed: g.seed.unwrap_or(DEFAULT_SEED),
        workers: g.workers,
        out: g.out.unwrap_or_else(|| PathBuf::from("reports")),
        args,
    })
}

pub fn required<'a, T>(v: &'a Option<T>, flag: &str) -> anyhow::Result<&'a T> {
    v.as_ref().with_context(|| format!("missing required option --{flag} (or `{}` in the config file)", flag.replace('-', "_")))
}
