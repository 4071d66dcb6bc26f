pub mod ddr;
pub mod eval;
pub mod ling;
pub mod psychnet;
pub mod semnet;
pub mod twin_gen;

use std::path::Path;

use twinpsy::dataio::{load_items, load_response_dataset, ResponseDataset, ResponseSchema};

use crate::config::Resolved;

/// Size the global rayon pool once per process.
pub fn init_workers<T>(cfg: &Resolved<T>) {
    if let Some(n) = cfg.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::debug!("thread pool already initialised: {e}");
        }
    }
}

pub fn load_dataset(responses: &Path, items: &Path, twin_channels: &[String]) -> anyhow::Result<ResponseDataset> {
    let meta = load_items(items)?;
    let schema = ResponseSchema {
        twin_channels: twin_channels.to_vec(),
        ..Default::default()
    };
    Ok(load_response_dataset(responses, meta, &schema)?)
}

pub fn file_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}
