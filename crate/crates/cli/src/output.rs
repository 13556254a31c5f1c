//! Output files: atomic writes confined to the output directory, with
//! provenance metadata.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const TOOLKIT: &str = "slotqed";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    /// Canonical TOML of the effective configuration.
    pub config: String,
}

impl Meta {
    pub fn new(cfg: &RunConfig) -> Self {
        Meta {
            toolkit: TOOLKIT,
            version: VERSION,
            config_hash: cfg.hash(),
            config: cfg.canonical(),
        }
    }
}

/// JSON document with a leading `meta` block.
#[derive(Debug, Serialize)]
pub struct Document<'a, T: Serialize> {
    pub meta: &'a Meta,
    #[serde(flatten)]
    pub body: T,
}

/// File-name component safe to join under the output directory.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect::<String>()
        .trim_start_matches('.')
        .to_owned()
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutDir { root: root.to_owned() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(sanitize(name))
    }

    /// Writes `name` via a temporary file in the same directory and a rename.
    pub fn write_with(&self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let target = self.path(name);
        let tmp = self.root.join(format!(".{}.tmp", sanitize(name)));
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let mut f = fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        f.write_all(&buf)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &target).with_context(|| format!("cannot move output into {}", target.display()))?;
        log::info!("wrote {}", target.display());
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, meta: &Meta, body: T) -> Result<PathBuf> {
        self.write_with(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, &Document { meta, body })?;
            buf.push(b'\n');
            Ok(())
        })
    }

    /// CSV preceded by `#` comment lines carrying the provenance.
    pub fn write_csv(&self, name: &str, meta: &Meta, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        self.write_with(name, |buf| {
            writeln!(buf, "# {} {} config_hash={}", meta.toolkit, meta.version, meta.config_hash)?;
            fill(buf)
        })
    }
}
