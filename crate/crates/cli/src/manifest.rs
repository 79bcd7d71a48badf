//! Output directory bookkeeping: every file written goes into `manifest.json`
//! with its digest and size.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    mode: &'a str,
    files: &'a [Entry],
}

pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<Entry>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.entries.push(Entry { path: name.to_string(), sha256: hex::encode(Sha256::digest(contents.as_bytes())), bytes: contents.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Write `manifest.json` listing everything written so far.
    pub fn finish(self, mode: &str) -> std::io::Result<Vec<Entry>> {
        let mut text = serde_json::to_string_pretty(&Manifest { mode, files: &self.entries }).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(self.entries)
    }
}
