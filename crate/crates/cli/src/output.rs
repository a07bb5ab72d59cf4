use std::path::{Path, PathBuf};

use anyhow::Result;
use hybrid_forecast::io::{FileDigest, RunConfig, RunManifest};
use hybrid_forecast::Error;
use serde::Serialize;

/// Output directory that records every file read and written in a manifest.
pub struct Output {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Output {
    pub fn new(dir: &Path, command: &str, config: &RunConfig, seed: Option<u64>) -> Result<Output> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir: dir.to_path_buf(), manifest: RunManifest::new(command, &config.canonical_json(), seed) })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.push(FileDigest::of(path, path.display().to_string())?);
        Ok(())
    }

    pub fn write(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> hybrid_forecast::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.dir.join(name);
        std::fs::write(&path, &buf).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.manifest.outputs.push(FileDigest { path: name.to_string(), sha256: hybrid_forecast::io::sha256_hex(&buf) });
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    pub fn finish(self) -> Result<()> {
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, self.manifest.to_json()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}
