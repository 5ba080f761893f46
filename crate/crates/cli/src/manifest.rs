use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Inputs, settings and hashed outputs of one command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub settings: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

fn entry(path: &Path, data: &[u8]) -> FileEntry {
    FileEntry {
        path: path.display().to_string(),
        sha256: format!("{:x}", Sha256::digest(data)),
        bytes: data.len() as u64,
    }
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "twosided",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            settings: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let data = fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.inputs.push(entry(path, &data));
        Ok(data)
    }

    /// Writes `data` to `path`, creating parent directories.
    pub fn output(&mut self, path: &Path, data: &[u8]) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
        }
        fs::write(path, data).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        self.outputs.push(entry(path, data));
        Ok(())
    }

    pub fn finish(self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("manifest_{}.json", self.command));
        let mut text = serde_json::to_vec_pretty(&self).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push(b'\n');
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
