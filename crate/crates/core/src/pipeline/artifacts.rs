use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactRecord {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

/// Writes files under one output directory, each atomically, and remembers
/// them so a failed command can remove what it wrote.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    written: Vec<ArtifactRecord>,
    files: Vec<PathBuf>,
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArtifactWriter {
            root: root.into(),
            written: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        self.write_path(&self.path(rel), bytes)
    }

    /// Like [`write`](Self::write) for a path that may lie outside the root.
    pub fn write_path(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.files.push(path.to_path_buf());
        let name = self.display_name(path);
        self.written.retain(|r| r.path != name);
        self.written.push(ArtifactRecord {
            path: name,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn display_name(&self, path: &Path) -> String {
        match path.strip_prefix(&self.root) {
            Ok(rel) => rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
            Err(_) => path.display().to_string(),
        }
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Records a file written outside the writer (e.g. a download).
    pub fn adopt(&mut self, path: &Path, sha256: &str) {
        let name = self.display_name(path);
        self.written.retain(|r| r.path != name);
        self.written.push(ArtifactRecord {
            path: name,
            sha256: sha256.to_ascii_lowercase(),
        });
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.written
    }

    /// Removes everything written so far.
    pub fn rollback(&mut self) {
        self.written.clear();
        for f in self.files.drain(..) {
            let _ = fs::remove_file(f);
        }
    }

    /// Written records; the writer forgets them.
    pub fn finish(mut self) -> Vec<ArtifactRecord> {
        std::mem::take(&mut self.written)
    }
}

/// Reads a prerequisite artifact, naming the command that produces it when
/// absent.
pub fn read_required(path: &Path, command: &str) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            command: command.to_string(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}
