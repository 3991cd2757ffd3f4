use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Downloads `url` into `dest` and verifies its SHA-256 `checksum` (hex).
///
/// The body is streamed into a temporary file next to the destination and
/// only renamed into place once the digest matches; on any failure no file
/// is left behind.
pub fn fetch_dataset(url: &str, dest: &Path, checksum: &str) -> Result<PathBuf> {
    let name = url
        .rsplit('/')
        .next()
        .map(|s| s.split('?').next().unwrap_or(s))
        .filter(|s| !s.is_empty())
        .unwrap_or("dataset");
    std::fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let target = dest.join(name);
    let partial = dest.join(format!(".{name}.part"));

    let result = download(url, &partial).and_then(|actual| {
        if actual.eq_ignore_ascii_case(checksum.trim()) {
            std::fs::rename(&partial, &target).map_err(|e| Error::io(&target, e))
        } else {
            Err(Error::Checksum {
                path: target.clone(),
                expected: checksum.trim().to_lowercase(),
                actual,
            })
        }
    });
    if result.is_err() {
        let _ = std::fs::remove_file(&partial);
    }
    result.map(|_| target)
}

fn download(url: &str, to: &Path) -> Result<String> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(600))
        .connect_timeout(Duration::from_secs(20))
        .build()
        .map_err(|e| Error::Network(e.to_string()))?;
    let mut response = client
        .get(url)
        .send()
        .and_then(|r| r.error_for_status())
        .map_err(|e| Error::Network(e.to_string()))?;
    let mut file = std::fs::File::create(to).map_err(|e| Error::io(to, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = response
            .read(&mut buf)
            .map_err(|e| Error::Network(e.to_string()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        file.write_all(&buf[..n]).map_err(|e| Error::io(to, e))?;
    }
    file.flush().map_err(|e| Error::io(to, e))?;
    Ok(hex::encode(hasher.finalize()))
}
