//! Content-addressed result cache.
//!
//! Layout: `entries/<sha256>` holds the stored values, `locks/<sha256>.<run>.lock`
//! marks an entry as referenced by a running sweep. Entries are written to a
//! temporary file and renamed into place, so readers never see partial data.

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

/// Values stored for one cache key.
#[derive(Clone, Debug, PartialEq)]
pub struct Stored {
    pub nbar: Option<f64>,
    pub metrics: Vec<(String, f64)>,
}

impl Stored {
    fn encode(&self) -> String {
        let mut s = String::from("rotcode-result 1\n");
        if let Some(n) = self.nbar {
            s.push_str(&format!("nbar {:016x}\n", n.to_bits()));
        }
        for (m, v) in &self.metrics {
            s.push_str(&format!("metric {:016x} {m}\n", v.to_bits()));
        }
        s
    }

    fn decode(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        if lines.next()? != "rotcode-result 1" {
            return None;
        }
        let bits = |h: &str| u64::from_str_radix(h, 16).ok().map(f64::from_bits);
        let mut out = Stored { nbar: None, metrics: Vec::new() };
        for l in lines {
            let mut parts = l.splitn(3, ' ');
            match (parts.next()?, parts.next()?) {
                ("nbar", h) => out.nbar = Some(bits(h)?),
                ("metric", h) => out.metrics.push((parts.next()?.to_string(), bits(h)?)),
                _ => return None,
            }
        }
        Some(out)
    }
}

/// Hex SHA-256 of a key description prefixed with the library version.
pub fn cache_key(description: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("rotcode {}\n", rotcode::VERSION));
    h.update(description.as_bytes());
    hex::encode(h.finalize())
}

pub struct Cache {
    root: PathBuf,
    run_id: String,
}

impl Cache {
    pub fn open(root: &Path) -> Result<Self> {
        for sub in ["entries", "locks"] {
            fs::create_dir_all(root.join(sub)).with_context(|| format!("creating cache directory {}", root.display()))?;
        }
        let nanos = SystemTime::now().duration_since(SystemTime::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        Ok(Self { root: root.to_path_buf(), run_id: format!("{}-{nanos}", std::process::id()) })
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.root.join("entries").join(key)
    }

    fn lock(&self, key: &str) -> PathBuf {
        self.root.join("locks").join(format!("{key}.{}.lock", self.run_id))
    }

    /// Take a lease on `key` for the lifetime of the returned guard.
    pub fn lease(&self, key: &str) -> Result<Lease> {
        let path = self.lock(key);
        fs::write(&path, self.run_id.as_bytes())?;
        Ok(Lease { path })
    }

    /// Stored values, refreshing the entry's access time on a hit.
    pub fn get(&self, key: &str) -> Option<Stored> {
        let path = self.entry(key);
        let text = fs::read_to_string(&path).ok()?;
        let stored = Stored::decode(&text)?;
        if let Ok(f) = fs::File::options().append(true).open(&path) {
            let _ = f.set_modified(SystemTime::now());
        }
        Some(stored)
    }

    pub fn put(&self, key: &str, value: &Stored) -> Result<()> {
        let tmp = self.root.join("entries").join(format!(".{key}.{}.tmp", self.run_id));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(value.encode().as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.entry(key))?;
        Ok(())
    }
}

/// Removes its lock file on drop.
pub struct Lease {
    path: PathBuf,
}

impl Drop for Lease {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Evict least recently used entries until the cache holds at most
/// `max_bytes`. Leased entries are kept. Returns the bytes freed.
pub fn cache_gc(root: &Path, max_bytes: u64) -> Result<u64> {
    let entries_dir = root.join("entries");
    if !entries_dir.exists() {
        return Ok(0);
    }
    let mut leased = HashSet::new();
    if let Ok(rd) = fs::read_dir(root.join("locks")) {
        for e in rd.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(key) = name.split('.').next() {
                leased.insert(key.to_string());
            }
        }
    }
    let mut files = Vec::new();
    let mut total = 0u64;
    for e in fs::read_dir(&entries_dir)?.flatten() {
        let meta = e.metadata()?;
        if !meta.is_file() {
            continue;
        }
        total += meta.len();
        let name = e.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || leased.contains(&name) {
            continue;
        }
        let when = meta.modified().unwrap_or(SystemTime::UNIX_EPOCH);
        files.push((when, name, meta.len()));
    }
    files.sort();
    let mut freed = 0;
    for (_, name, len) in files {
        if total - freed <= max_bytes {
            break;
        }
        fs::remove_file(entries_dir.join(&name))?;
        freed += len;
    }
    Ok(freed)
}
