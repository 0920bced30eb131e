use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::hash::hex_digest;

/// One line of a cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub digest: String,
    pub input: String,
    pub output: Value,
}

impl CacheEntry {
    pub fn new(input: impl Into<String>, output: Value) -> Self {
        let input = input.into();
        CacheEntry {
            digest: hex_digest(input.as_bytes()),
            input,
            output,
        }
    }
}

/// Content-addressed response cache backed by an append-only
/// newline-delimited file.
///
/// Keys are FNV-1a digests of the canonical request item; the stored input
/// is compared on lookup so a digest collision reads as a miss. Unreadable
/// lines are skipped with a warning.
#[derive(Debug)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<BufWriter<File>>>,
    skipped: usize,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: RwLock::default(),
            writer: Mutex::new(None),
            skipped: 0,
        }
    }

    /// Loads `path` if it exists and opens it for appending.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref();
        let mut entries = HashMap::new();
        let mut skipped = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) if e.digest == hex_digest(e.input.as_bytes()) => {
                        entries.insert(e.digest.clone(), e);
                    }
                    Ok(_) => {
                        log::warn!(
                            "{}:{}: cache digest mismatch, ignoring line",
                            path.display(),
                            i + 1
                        );
                        skipped += 1;
                    }
                    Err(err) => {
                        log::warn!(
                            "{}:{}: unreadable cache line ({err}), ignoring",
                            path.display(),
                            i + 1
                        );
                        skipped += 1;
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ResponseCache {
            path: Some(path.to_owned()),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(BufWriter::new(file))),
            skipped,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, input: &str) -> Option<Value> {
        let digest = hex_digest(input.as_bytes());
        let entries = self.entries.read().expect("cache lock poisoned");
        entries
            .get(&digest)
            .filter(|e| e.input == input)
            .map(|e| e.output.clone())
    }

    pub fn contains(&self, input: &str) -> bool {
        self.get(input).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lines dropped while loading.
    pub fn skipped_lines(&self) -> usize {
        self.skipped
    }

    /// Records a batch of responses and flushes them to disk.
    pub fn insert_batch(&self, batch: Vec<CacheEntry>) -> io::Result<()> {
        let mut writer = self.writer.lock().expect("cache writer poisoned");
        if let Some(w) = writer.as_mut() {
            for e in &batch {
                serde_json::to_writer(&mut *w, e)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        let mut entries = self.entries.write().expect("cache lock poisoned");
        for e in batch {
            entries.insert(e.digest.clone(), e);
        }
        Ok(())
    }
}
