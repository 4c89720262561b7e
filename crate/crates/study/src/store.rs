//! Durable event storage.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Result, StudyError};
use crate::event::SessionEvent;

pub trait EventStore: Send + Sync {
    /// Persist one event; returns only once it is durable.
    fn append(&self, event: &SessionEvent) -> Result<()>;
    /// Every stored event in append order.
    fn load(&self) -> Result<Vec<SessionEvent>>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    events: Mutex<Vec<SessionEvent>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventStore for MemoryStore {
    fn append(&self, event: &SessionEvent) -> Result<()> {
        self.events.lock().expect("store lock").push(event.clone());
        Ok(())
    }

    fn load(&self) -> Result<Vec<SessionEvent>> {
        Ok(self.events.lock().expect("store lock").clone())
    }
}

/// One JSON object per line in `<dir>/events.ndjson`.
#[derive(Debug)]
pub struct NdjsonStore {
    path: PathBuf,
    file: Mutex<File>,
    sync: bool,
}

pub const EVENTS_FILE: &str = "events.ndjson";

impl NdjsonStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| StudyError::io(dir, e))?;
        let path = dir.join(EVENTS_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StudyError::io(&path, e))?;
        Ok(NdjsonStore {
            path,
            file: Mutex::new(file),
            sync: true,
        })
    }

    /// Skip fsync after each event. For simulations only.
    pub fn without_sync(mut self) -> Self {
        self.sync = false;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| StudyError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| StudyError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line)
            .map_err(|err| StudyError::Corruption(format!("{}:{}: {err}", path.display(), n + 1)))?;
        out.push(e);
    }
    Ok(out)
}

impl EventStore for NdjsonStore {
    fn append(&self, event: &SessionEvent) -> Result<()> {
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        let mut f = self.file.lock().expect("store lock");
        f.write_all(line.as_bytes()).map_err(|e| StudyError::io(&self.path, e))?;
        if self.sync {
            f.sync_data().map_err(|e| StudyError::io(&self.path, e))?;
        }
        Ok(())
    }

    fn load(&self) -> Result<Vec<SessionEvent>> {
        read_events(&self.path)
    }
}
